use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rbhp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbhp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = rbhp(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn failure(dir: &Path, args: &[&str]) -> String {
    let out = rbhp(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

const SMALL_SWEEP: &[&str] = &[
    "sweep",
    "--problem",
    "convdiff-II",
    "--mesh-target",
    "300",
    "--train-size",
    "30",
    "--N",
    "1",
    "--N",
    "2",
    "--eps",
    "1",
    "--eps",
    "0.3",
    "--eps",
    "0.1",
    "--eps",
    "0.03",
];

#[test]
fn offline_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary = ok(
        d,
        &[
            "offline",
            "--problem",
            "diffusion",
            "--mesh-n",
            "10",
            "--N",
            "2",
            "--eps",
            "0.1",
            "--train-size",
            "50",
            "--out",
            "lib.rbhp",
        ],
    );
    assert!(summary.starts_with("algorithm=tree K="), "{summary}");
    let csv = ok(
        d,
        &[
            "eval",
            "--library",
            "lib.rbhp",
            "--mu",
            "0.1,-0.5",
            "--mu",
            "-1,1",
            "--mu",
            "1,1",
        ],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mu_1,mu_2,leaf,n,eta");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[2].parse::<usize>().unwrap() >= 1);
        assert!(f[3].parse::<usize>().unwrap() <= 2);
        let eta: f64 = f[4].parse().unwrap();
        assert!(eta.is_finite() && eta >= 0.0);
    }
    let err = failure(d, &["eval", "--library", "lib.rbhp", "--mu", "3,0"]);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn sweep_csv_is_reproducible_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut first = SMALL_SWEEP.to_vec();
    first.extend(["--out", "a.csv"]);
    let mut second = SMALL_SWEEP.to_vec();
    second.extend(["--out", "b.csv"]);
    ok(d, &first);
    ok(d, &second);
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    assert!(d.join("a.timing.csv").exists());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 9);

    let fit = ok(d, &["fit", "--input", "a.csv", "--problem", "convdiff-II"]);
    let rows: Vec<Vec<&str>> = fit.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[0][1], rows[0][6]), ("tree", "1", "1"));
    assert_eq!(rows[1][6], "0.5");
    let slope: f64 = rows[0][2].parse().unwrap();
    assert!(slope > 0.5 && slope < 1.5, "{slope}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.cfg"),
        "# linear study\nproblem = convdiff-I\nmesh-target = 300\nN = 3\ntrain-size = 20\nout = from_file.csv\n",
    )
    .unwrap();
    ok(d, &["linear", "--config", "run.cfg"]);
    let from_file = fs::read_to_string(d.join("from_file.csv")).unwrap();
    assert_eq!(from_file.lines().count(), 4);
    assert_eq!(from_file.lines().nth(1).unwrap().split(',').nth(2).unwrap(), "1e1");

    let stdout = ok(d, &["linear", "--config", "run.cfg", "--N", "2", "--out", "flag.csv"]);
    assert!(stdout.is_empty());
    assert_eq!(fs::read_to_string(d.join("flag.csv")).unwrap().lines().count(), 3);

    fs::write(d.join("bad.cfg"), "colour = red\n").unwrap();
    assert!(failure(d, &["linear", "--config", "bad.cfg"]).contains("unknown key"));
}

#[test]
fn figures_for_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = [
        "--problem",
        "diffusion",
        "--mesh-n",
        "8",
        "--N",
        "1",
        "--eps",
        "0.1",
        "--train-size",
        "20",
    ];
    let mut tree = vec!["offline"];
    tree.extend(common);
    tree.extend(["--out", "tree.rbhp"]);
    ok(d, &tree);
    let mut prox = vec!["offline", "--algorithm", "proximity", "--init", "random"];
    prox.extend(common);
    prox.extend(["--out", "prox.rbhp"]);
    assert!(ok(d, &prox).starts_with("algorithm=proximity"));

    let listed = ok(d, &["figure", "--library", "tree.rbhp", "--out", "tree"]);
    assert_eq!(listed.lines().count(), 2);
    assert!(fs::read_to_string(d.join("tree.svg")).unwrap().starts_with("<svg"));
    ok(d, &["figure", "--library", "prox.rbhp", "--out", "prox"]);
    assert!(fs::read_to_string(d.join("prox.csv"))
        .unwrap()
        .starts_with("i,j,mu_1,mu_2,k\n"));
    assert!(d.join("prox.svg").exists());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(failure(d, &["offline", "--problem", "diffusion", "--N", "1", "--eps", "0.1"]).contains("--out"));
    assert!(failure(d, &["sweep", "--problem", "heat", "--N", "1", "--eps", "0.1"]).contains("unknown problem"));
    assert!(failure(
        d,
        &[
            "offline",
            "--problem",
            "diffusion",
            "--N",
            "1",
            "--N",
            "2",
            "--eps",
            "0.1",
            "--out",
            "x"
        ]
    )
    .contains("exactly one --N"));
    assert!(failure(
        d,
        &[
            "sweep",
            "--problem",
            "diffusion",
            "--N",
            "1",
            "--eps",
            "0.1",
            "--algorithm",
            "kd"
        ]
    )
    .contains("kd"));
    assert!(failure(d, &["figure", "--library", "missing.rbhp", "--out", "f"]).contains("missing.rbhp"));
}
