//! `rbhp`: build, query and study partitioned reduced-basis libraries.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbhp_core::harness::{
    build_partition, export_partition_figure, fit_loglog_slope, parse_sweep_csv, run_epsilon_sweep,
    run_linear_convergence, sweep_csv, theoretical_slope, timing_csv, Algorithm, Partition, SweepOptions,
};
use rbhp_core::hp::DEFAULT_MAX_DEPTH;
use rbhp_core::rb::Init;
use rbhp_core::{HpConfig, ProblemConfig, ProblemKind};

#[derive(Parser)]
#[command(
    name = "rbhp",
    version,
    about = "Certified reduced-basis libraries on partitioned parameter domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build a partition with its leaf models and save it to --out.
    Offline,
    /// Load --library and evaluate it at every --mu.
    Eval,
    /// Greedy convergence of a single reduced space over the whole domain.
    Linear,
    /// K for every (N, eps) pair.
    Sweep,
    /// Log–log slope of K against 1/eps from a sweep CSV given by --input.
    Fit,
    /// Partition drawing (SVG for two free parameters) plus its CSV twin.
    Figure,
}

#[derive(Args, Default)]
struct Flags {
    /// Settings file with `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// diffusion, convdiff-I, convdiff-II or convdiff-III.
    #[arg(long, global = true)]
    problem: Option<String>,
    /// tree or proximity.
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// Maximum basis size per leaf; repeatable for sweeps.
    #[arg(long = "N", global = true, value_delimiter = ',')]
    n: Vec<usize>,
    /// Leaf tolerance; repeatable for sweeps.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    eps: Vec<f64>,
    #[arg(long, global = true)]
    train_size: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// First greedy parameter: `random` or a comma-separated point.
    #[arg(long, global = true, allow_hyphen_values = true)]
    init: Option<String>,
    /// Cells per side of the unit-square mesh.
    #[arg(long, global = true)]
    mesh_n: Option<usize>,
    /// Target triangle count of the disk mesh.
    #[arg(long, global = true)]
    mesh_target: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    /// Thermal conductivity of the square inclusion.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Saved partition for eval and figure.
    #[arg(long, global = true)]
    library: Option<PathBuf>,
    /// Sweep CSV for fit.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Query point, comma-separated; repeatable.
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Vec<String>,
}

/// Flags merged over the settings file.
struct Settings {
    flags: Flags,
    file: BTreeMap<String, String>,
}

type Res<T> = std::result::Result<T, String>;

fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> Res<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| format!("{key}: '{}': {e}", s.trim())))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, text: &str) -> Res<T>
where
    T::Err: std::fmt::Display,
{
    text.trim()
        .parse::<T>()
        .map_err(|e| format!("{key}: '{}': {e}", text.trim()))
}

impl Settings {
    fn new(flags: Flags) -> Res<Self> {
        let file = match &flags.config {
            Some(path) => config::load(path)?,
            None => BTreeMap::new(),
        };
        Ok(Self { flags, file })
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str, flag: Option<T>) -> Res<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match (flag, self.file.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(text)) => parse_one(key, text).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn list<T: std::str::FromStr + Clone>(&self, key: &str, flag: &[T]) -> Res<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        if !flag.is_empty() {
            return Ok(flag.to_vec());
        }
        match self.file.get(key) {
            Some(text) => parse_list(key, text),
            None => Ok(Vec::new()),
        }
    }

    fn text(&self, key: &str, flag: &Option<String>) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).cloned())
    }

    fn path(&self, key: &str, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.file.get(key).map(PathBuf::from))
    }

    fn problem_config(&self) -> Res<ProblemConfig> {
        let name = self
            .text("problem", &self.flags.problem)
            .ok_or("--problem is required")?;
        let mut cfg = ProblemConfig::new(&name);
        if let Some(n) = self.scalar("mesh-n", self.flags.mesh_n)? {
            cfg = cfg.with_mesh_n(n);
        }
        if let Some(t) = self.scalar("mesh-target", self.flags.mesh_target)? {
            cfg = cfg.with_mesh_target(t);
        }
        if let Some(a) = self.scalar("alpha", self.flags.alpha)? {
            cfg.alpha = a;
        }
        Ok(cfg)
    }

    fn algorithm(&self) -> Res<Algorithm> {
        match self.text("algorithm", &self.flags.algorithm) {
            Some(text) => text.parse().map_err(|e: rbhp_core::Error| e.to_string()),
            None => Ok(Algorithm::Tree),
        }
    }

    /// `(0, 0)` for diffusion and `(0, 10)` for the disk problems unless
    /// overridden.
    fn init(&self, kind: &ProblemKind) -> Res<Init> {
        let seed = self.seed()?;
        match self.text("init", &self.flags.init) {
            Some(text) if text.trim() == "random" => Ok(Init::Random { seed }),
            Some(text) => Ok(Init::Param(parse_list("init", &text)?)),
            None => Ok(Init::Param(match kind {
                ProblemKind::Diffusion { .. } => vec![0.0, 0.0],
                ProblemKind::ConvDiff(_) => vec![0.0, 10.0],
            })),
        }
    }

    fn seed(&self) -> Res<u64> {
        Ok(self.scalar("seed", self.flags.seed)?.unwrap_or(1))
    }

    fn train_size(&self, default: usize) -> Res<usize> {
        Ok(self.scalar("train-size", self.flags.train_size)?.unwrap_or(default))
    }

    fn max_depth(&self) -> Res<usize> {
        Ok(self
            .scalar("max-depth", self.flags.max_depth)?
            .unwrap_or(DEFAULT_MAX_DEPTH))
    }

    fn ns(&self) -> Res<Vec<usize>> {
        self.list("N", &self.flags.n)
    }

    fn eps(&self) -> Res<Vec<f64>> {
        self.list("eps", &self.flags.eps)
    }

    fn single<T: Copy>(&self, flag: &str, values: Vec<T>) -> Res<T> {
        match values.as_slice() {
            [v] => Ok(*v),
            [] => Err(format!("--{flag} is required")),
            _ => Err(format!("exactly one --{flag} expected")),
        }
    }

    fn points(&self) -> Res<Vec<Vec<f64>>> {
        if !self.flags.mu.is_empty() {
            return self.flags.mu.iter().map(|m| parse_list("mu", m)).collect();
        }
        match self.file.get("mu") {
            Some(text) => text.split(';').map(|m| parse_list("mu", m)).collect(),
            None => Ok(Vec::new()),
        }
    }
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn offline(s: &Settings) -> Res<()> {
    let problem = s.problem_config()?.build().map_err(|e| e.to_string())?;
    let out = s.path("out", &s.flags.out).ok_or("--out is required")?;
    let algorithm = s.algorithm()?;
    let cfg = HpConfig::new(
        s.single("N", s.ns()?)?,
        s.single("eps", s.eps()?)?,
        s.train_size(1000)?,
        s.seed()?,
    )
    .with_init(s.init(&problem.kind())?)
    .with_max_depth(s.max_depth()?);
    let partition = build_partition(&problem, algorithm, &cfg).map_err(|e| e.to_string())?;
    partition.save(&out).map_err(|e| e.to_string())?;
    println!(
        "algorithm={algorithm} K={} depth={} truth_solves={} bytes={} file={}",
        partition.num_leaves(),
        partition.depth(),
        partition.truth_solves(),
        partition.to_bytes().len(),
        out.display()
    );
    Ok(())
}

fn eval(s: &Settings) -> Res<()> {
    let path = s.path("library", &s.flags.library).ok_or("--library is required")?;
    let partition = Partition::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let points = s.points()?;
    if points.is_empty() {
        return Err("at least one --mu is required".into());
    }
    let dim = partition.root_box().dim();
    let mut csv = String::new();
    for j in 1..=dim {
        write!(csv, "mu_{j},").unwrap();
    }
    csv.push_str("leaf,n,eta\n");
    for mu in &points {
        let e = partition.evaluate(mu).map_err(|e| format!("{mu:?}: {e}"))?;
        for v in mu {
            write!(csv, "{v},").unwrap();
        }
        writeln!(csv, "{},{},{:e}", e.leaf + 1, partition.basis_size(e.leaf), e.eta).unwrap();
    }
    emit(s.path("out", &s.flags.out).as_deref(), &csv)
}

fn linear(s: &Settings) -> Res<()> {
    let problem = s.problem_config()?.build().map_err(|e| e.to_string())?;
    let n_max = match s.ns()?.as_slice() {
        [] => 20,
        [n] => *n,
        _ => return Err("exactly one --N expected".into()),
    };
    let default_train = if problem.domain().effective_dim() >= 2 {
        10_000
    } else {
        100
    };
    let trace = run_linear_convergence(
        &problem,
        n_max,
        s.train_size(default_train)?,
        s.seed()?,
        s.init(&problem.kind())?,
    )
    .map_err(|e| e.to_string())?;
    emit(
        s.path("out", &s.flags.out).as_deref(),
        &trace.to_csv(problem.domain().dim()),
    )
}

/// `sweep.csv` → `sweep.timing.csv`
fn timing_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.timing.csv"))
}

fn sweep(s: &Settings) -> Res<()> {
    let problem = s.problem_config()?.build().map_err(|e| e.to_string())?;
    let (ns, eps) = (s.ns()?, s.eps()?);
    if ns.is_empty() || eps.is_empty() {
        return Err("--N and --eps are required".into());
    }
    let opts = SweepOptions {
        train_size: s.train_size(1000)?,
        seed: s.seed()?,
        init: s.init(&problem.kind())?,
        max_depth: s.max_depth()?,
    };
    let (records, _) = run_epsilon_sweep(&problem, s.algorithm()?, &ns, &eps, &opts).map_err(|e| e.to_string())?;
    let out = s.path("out", &s.flags.out);
    emit(out.as_deref(), &sweep_csv(&records))?;
    if let Some(out) = out {
        emit(Some(&timing_path(&out)), &timing_csv(&records))?;
    }
    Ok(())
}

fn fit(s: &Settings) -> Res<()> {
    let input = s.path("input", &s.flags.input).ok_or("--input is required")?;
    let text = fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
    let records = parse_sweep_csv(&text).map_err(|e| e.to_string())?;
    let dim = match s.text("problem", &s.flags.problem) {
        Some(name) => {
            let alpha = s
                .scalar("alpha", s.flags.alpha)?
                .unwrap_or(rbhp_core::problem::DEFAULT_ALPHA);
            Some(
                ProblemKind::from_name(&name, alpha)
                    .map_err(|e| e.to_string())?
                    .domain()
                    .effective_dim(),
            )
        }
        None => None,
    };
    let algorithms = match s.text("algorithm", &s.flags.algorithm) {
        Some(_) => vec![s.algorithm()?],
        None => vec![Algorithm::Tree, Algorithm::Proximity],
    };
    let mut ns = s.ns()?;
    if ns.is_empty() {
        ns = records.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
    }
    let mut csv = String::from("algorithm,N,slope,intercept,r_squared,rows,theoretical\n");
    for algorithm in algorithms {
        for &n in &ns {
            if !records.iter().any(|r| r.algorithm == algorithm && r.n == n) {
                continue;
            }
            let fit = fit_loglog_slope(&records, n, algorithm).map_err(|e| format!("{algorithm} N={n}: {e}"))?;
            let theory = dim.map(|d| theoretical_slope(d, n).to_string()).unwrap_or_default();
            writeln!(
                csv,
                "{algorithm},{n},{},{},{},{},{theory}",
                fit.slope, fit.intercept, fit.r_squared, fit.rows
            )
            .unwrap();
        }
    }
    emit(s.path("out", &s.flags.out).as_deref(), &csv)
}

fn figure(s: &Settings) -> Res<()> {
    let path = s.path("library", &s.flags.library).ok_or("--library is required")?;
    let stem = s.path("out", &s.flags.out).ok_or("--out is required")?;
    let partition = Partition::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let written = export_partition_figure(partition.figure_source(), &stem).map_err(|e| e.to_string())?;
    for file in written {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Settings::new(cli.flags).and_then(|s| match cli.command {
        Command::Offline => offline(&s),
        Command::Eval => eval(&s),
        Command::Linear => linear(&s),
        Command::Sweep => sweep(&s),
        Command::Fit => fit(&s),
        Command::Figure => figure(&s),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
