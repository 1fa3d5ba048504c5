use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fem::{generate_disk_mesh, generate_unit_square_mesh};
use crate::param::Extent;
use crate::problem::{build_convdiff_problem, build_diffusion_problem, ConvDiffCase};

fn toy_diffusion() -> AffineProblem {
    build_diffusion_problem(generate_unit_square_mesh(8).unwrap(), 0.105).unwrap()
}

fn toy_convdiff(case: ConvDiffCase) -> AffineProblem {
    build_convdiff_problem(generate_disk_mesh(2f64.sqrt(), 120).unwrap(), case).unwrap()
}

fn refined_library() -> (AffineProblem, Library) {
    let p = toy_diffusion();
    let cfg = HpConfig::new(1, 0.05, 30, 11).keeping_offline_data();
    let lib = build_library(&p, &cfg).unwrap();
    assert!(lib.num_leaves() > 3, "K = {}", lib.num_leaves());
    (p, lib)
}

#[test]
fn bool_vec_labels() {
    let root = BoolVec::root();
    assert_eq!(root.level(), 1);
    let c = root.child(false).child(true);
    assert_eq!(c.to_string(), "101");
    assert_eq!(c.level(), 3);
    assert!(BoolVec::from_bits(vec![false, true]).is_err());
    assert_ne!(root.child(false).seed(7), root.child(true).seed(7));
    assert_eq!(c.seed(7), BoolVec::from_bits(vec![true, false, true]).unwrap().seed(7));
}

#[test]
fn longest_edge_split_examples() {
    let square = ParamBox::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let (lo, hi, axis) = split_longest_edge(&square).unwrap();
    assert_eq!(axis, 0);
    assert_eq!(lo, ParamBox::from_bounds(&[-1.0, -1.0], &[0.0, 1.0]).unwrap());
    assert_eq!(hi, ParamBox::from_bounds(&[0.0, -1.0], &[1.0, 1.0]).unwrap());

    let pi = std::f64::consts::PI;
    let rect = ParamBox::from_bounds(&[0.0, 0.0], &[pi, 10.0]).unwrap();
    let (lo, hi, axis) = split_longest_edge(&rect).unwrap();
    assert_eq!(axis, 1);
    assert_eq!(lo, ParamBox::from_bounds(&[0.0, 0.0], &[pi, 5.0]).unwrap());
    assert_eq!(hi, ParamBox::from_bounds(&[0.0, 5.0], &[pi, 10.0]).unwrap());

    let line = ParamBox::new(vec![
        Extent::Frozen(0.0),
        Extent::Free {
            lower: 0.0,
            upper: 10.0,
        },
    ])
    .unwrap();
    let (lo, hi, axis) = split_longest_edge(&line).unwrap();
    assert_eq!(axis, 1);
    assert_eq!(lo.interval(0), (0.0, 0.0));
    assert_eq!(lo.interval(1), (0.0, 5.0));
    assert_eq!(hi.interval(1), (5.0, 10.0));

    let point = ParamBox::new(vec![Extent::Frozen(1.0)]).unwrap();
    assert!(split_longest_edge(&point).is_err());
}

#[test]
fn loose_tolerance_gives_single_leaf() {
    let p = toy_diffusion();
    let lib = build_library(&p, &HpConfig::new(2, 1e3, 20, 1)).unwrap();
    assert_eq!(lib.num_leaves(), 1);
    assert_eq!(lib.depth(), 1);
    let stats = lib.partition_stats();
    assert_eq!(stats.quasi_uniformity, 1.0);
    assert_eq!(lib.locate(&[0.3, -0.9]).unwrap(), 0);
}

#[test]
fn rejects_bad_configs() {
    let p = toy_diffusion();
    assert!(build_library(&p, &HpConfig::new(0, 0.1, 10, 1)).is_err());
    assert!(build_library(&p, &HpConfig::new(2, 0.0, 10, 1)).is_err());
    assert!(build_library(&p, &HpConfig::new(4, 0.1, 3, 1)).is_err());
    let outside = HpConfig::new(1, 0.1, 10, 1).with_init(Init::Param(vec![2.0, 0.0]));
    assert!(matches!(build_library(&p, &outside), Err(Error::OutOfDomain(_))));
}

#[test]
fn depth_safeguard() {
    let p = toy_diffusion();
    let cfg = HpConfig::new(1, 1e-9, 10, 3).with_max_depth(3);
    assert!(matches!(build_library(&p, &cfg), Err(Error::DepthExceeded(3))));
}

#[test]
fn partition_tiles_the_root_box() {
    let (_, lib) = refined_library();
    let stats = lib.partition_stats();
    assert!(stats.tiling_error() <= 1e-12);
    assert!(stats.volume_bound_violations.is_empty());
    assert!(stats.quasi_uniformity > 0.0 && stats.quasi_uniformity <= 1.0);
    for node in lib.nodes() {
        if let NodeState::Internal { children, axis, .. } = node.state {
            for c in children {
                let child = &lib.nodes()[c].region;
                assert!(node.region.contains_box(child));
                let (a, b) = node.region.interval(axis);
                let (ca, cb) = child.interval(axis);
                assert_eq!(cb - ca, 0.5 * (b - a));
            }
        }
    }
}

#[test]
fn leaves_are_certified_and_respect_n() {
    let (p, lib) = refined_library();
    for leaf in lib.leaves() {
        assert!(leaf.eta_max <= lib.config().eps);
        assert!(leaf.basis_size() >= 1 && leaf.basis_size() <= lib.config().n);
        for mu in &leaf.selected {
            assert!(leaf.region.contains(mu));
            let eval = lib.evaluate(mu).unwrap();
            assert!(eval.eta <= 1e-7, "eta at snapshot = {}", eval.eta);
        }
        let basis = leaf.basis.as_ref().unwrap();
        let x = p.inner_product();
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((x.bilinear(a, b) - target).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn locate_histogram_matches_leaf_volumes() {
    let (_, lib) = refined_library();
    let root = lib.root_box().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples = 10_000;
    let mut counts = vec![0usize; lib.num_leaves()];
    for _ in 0..samples {
        let mu = root.sample(&mut rng);
        let k = lib.locate(&mu).unwrap();
        assert!(lib.leaves()[k].region.contains(&mu));
        counts[k] += 1;
    }
    let total = root.volume();
    for (k, leaf) in lib.leaves().iter().enumerate() {
        let p = leaf.region.volume() / total;
        let mean = samples as f64 * p;
        let sd = (samples as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (counts[k] as f64 - mean).abs() <= 5.0 * sd,
            "leaf {k}: {} vs {mean}",
            counts[k]
        );
    }
}

#[test]
fn locate_boundary_conventions() {
    let (_, lib) = refined_library();
    let NodeState::Internal { axis, mid, children } = lib.nodes()[0].state else {
        panic!("root should be split");
    };
    assert_eq!((axis, mid), (0, 0.0));
    let right = &lib.nodes()[children[1]].region;
    let k = lib.locate(&[0.0, -0.5]).unwrap();
    assert!(right.contains_box(&lib.leaves()[k].region));
    let k = lib.locate(&[0.5, -0.5]).unwrap();
    assert!(right.contains_box(&lib.leaves()[k].region));
    // the closed upper corner belongs to exactly one leaf
    assert!(lib.locate(&[1.0, 1.0]).is_ok());
    assert!(lib.locate(&[-1.0, -1.0]).is_ok());
    assert!(matches!(lib.locate(&[1.0 + 1e-12, 0.0]), Err(Error::OutOfDomain(_))));
}

#[test]
fn build_is_deterministic() {
    let (p, lib) = refined_library();
    let again = build_library(&p, &HpConfig::new(1, 0.05, 30, 11)).unwrap();
    assert_eq!(again.to_bytes(), lib.to_bytes());
    assert_eq!(again.truth_solves(), lib.truth_solves());
}

#[test]
fn one_dimensional_domain_splits_free_axis_only() {
    let p = toy_convdiff(ConvDiffCase::II);
    let lib = build_library(&p, &HpConfig::new(1, 0.5, 20, 5)).unwrap();
    assert!(lib.num_leaves() > 1);
    for leaf in lib.leaves() {
        assert_eq!(leaf.region.interval(1), (10.0, 10.0));
    }
    let stats = lib.partition_stats();
    assert_eq!(stats.dim, 1);
    assert!(stats.tiling_error() <= 1e-12);
    let pi = std::f64::consts::PI;
    assert!(lib.locate(&[pi, 10.0]).is_ok());
    assert!(lib.locate(&[1.0, 9.0]).is_err());
}

#[test]
fn fixed_initial_parameter_is_the_first_root_snapshot() {
    let p = toy_convdiff(ConvDiffCase::III);
    let cfg = HpConfig::new(2, 1e3, 20, 5).with_init(Init::Param(vec![0.0, 0.0]));
    let lib = build_library(&p, &cfg).unwrap();
    assert_eq!(lib.leaves()[0].selected[0], vec![0.0, 0.0]);
}

#[test]
fn round_trip_preserves_online_results() {
    let (_, lib) = refined_library();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib.rbhp");
    lib.save(&path).unwrap();
    let loaded = Library::load(&path).unwrap();
    assert_eq!(loaded.num_leaves(), lib.num_leaves());
    assert_eq!(loaded.config(), lib.config());
    assert_eq!(loaded.kind(), lib.kind());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mu = lib.root_box().sample(&mut rng);
        let a = lib.evaluate(&mu).unwrap();
        let b = loaded.evaluate(&mu).unwrap();
        assert_eq!(a.leaf, b.leaf);
        assert!((a.eta - b.eta).abs() <= 1e-14);
        assert!((&a.coeffs - &b.coeffs).amax() <= 1e-14);
    }
    assert_eq!(loaded.to_bytes(), lib.to_bytes());
    assert!(loaded.leaves().iter().all(|l| l.basis.is_none()));
}

#[test]
fn corrupt_files_are_rejected() {
    let (_, lib) = refined_library();
    let bytes = lib.to_bytes();

    let mut versioned = bytes.clone();
    versioned[4] = 9;
    assert!(matches!(
        Library::from_bytes(&versioned),
        Err(Error::VersionMismatch { found: 9, expected: 1 })
    ));

    assert!(matches!(
        Library::from_bytes(&bytes[..bytes.len() / 2]),
        Err(Error::Truncated)
    ));
    assert!(matches!(Library::from_bytes(&bytes[..6]), Err(Error::Truncated)));

    let mut flipped = bytes.clone();
    let i = bytes.len() - 100;
    flipped[i] ^= 0x40;
    assert!(matches!(Library::from_bytes(&flipped), Err(Error::ChecksumMismatch)));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(Library::from_bytes(&magic), Err(Error::Format(_))));
}

#[test]
fn partition_csv_rows() {
    let (_, lib) = refined_library();
    let csv = lib.partition_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,lower_1,upper_1,lower_2,upper_2,n,eta_max");
    let mut area = 0.0;
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), k + 1);
        let v: Vec<f64> = f[1..5].iter().map(|s| s.parse().unwrap()).collect();
        area += (v[1] - v[0]) * (v[3] - v[2]);
    }
    assert!((area - 4.0).abs() <= 1e-12);
}
