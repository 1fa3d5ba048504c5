use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use rbhp_core::fem::{
    assemble_load, assemble_stiffness, extend_to_nodes, generate_disk_mesh, generate_unit_square_mesh, solve_sparse,
};
use rbhp_core::hp::split_longest_edge;
use rbhp_core::rb::{error_estimator, greedy_build, true_error, GreedyOptions, Init, RbSpace};
use rbhp_core::{build_library, AffineProblem, HpConfig, Library, ParamBox, ProblemConfig, TrainingSet};

fn diffusion() -> &'static AffineProblem {
    static P: OnceLock<AffineProblem> = OnceLock::new();
    P.get_or_init(|| ProblemConfig::new("diffusion").with_mesh_n(12).build().unwrap())
}

fn library() -> &'static Library {
    static L: OnceLock<Library> = OnceLock::new();
    L.get_or_init(|| build_library(diffusion(), &HpConfig::new(1, 0.1, 40, 4)).unwrap())
}

fn space() -> &'static RbSpace {
    static S: OnceLock<RbSpace> = OnceLock::new();
    S.get_or_init(|| {
        let p = diffusion();
        let train = TrainingSet::random(&p.domain(), 80, 2);
        let opts = GreedyOptions {
            n_max: 3,
            tol: f64::MIN_POSITIVE,
            init: Init::Random { seed: 2 },
        };
        greedy_build(p, &train, &opts).unwrap().0
    })
}

/// `u(x, y)` of `−Δu = 1` on the unit square, from the double-sine series.
fn square_series(x: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    for m in (1..=301).step_by(2) {
        for n in (1..=301).step_by(2) {
            let (m, n) = (m as f64, n as f64);
            sum += 16.0 / (PI.powi(4) * m * n * (m * m + n * n)) * (m * PI * x).sin() * (n * PI * y).sin();
        }
    }
    sum
}

fn centre_value_error(n: usize) -> f64 {
    let mesh = generate_unit_square_mesh(n).unwrap();
    let u = extend_to_nodes(
        &mesh,
        &solve_sparse(&assemble_stiffness(&mesh), &assemble_load(&mesh, 1.0)).unwrap(),
    );
    let node = mesh.node_of_dof(mesh.nearest_dof([0.5, 0.5]).unwrap());
    let [x, y] = mesh.nodes()[node];
    (u[node] - square_series(x, y)).abs()
}

#[test]
fn square_centre_value_converges_at_second_order() {
    let errors: Vec<f64> = [8, 16, 32].into_iter().map(centre_value_error).collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.7, "errors {errors:?}");
    }
}

#[test]
fn disk_without_convection_matches_radial_solution() {
    // −Δu = 10 on the disk of radius √2 gives u = 10 (2 − r²) / 4
    let p = ProblemConfig::new("convdiff-III")
        .with_mesh_target(1500)
        .build()
        .unwrap();
    let u = extend_to_nodes(p.mesh(), &p.truth_solve(&[1.0, 0.0]).unwrap());
    let mut worst = 0.0f64;
    for (i, [x, y]) in p.mesh().nodes().iter().enumerate() {
        let exact = 10.0 * (2.0 - x * x - y * y) / 4.0;
        worst = worst.max((u[i] - exact).abs());
    }
    assert!(worst <= 0.01 * 5.0, "max nodal error {worst}");
}

#[test]
fn convection_pushes_the_peak_downstream() {
    let p = ProblemConfig::new("convdiff-III")
        .with_mesh_target(1500)
        .build()
        .unwrap();
    let u = extend_to_nodes(p.mesh(), &p.truth_solve(&[0.0, 10.0]).unwrap());
    let peak = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
    let [x, y] = p.mesh().nodes()[peak];
    assert!(x > 0.3 && y.abs() < 0.3, "peak at ({x}, {y})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn square_mesh_invariants(n in 1usize..30) {
        let m = generate_unit_square_mesh(n).unwrap();
        prop_assert_eq!(m.triangles().len(), 2 * n * n);
        prop_assert_eq!(m.num_dofs(), (n - 1) * (n - 1));
        for t in 0..m.triangles().len() {
            prop_assert!(m.triangle_area(t) > 0.0);
        }
        prop_assert!((m.total_area() - 1.0).abs() <= 1e-12);
        for i in m.boundary_nodes() {
            let [x, y] = m.nodes()[i];
            prop_assert!(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
        }
        let mut seen = vec![false; m.num_dofs()];
        for node in 0..m.num_nodes() {
            if let Some(d) = m.dof_of_node(node) {
                prop_assert!(!seen[d]);
                seen[d] = true;
                prop_assert_eq!(m.node_of_dof(d), node);
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn disk_mesh_invariants(target in 8usize..900, radius in 0.2f64..3.0) {
        let m = generate_disk_mesh(radius, target).unwrap();
        for t in 0..m.triangles().len() {
            prop_assert!(m.triangle_area(t) > 0.0);
        }
        for i in m.boundary_nodes() {
            let [x, y] = m.nodes()[i];
            prop_assert!(((x * x + y * y).sqrt() - radius).abs() <= 1e-12);
        }
        let a = assemble_stiffness(&m);
        prop_assert!(a.csr().asymmetry() <= 1e-12 * a.csr().max_abs());
    }

    #[test]
    fn longest_edge_children_keep_aspect_bounded(
        w in 0.1f64..10.0, h in 0.1f64..10.0, splits in 1usize..12, path in any::<u16>()
    ) {
        let root = ParamBox::from_bounds(&[0.0, 0.0], &[w, h]).unwrap();
        let bound = root.aspect_ratio().max(2.0) * (1.0 + 1e-12);
        let mut b = root.clone();
        for s in 0..splits {
            let (lo, hi, axis) = split_longest_edge(&b).unwrap();
            prop_assert!((lo.volume() + hi.volume() - b.volume()).abs() <= 1e-12 * b.volume());
            prop_assert_eq!(lo.interval(axis).1, hi.interval(axis).0);
            b = if path >> (s % 16) & 1 == 0 { lo } else { hi };
            prop_assert!(b.aspect_ratio() <= bound, "aspect {} > {}", b.aspect_ratio(), bound);
            prop_assert!(root.contains_box(&b));
        }
    }

    #[test]
    fn located_leaf_contains_the_point(x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
        let lib = library();
        let k = lib.locate(&[x, y]).unwrap();
        prop_assert!(lib.leaves()[k].region.contains(&[x, y]));
        let e = lib.evaluate(&[x, y]).unwrap();
        prop_assert_eq!(e.leaf, k);
        prop_assert!(e.eta >= 0.0);
    }

    #[test]
    fn estimator_bounds_the_error(x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
        let p = diffusion();
        let s = space();
        let mu = [x, y];
        let err = true_error(p, s, &mu).unwrap();
        let eta = error_estimator(s, p, &mu).unwrap();
        prop_assert!(err <= eta + 1e-10, "{} > {}", err, eta);
        prop_assert!(eta <= p.gamma_ub(&mu) / p.alpha_lb(&mu) * err + 1e-10);
    }

    #[test]
    fn saved_library_evaluates_identically(x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
        static LOADED: OnceLock<Library> = OnceLock::new();
        let lib = library();
        let loaded = LOADED.get_or_init(|| Library::from_bytes(&lib.to_bytes()).unwrap());
        let (a, b) = (lib.evaluate(&[x, y]).unwrap(), loaded.evaluate(&[x, y]).unwrap());
        prop_assert_eq!(a.leaf, b.leaf);
        prop_assert!((a.eta - b.eta).abs() <= 1e-14);
    }
}
