//! Fixtures shared by the benchmarks: small but refined partitions built
//! once per run.

use rbhp_core::harness::{build_partition, Algorithm, Partition};
use rbhp_core::rb::Init;
use rbhp_core::{HpConfig, Param, ProblemConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Diffusion partition with `N = 2` leaves certified to `eps`.
pub fn diffusion_partition(algorithm: Algorithm, eps: f64) -> Partition {
    let problem = ProblemConfig::new("diffusion").with_mesh_n(16).build().unwrap();
    let cfg = HpConfig::new(2, eps, 100, 1).with_init(Init::Param(vec![0.0, 0.0]));
    build_partition(&problem, algorithm, &cfg).unwrap()
}

/// `count` uniform query points of the partition's domain.
pub fn queries(partition: &Partition, count: usize, seed: u64) -> Vec<Param> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = partition.root_box();
    (0..count).map(|_| root.sample(&mut rng)).collect()
}
