use super::Library;

/// Geometric diagnostics of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStats {
    /// Number of leaves `K`.
    pub k: usize,
    /// Deepest leaf level `L`.
    pub depth: usize,
    /// Free dimension `d`.
    pub dim: usize,
    /// Leaf volumes `δ_k`.
    pub volumes: Vec<f64>,
    /// Longest leaf sides `ĥ_k`.
    pub longest_sides: Vec<f64>,
    /// Leaf aspect ratios `β_k = min h_i / h_j`.
    pub aspect_ratios: Vec<f64>,
    /// `β = ½ min h_i / h_j` of the root box.
    pub beta: f64,
    /// `min δ_k / max δ_k`.
    pub quasi_uniformity: f64,
    pub basis_sizes: Vec<usize>,
    pub root_volume: f64,
    /// Leaves violating `δ_k ≥ β^{d−1} ĥ_k^d`.
    pub volume_bound_violations: Vec<usize>,
}

impl PartitionStats {
    pub fn volume_sum(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// `|Σ δ_k − |𝒟|| / |𝒟|`
    pub fn tiling_error(&self) -> f64 {
        (self.volume_sum() - self.root_volume).abs() / self.root_volume
    }
}

impl Library {
    pub fn partition_stats(&self) -> PartitionStats {
        let root = self.root_box();
        let dim = root.effective_dim();
        let beta = 0.5 * root.aspect_ratio();
        let volumes: Vec<f64> = self.leaves.iter().map(|l| l.region.volume()).collect();
        let longest_sides: Vec<f64> = self.leaves.iter().map(|l| l.region.longest_side()).collect();
        let aspect_ratios = self.leaves.iter().map(|l| l.region.aspect_ratio()).collect();
        let min = volumes.iter().copied().fold(f64::INFINITY, f64::min);
        let max = volumes.iter().copied().fold(0.0, f64::max);
        let volume_bound_violations = volumes
            .iter()
            .zip(&longest_sides)
            .enumerate()
            .filter(|(_, (&delta, &h))| {
                let bound = beta.powi(dim as i32 - 1) * h.powi(dim as i32);
                delta < bound * (1.0 - 1e-12)
            })
            .map(|(k, _)| k)
            .collect();
        PartitionStats {
            k: self.num_leaves(),
            depth: self.depth(),
            dim,
            volumes,
            longest_sides,
            aspect_ratios,
            beta,
            quasi_uniformity: min / max,
            basis_sizes: self.leaves.iter().map(|l| l.basis_size()).collect(),
            root_volume: root.volume(),
            volume_bound_violations,
        }
    }
}
