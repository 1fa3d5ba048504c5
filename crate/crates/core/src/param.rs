//! Tensor-product parameter boxes and training samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point in parameter space (all coordinates, frozen ones included).
pub type Param = Vec<f64>;

/// One coordinate of a [`ParamBox`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    Free { lower: f64, upper: f64 },
    Frozen(f64),
}

/// Axis-aligned box `Π [a_j, b_j]`; frozen coordinates model degenerate
/// domains such as `{0} × [0, 10]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    axes: Vec<Extent>,
}

impl ParamBox {
    pub fn new(axes: Vec<Extent>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("a parameter box needs at least one axis".into()));
        }
        for (j, e) in axes.iter().enumerate() {
            match *e {
                Extent::Free { lower, upper } => {
                    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "axis {j}: need finite lower < upper, got [{lower}, {upper}]"
                        )));
                    }
                }
                Extent::Frozen(v) if !v.is_finite() => {
                    return Err(Error::InvalidArgument(format!(
                        "axis {j}: frozen value {v} is not finite"
                    )));
                }
                Extent::Frozen(_) => {}
            }
        }
        Ok(Self { axes })
    }

    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument("bound vectors differ in length".into()));
        }
        Self::new(
            lower
                .iter()
                .zip(upper)
                .map(|(&lower, &upper)| Extent::Free { lower, upper })
                .collect(),
        )
    }

    pub fn axes(&self) -> &[Extent] {
        &self.axes
    }

    /// Total number of coordinates, frozen included.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn free_axes(&self) -> Vec<usize> {
        (0..self.axes.len())
            .filter(|&j| matches!(self.axes[j], Extent::Free { .. }))
            .collect()
    }

    /// Number of free coordinates (the `d` of the partition analysis).
    pub fn effective_dim(&self) -> usize {
        self.free_axes().len()
    }

    /// Closed interval of axis `j` (a point for frozen axes).
    pub fn interval(&self, j: usize) -> (f64, f64) {
        match self.axes[j] {
            Extent::Free { lower, upper } => (lower, upper),
            Extent::Frozen(v) => (v, v),
        }
    }

    /// Side lengths of the free axes.
    pub fn side_lengths(&self) -> Vec<f64> {
        self.free_axes()
            .into_iter()
            .map(|j| {
                let (a, b) = self.interval(j);
                b - a
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths().iter().product()
    }

    /// Longest free side `ĥ`.
    pub fn longest_side(&self) -> f64 {
        self.side_lengths().into_iter().fold(0.0, f64::max)
    }

    /// `min_{i,j} h_i / h_j` over the free sides.
    pub fn aspect_ratio(&self) -> f64 {
        let h = self.side_lengths();
        let min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let max = h.iter().copied().fold(0.0, f64::max);
        min / max
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.axes.len()
            && self.axes.iter().zip(mu).all(|(e, &m)| match *e {
                Extent::Free { lower, upper } => (lower..=upper).contains(&m),
                Extent::Frozen(v) => m == v,
            })
    }

    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(mu.to_vec()))
        }
    }

    pub fn center(&self) -> Param {
        (0..self.dim())
            .map(|j| {
                let (a, b) = self.interval(j);
                0.5 * (a + b)
            })
            .collect()
    }

    /// Uniform sample; frozen coordinates are copied exactly.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Param {
        self.axes
            .iter()
            .map(|e| match *e {
                Extent::Free { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
                Extent::Frozen(v) => v,
            })
            .collect()
    }

    /// Halves at `mid` along free axis `axis`: `([a, mid], [mid, b])`.
    pub fn split_at(&self, axis: usize, mid: f64) -> (ParamBox, ParamBox) {
        let (lower, upper) = match self.axes[axis] {
            Extent::Free { lower, upper } => (lower, upper),
            Extent::Frozen(_) => panic!("cannot split frozen axis {axis}"),
        };
        let mut left = self.clone();
        let mut right = self.clone();
        left.axes[axis] = Extent::Free { lower, upper: mid };
        right.axes[axis] = Extent::Free { lower: mid, upper };
        (left, right)
    }

    pub fn contains_box(&self, other: &ParamBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|j| {
                let (a, b) = self.interval(j);
                let (c, d) = other.interval(j);
                a <= c && d <= b
            })
    }
}

/// Finite training sample of a box.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub points: Vec<Param>,
    pub seed: u64,
    pub region: ParamBox,
}

impl TrainingSet {
    /// `size` uniform points drawn from `region` with a ChaCha8 stream.
    pub fn random(region: &ParamBox, size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..size).map(|_| region.sample(&mut rng)).collect();
        Self {
            points,
            seed,
            region: region.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// SplitMix64 finalizer, used to derive per-node seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(ParamBox::from_bounds(&[1.0], &[0.0]).is_err());
        assert!(ParamBox::from_bounds(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn frozen_axes_are_excluded_from_geometry() {
        let b = ParamBox::new(vec![
            Extent::Frozen(0.0),
            Extent::Free {
                lower: 0.0,
                upper: 10.0,
            },
        ])
        .unwrap();
        assert_eq!(b.effective_dim(), 1);
        assert_eq!(b.volume(), 10.0);
        assert!(b.contains(&[0.0, 3.0]));
        assert!(!b.contains(&[0.1, 3.0]));
        assert!(!b.contains(&[0.0, 10.5]));
    }

    #[test]
    fn training_set_is_reproducible() {
        let b = ParamBox::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let a = TrainingSet::random(&b, 50, 7);
        let c = TrainingSet::random(&b, 50, 7);
        assert_eq!(a.points, c.points);
        assert_ne!(a.points, TrainingSet::random(&b, 50, 8).points);
    }

    proptest! {
        #[test]
        fn samples_stay_inside(seed in any::<u64>(), lo in -5.0f64..0.0, w in 0.1f64..5.0, frozen in -2.0f64..2.0) {
            let b = ParamBox::new(vec![Extent::Free { lower: lo, upper: lo + w }, Extent::Frozen(frozen)]).unwrap();
            for p in TrainingSet::random(&b, 20, seed).points {
                prop_assert!(b.contains(&p));
                prop_assert_eq!(p[1], frozen);
            }
        }

        #[test]
        fn split_halves_partition_volume(lo in -5.0f64..0.0, w in 0.1f64..5.0, lo2 in -5.0f64..0.0, w2 in 0.1f64..5.0) {
            let b = ParamBox::from_bounds(&[lo, lo2], &[lo + w, lo2 + w2]).unwrap();
            let mid = lo + 0.5 * w;
            let (l, r) = b.split_at(0, mid);
            prop_assert!((l.volume() + r.volume() - b.volume()).abs() <= 1e-12 * b.volume());
            prop_assert!(b.contains_box(&l) && b.contains_box(&r));
        }
    }
}
