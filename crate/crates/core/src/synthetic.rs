//! Seeded generators approximating FCPS benchmark geometries.
//!
//! Generated coordinates go through the same normalization as loaded files,
//! and truth labels start at 1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, LabeledDataset};
use crate::error::{IcotError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticShape {
    /// Two tight Gaussian blobs centred at (0,0) and (1,1).
    GaussianBlobs,
    /// Four Gaussian blobs on the vertices of a tetrahedron (3 features).
    Tetra,
    /// Two uniform diamonds touching at one corner.
    TwoDiamonds,
    /// A central blob inside a ring, with four small outlier groups in the corners.
    TargetRings,
    /// Two offset rectangles whose density rises towards the gap between them.
    WingNut,
}

impl SyntheticShape {
    pub const ALL: [SyntheticShape; 5] = [
        SyntheticShape::GaussianBlobs,
        SyntheticShape::Tetra,
        SyntheticShape::TwoDiamonds,
        SyntheticShape::TargetRings,
        SyntheticShape::WingNut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticShape::GaussianBlobs => "gaussian_blobs",
            SyntheticShape::Tetra => "tetra",
            SyntheticShape::TwoDiamonds => "two_diamonds",
            SyntheticShape::TargetRings => "target_rings",
            SyntheticShape::WingNut => "wingnut",
        }
    }

    pub fn cluster_count(self) -> usize {
        match self {
            SyntheticShape::GaussianBlobs | SyntheticShape::TwoDiamonds | SyntheticShape::WingNut => 2,
            SyntheticShape::Tetra => 4,
            SyntheticShape::TargetRings => 6,
        }
    }
}

impl fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticShape {
    type Err = IcotError;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticShape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = SyntheticShape::ALL.iter().map(|s| s.name()).collect();
                IcotError::Usage(format!("unknown shape '{s}', expected one of {}", known.join(", ")))
            })
    }
}

/// Splits `n` into `k` near-equal group sizes, larger groups first.
fn even_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|c| n / k + usize::from(c < n % k)).collect()
}

pub fn generate_synthetic(shape: SyntheticShape, n: usize, seed: u64) -> Result<LabeledDataset> {
    let k = shape.cluster_count();
    if n < 4 * k {
        return Err(IcotError::validation(format!(
            "shape {shape} needs at least {} observations, got {n}",
            4 * k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);

    match shape {
        SyntheticShape::GaussianBlobs => {
            let noise = Normal::new(0.0, 0.02).unwrap();
            for (c, size) in even_sizes(n, 2).into_iter().enumerate() {
                let center = c as f64;
                for _ in 0..size {
                    rows.push(vec![center + noise.sample(&mut rng), center + noise.sample(&mut rng)]);
                    truth.push(c + 1);
                }
            }
        }
        SyntheticShape::Tetra => {
            let vertices = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
            let noise = Normal::new(0.0, 0.25).unwrap();
            for (c, size) in even_sizes(n, 4).into_iter().enumerate() {
                for _ in 0..size {
                    rows.push(vertices[c].iter().map(|v| v + noise.sample(&mut rng)).collect());
                    truth.push(c + 1);
                }
            }
        }
        SyntheticShape::TwoDiamonds => {
            for (c, size) in even_sizes(n, 2).into_iter().enumerate() {
                let cx = if c == 0 { -1.0 } else { 1.0 };
                for _ in 0..size {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    let v: f64 = rng.gen_range(-1.0..=1.0);
                    rows.push(vec![cx + (u + v) / 2.0, (u - v) / 2.0]);
                    truth.push(c + 1);
                }
            }
        }
        SyntheticShape::TargetRings => {
            let outlier_size = (n / 40).max(4);
            let core = (n - 4 * outlier_size) * 7 / 20;
            let ring = n - 4 * outlier_size - core;
            let center_noise = Normal::new(0.0, 0.2).unwrap();
            for _ in 0..core {
                rows.push(vec![center_noise.sample(&mut rng), center_noise.sample(&mut rng)]);
                truth.push(1);
            }
            for _ in 0..ring {
                let angle = rng.gen_range(0.0..2.0 * PI);
                let radius = rng.gen_range(1.6..2.0);
                rows.push(vec![radius * angle.cos(), radius * angle.sin()]);
                truth.push(2);
            }
            let corner_noise = Normal::new(0.0, 0.06).unwrap();
            let corners = [[-3.2, -3.2], [3.2, -3.2], [-3.2, 3.2], [3.2, 3.2]];
            for (c, corner) in corners.iter().enumerate() {
                for _ in 0..outlier_size {
                    rows.push(corner.iter().map(|v| v + corner_noise.sample(&mut rng)).collect());
                    truth.push(c + 3);
                }
            }
        }
        SyntheticShape::WingNut => {
            for (c, size) in even_sizes(n, 2).into_iter().enumerate() {
                for _ in 0..size {
                    // Linearly decreasing density away from the gap.
                    let depth = 1.9 * (1.0 - rng.gen::<f64>().sqrt());
                    let y: f64 = rng.gen_range(0.0..2.0);
                    let point = if c == 0 {
                        vec![-0.1 - depth, y]
                    } else {
                        vec![0.1 + depth, y - 0.6]
                    };
                    rows.push(point);
                    truth.push(c + 1);
                }
            }
        }
    }

    LabeledDataset::new(Dataset::from_rows(&rows)?, truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetra_has_four_equal_clusters_in_three_dims() {
        let labeled = generate_synthetic(SyntheticShape::Tetra, 400, 3).unwrap();
        assert_eq!(labeled.data.p(), 3);
        for c in 1..=4 {
            assert_eq!(labeled.truth.iter().filter(|&&t| t == c).count(), 100);
        }
    }

    #[test]
    fn every_shape_is_deterministic_and_normalized() {
        for shape in SyntheticShape::ALL {
            let a = generate_synthetic(shape, 120, 11).unwrap();
            let b = generate_synthetic(shape, 120, 11).unwrap();
            assert_eq!(a, b, "{shape}");
            assert_eq!(a.cluster_count(), shape.cluster_count(), "{shape}");
            assert!(a.data.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            let expected_p = if shape == SyntheticShape::Tetra { 3 } else { 2 };
            assert_eq!(a.data.p(), expected_p);
        }
    }

    #[test]
    fn too_few_points_and_unknown_names_are_rejected() {
        assert!(generate_synthetic(SyntheticShape::Tetra, 15, 0).is_err());
        assert!(matches!("atom".parse::<SyntheticShape>(), Err(IcotError::Usage(_))));
        assert_eq!("wingnut".parse::<SyntheticShape>().unwrap(), SyntheticShape::WingNut);
    }
}
