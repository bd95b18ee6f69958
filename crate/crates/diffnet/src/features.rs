//! Kernel evaluation, the shared dictionary for kernel filters, and
//! explicit random feature maps (RVFL sigmoids, random Fourier features).

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{DiffnetError, Result};
use crate::rng::{self, purpose};

/// Gaussian kernel `κ(u1, u2) = exp(-γ‖u1-u2‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub gamma: f64,
}

impl GaussianKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 {
            Ok(GaussianKernel { gamma })
        } else {
            Err(DiffnetError::InvalidConfig(format!(
                "kernel gamma must be positive, got {gamma}"
            )))
        }
    }
}

pub fn kernel_eval(kern: &GaussianKernel, u1: &[f64], u2: &[f64]) -> Result<f64> {
    if u1.len() != u2.len() {
        return Err(DiffnetError::DimensionMismatch {
            expected: u1.len(),
            got: u2.len(),
        });
    }
    let sq: f64 = u1.iter().zip(u2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-kern.gamma * sq).exp())
}

/// Shared dictionary of input-space atoms parameterizing every agent's
/// kernel expansion. Atoms are fixed before any data arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub atoms: Vec<Vec<f64>>,
}

impl Dictionary {
    pub fn size(&self) -> usize {
        self.atoms.len()
    }

    pub fn input_dim(&self) -> usize {
        self.atoms[0].len()
    }
}

/// Atoms drawn i.i.d. from the input distribution `N(0, I_M)`.
pub fn build_dictionary(size: usize, input_dim: usize, seed: u64) -> Dictionary {
    assert!(size >= 1, "dictionary needs at least one atom");
    let mut rng = rng::shared_stream(seed, purpose::DICTIONARY);
    let atoms = (0..size)
        .map(|_| (0..input_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    Dictionary { atoms }
}

/// Kernel values between `u` and every dictionary atom.
pub fn kernel_vector(kern: &GaussianKernel, dict: &Dictionary, u: &[f64]) -> Result<Vec<f64>> {
    dict.atoms
        .iter()
        .map(|atom| kernel_eval(kern, u, atom))
        .collect()
}

/// Fixed random feature map: parameters are drawn once and shared by all
/// agents, then evaluation is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    /// Sigmoid basis `h_i(u) = σ(a_iᵀu + b_i)` with random a_i, b_i.
    RvflSigmoid {
        weights: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    /// `h_i(u) = √(2/B)·cos(a_iᵀu + b_i)` approximating a Gaussian kernel.
    RandomFourier {
        weights: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl FeatureMap {
    /// RVFL map with `a_i`, `b_i` uniform on [-1, 1].
    pub fn rvfl(output_dim: usize, input_dim: usize, seed: u64) -> Self {
        let mut rng = rng::shared_stream(seed, purpose::FEATURE_MAP);
        let range = Uniform::new_inclusive(-1.0, 1.0).unwrap();
        let weights = (0..output_dim)
            .map(|_| (0..input_dim).map(|_| range.sample(&mut rng)).collect())
            .collect();
        let offsets = (0..output_dim).map(|_| range.sample(&mut rng)).collect();
        FeatureMap::RvflSigmoid { weights, offsets }
    }

    /// Random Fourier map targeting the given Gaussian kernel:
    /// `a_i ~ N(0, 2γ·I)`, `b_i ~ Uniform[0, 2π)`.
    pub fn random_fourier(
        output_dim: usize,
        input_dim: usize,
        kern: &GaussianKernel,
        seed: u64,
    ) -> Self {
        let mut rng = rng::shared_stream(seed, purpose::FEATURE_MAP);
        let scale = (2.0 * kern.gamma).sqrt();
        let phase = Uniform::new(0.0, 2.0 * std::f64::consts::PI).unwrap();
        let weights = (0..output_dim)
            .map(|_| {
                (0..input_dim)
                    .map(|_| {
                        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    })
                    .collect()
            })
            .collect();
        let offsets = (0..output_dim).map(|_| phase.sample(&mut rng)).collect();
        FeatureMap::RandomFourier { weights, offsets }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::RvflSigmoid { offsets, .. } => offsets.len(),
            FeatureMap::RandomFourier { offsets, .. } => offsets.len(),
        }
    }

    pub fn evaluate(&self, u: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::RvflSigmoid { weights, offsets } => weights
                .iter()
                .zip(offsets)
                .map(|(a, b)| {
                    let s: f64 = a.iter().zip(u).map(|(ai, ui)| ai * ui).sum::<f64>() + b;
                    1.0 / (1.0 + (-s).exp())
                })
                .collect(),
            FeatureMap::RandomFourier { weights, offsets } => {
                let norm = (2.0 / offsets.len() as f64).sqrt();
                weights
                    .iter()
                    .zip(offsets)
                    .map(|(a, b)| {
                        let s: f64 = a.iter().zip(u).map(|(ai, ui)| ai * ui).sum::<f64>() + b;
                        norm * s.cos()
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kern() -> GaussianKernel {
        GaussianKernel::new(1.0 / 3.0).unwrap()
    }

    #[test]
    fn kernel_at_zero_distance_is_one() {
        let u = vec![0.4, -1.2, 3.0];
        assert_eq!(kernel_eval(&kern(), &u, &u).unwrap(), 1.0);
    }

    #[test]
    fn kernel_closed_form() {
        // squared distance 3, gamma 1/3 -> e^-1
        let v = kernel_eval(&kern(), &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_symmetric() {
        let u1 = vec![0.3, 2.0, -0.5];
        let u2 = vec![-1.0, 0.1, 0.9];
        assert_eq!(
            kernel_eval(&kern(), &u1, &u2).unwrap(),
            kernel_eval(&kern(), &u2, &u1).unwrap()
        );
    }

    #[test]
    fn kernel_rejects_dimension_mismatch() {
        assert!(kernel_eval(&kern(), &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dictionary_shape_and_determinism() {
        let d = build_dictionary(100, 3, 5);
        assert_eq!(d.size(), 100);
        assert!(d.atoms.iter().all(|a| a.len() == 3));
        assert_eq!(d, build_dictionary(100, 3, 5));
    }

    #[test]
    fn kernel_vector_peaks_at_matching_atom() {
        let d = build_dictionary(10, 3, 5);
        let k = kernel_vector(&kern(), &d, &d.atoms[4]).unwrap();
        assert_eq!(k[4], 1.0);
        assert!(k.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn single_atom_kernel_vector_closed_form() {
        let d = Dictionary {
            atoms: vec![vec![1.0, 1.0, 1.0]],
        };
        let k = kernel_vector(&kern(), &d, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_values_decrease_with_distance() {
        let d = Dictionary {
            atoms: (1..=5).map(|i| vec![i as f64, 0.0]).collect(),
        };
        let kern = GaussianKernel::new(0.5).unwrap();
        let k = kernel_vector(&kern, &d, &[0.0, 0.0]).unwrap();
        for w in k.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn kernel_matrix_is_positive_semidefinite() {
        // Smallest eigenvalue via inverse-power-free Gershgorin is too loose;
        // use a Cholesky-style LDL factorization as the PSD check.
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let n = points.len();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = kernel_eval(&kern(), &points[i], &points[j]).unwrap();
            }
        }
        // LDL^T: all pivots must be >= -1e-10.
        let mut a = g.clone();
        for p in 0..n {
            let pivot = a[p][p];
            assert!(pivot >= -1e-10, "pivot {pivot} at {p}");
            if pivot.abs() < 1e-12 {
                continue;
            }
            for i in (p + 1)..n {
                let f = a[i][p] / pivot;
                for j in p..n {
                    a[i][j] -= f * a[p][j];
                }
            }
        }
    }

    #[test]
    fn rvfl_sigmoid_at_zero_is_half() {
        let map = FeatureMap::RvflSigmoid {
            weights: vec![vec![0.0, 0.0]],
            offsets: vec![0.0],
        };
        assert_eq!(map.evaluate(&[3.0, -2.0]), vec![0.5]);
    }

    #[test]
    fn rvfl_outputs_bounded_and_monotone() {
        let map = FeatureMap::RvflSigmoid {
            weights: vec![vec![1.0]],
            offsets: vec![0.0],
        };
        let big = map.evaluate(&[10.0])[0];
        assert!(big > 0.999 && big < 1.0);
        let mut prev = 0.0;
        for i in -10..=10 {
            let v = map.evaluate(&[i as f64])[0];
            assert!(v > prev && v < 1.0);
            prev = v;
        }
    }

    #[test]
    fn rvfl_slope_at_zero_matches_quarter() {
        let map = FeatureMap::RvflSigmoid {
            weights: vec![vec![1.0]],
            offsets: vec![0.0],
        };
        let h = 1e-6;
        let slope = (map.evaluate(&[h])[0] - map.evaluate(&[-h])[0]) / (2.0 * h);
        assert!((slope - 0.25).abs() < 1e-6);
    }

    #[test]
    fn rff_single_feature_bounded_by_sqrt2() {
        let map = FeatureMap::random_fourier(1, 3, &kern(), 4);
        let v = map.evaluate(&[0.5, -2.0, 1.0]);
        assert!(v[0].abs() <= std::f64::consts::SQRT_2);
    }

    #[test]
    fn rff_self_inner_product_near_one() {
        let map = FeatureMap::random_fourier(2000, 3, &kern(), 4);
        let u = vec![0.2, -0.7, 1.1];
        let h = map.evaluate(&u);
        let ip: f64 = h.iter().map(|v| v * v).sum();
        assert!((ip - 1.0).abs() <= 0.15, "self inner product {ip}");
    }

    #[test]
    fn rff_approximates_kernel_and_improves_with_width() {
        let kern = kern();
        let big = FeatureMap::random_fourier(2000, 3, &kern, 4);
        let small = FeatureMap::random_fourier(50, 3, &kern, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut max_err_big: f64 = 0.0;
        let mut sum_big = 0.0;
        let mut sum_small = 0.0;
        let n_pairs = 100;
        for _ in 0..n_pairs {
            let u1: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u2: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let exact = kernel_eval(&kern, &u1, &u2).unwrap();
            let ip = |m: &FeatureMap| {
                let (h1, h2) = (m.evaluate(&u1), m.evaluate(&u2));
                h1.iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>()
            };
            let err_big = (ip(&big) - exact).abs();
            let err_small = (ip(&small) - exact).abs();
            max_err_big = max_err_big.max(err_big);
            sum_big += err_big;
            sum_small += err_small;
        }
        assert!(max_err_big <= 0.15, "max error {max_err_big}");
        assert!(sum_big / (n_pairs as f64) < sum_small / (n_pairs as f64));
    }
}
