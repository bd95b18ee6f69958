//! Per-agent adaptive filters behind one uniform interface: LMS, regularized
//! logistic regression, kernel LMS over a shared dictionary, and Catmull-Rom
//! spline adaptive filters, plus the multitask pairwise penalty gradient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{DiffnetError, Result};
use crate::features::{kernel_vector, Dictionary, GaussianKernel};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Uniform per-agent filter contract: side-effect-free prediction, a local
/// adaptation step, and a flat exchangeable parameter block.
pub trait Filter {
    fn predict(&self, u: &[f64]) -> f64;
    fn adapt(&mut self, sample: &Sample, mu: f64);
    fn params(&self) -> &[f64];
    fn set_params(&mut self, params: &[f64]);
}

/// Linear LMS filter, `f(u) = wᵀu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsFilter {
    w: Vec<f64>,
}

impl LmsFilter {
    pub fn new(input_dim: usize) -> Self {
        LmsFilter {
            w: vec![0.0; input_dim],
        }
    }
}

impl Filter for LmsFilter {
    fn predict(&self, u: &[f64]) -> f64 {
        dot(&self.w, u)
    }

    fn adapt(&mut self, sample: &Sample, mu: f64) {
        let err = sample.d - dot(&self.w, &sample.u);
        axpy(&mut self.w, mu * err, &sample.u);
    }

    fn params(&self) -> &[f64] {
        &self.w
    }

    fn set_params(&mut self, params: &[f64]) {
        self.w.copy_from_slice(params);
    }
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Logistic predictor `σ(wᵀu)` trained on the instantaneous regularized
/// cross-entropy; the λ/N scaling spreads the total penalty over the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFilter {
    w: Vec<f64>,
    pub lambda: f64,
    pub n_agents: usize,
}

impl LogisticFilter {
    pub fn new(input_dim: usize, lambda: f64, n_agents: usize) -> Self {
        assert!(lambda >= 0.0);
        LogisticFilter {
            w: vec![0.0; input_dim],
            lambda,
            n_agents,
        }
    }
}

impl Filter for LogisticFilter {
    fn predict(&self, u: &[f64]) -> f64 {
        sigmoid(dot(&self.w, u))
    }

    fn adapt(&mut self, sample: &Sample, mu: f64) {
        debug_assert!(
            sample.d == 0.0 || sample.d == 1.0,
            "logistic label must be 0 or 1"
        );
        let err = sample.d - sigmoid(dot(&self.w, &sample.u));
        let shrink = mu * self.lambda / self.n_agents as f64;
        for (wi, ui) in self.w.iter_mut().zip(&sample.u) {
            *wi += mu * err * ui - shrink * *wi;
        }
    }

    fn params(&self) -> &[f64] {
        &self.w
    }

    fn set_params(&mut self, params: &[f64]) {
        self.w.copy_from_slice(params);
    }
}

/// Kernel LMS restricted to a shared dictionary: each agent's function is
/// `βᵀ k(u)` with `k` the kernel values against the dictionary atoms.
#[derive(Debug, Clone)]
pub struct KlmsFilter {
    beta: Vec<f64>,
    dictionary: Arc<Dictionary>,
    kernel: GaussianKernel,
}

impl KlmsFilter {
    pub fn new(dictionary: Arc<Dictionary>, kernel: GaussianKernel) -> Self {
        KlmsFilter {
            beta: vec![0.0; dictionary.size()],
            dictionary,
            kernel,
        }
    }

    pub fn kernel_vector(&self, u: &[f64]) -> Vec<f64> {
        kernel_vector(&self.kernel, &self.dictionary, u)
            .expect("dictionary and input dimensions agree")
    }
}

impl Filter for KlmsFilter {
    fn predict(&self, u: &[f64]) -> f64 {
        dot(&self.beta, &self.kernel_vector(u))
    }

    fn adapt(&mut self, sample: &Sample, mu: f64) {
        let k = self.kernel_vector(&sample.u);
        let err = sample.d - dot(&self.beta, &k);
        axpy(&mut self.beta, mu * err, &k);
    }

    fn params(&self) -> &[f64] {
        &self.beta
    }

    fn set_params(&mut self, params: &[f64]) {
        self.beta.copy_from_slice(params);
    }
}

/// Catmull-Rom basis matrix, row-major.
pub const CR_MATRIX: [[f64; 4]; 4] = [
    [-0.5, 1.5, -1.5, 0.5],
    [1.0, -2.5, 2.0, -0.5],
    [-0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, 0.0, 0.0],
];

fn cr_apply(xi: &[f64; 4]) -> [f64; 4] {
    // B * xi
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(&CR_MATRIX) {
        *o = dot(row, xi);
    }
    out
}

fn cr_transpose_apply(u_pow: &[f64; 4]) -> [f64; 4] {
    // Bᵀ * u_pow
    let mut out = [0.0; 4];
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|i| CR_MATRIX[i][j] * u_pow[i]).sum();
    }
    out
}

/// Active span of a spline lookup: the four control points `index..index+4`,
/// the local coordinate `t ∈ [0, 1)` and its power vector `(t³, t², t, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanLookup {
    pub index: usize,
    pub t: f64,
    pub u_pow: [f64; 4],
}

/// Wiener-structured spline adaptive filter: a linear front end `s = wᵀu`
/// followed by cubic CR interpolation over `Q` uniformly spaced control
/// point ordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SafFilter {
    w: Vec<f64>,
    pub q: Vec<f64>,
    pub delta_x: f64,
    pub x_min: f64,
}

impl SafFilter {
    /// Default lattice: identity line over [-2, 2] with Δx = 0.2 (Q = 21).
    pub fn new(input_dim: usize) -> Self {
        SafFilter::with_lattice(input_dim, -2.0, 0.2, 21)
    }

    /// Identity-line initialization `q_j = x_min + j·Δx` over a custom lattice.
    pub fn with_lattice(input_dim: usize, x_min: f64, delta_x: f64, n_points: usize) -> Self {
        assert!(n_points >= 4, "spline needs at least 4 control points");
        assert!(delta_x > 0.0);
        let q = (0..n_points).map(|j| x_min + j as f64 * delta_x).collect();
        SafFilter {
            w: vec![0.0; input_dim],
            q,
            delta_x,
            x_min,
        }
    }

    pub fn linear_weights(&self) -> &[f64] {
        &self.w
    }

    pub fn set_linear_weights(&mut self, w: &[f64]) {
        self.w.copy_from_slice(w);
    }

    /// Locate the active span for linear output `s`, clamping at the lattice
    /// boundaries so out-of-range inputs stay bounded.
    pub fn span(&self, s: f64) -> SpanLookup {
        assert!(s.is_finite(), "non-finite spline input {s}");
        let scaled = s / self.delta_x;
        let floor = scaled.floor();
        let offset = (-self.x_min / self.delta_x).round() - 1.0;
        let raw = floor + offset;
        let max_index = (self.q.len() - 4) as f64;
        let (index, t) = if raw < 0.0 {
            (0, 0.0)
        } else if raw > max_index {
            (max_index as usize, 1.0 - 1e-9)
        } else {
            (raw as usize, scaled - floor)
        };
        SpanLookup {
            index,
            t,
            u_pow: [t * t * t, t * t, t, 1.0],
        }
    }

    fn active_span(&self, index: usize) -> [f64; 4] {
        [
            self.q[index],
            self.q[index + 1],
            self.q[index + 2],
            self.q[index + 3],
        ]
    }

    /// Spline value at linear output `s`: `uᵀBξ` over the active span.
    pub fn spline_output(&self, s: f64) -> f64 {
        let lookup = self.span(s);
        dot(&lookup.u_pow, &cr_apply(&self.active_span(lookup.index)))
    }

    /// Spline derivative `φ'(s) = (1/Δx)·(3t², 2t, 1, 0)ᵀBξ`.
    pub fn spline_derivative(&self, s: f64) -> f64 {
        let lookup = self.span(s);
        let du = [
            3.0 * lookup.t * lookup.t,
            2.0 * lookup.t,
            1.0,
            0.0,
        ];
        dot(&du, &cr_apply(&self.active_span(lookup.index))) / self.delta_x
    }

    pub fn predict(&self, u: &[f64]) -> f64 {
        self.spline_output(dot(&self.w, u))
    }

    /// Two parallel gradient steps: `w` by `μ_w·e·φ'(s)·u`, and only the
    /// four active ordinates by `μ_q·e·Bᵀu_pow`.
    pub fn adapt(&mut self, sample: &Sample, mu_w: f64, mu_q: f64) {
        let s = dot(&self.w, &sample.u);
        let lookup = self.span(s);
        let b_xi = cr_apply(&self.active_span(lookup.index));
        let y = dot(&lookup.u_pow, &b_xi);
        let err = sample.d - y;
        let du = [
            3.0 * lookup.t * lookup.t,
            2.0 * lookup.t,
            1.0,
            0.0,
        ];
        let slope = dot(&du, &b_xi) / self.delta_x;
        axpy(&mut self.w, mu_w * err * slope, &sample.u);
        let grad_q = cr_transpose_apply(&lookup.u_pow);
        for (j, g) in grad_q.iter().enumerate() {
            self.q[lookup.index + j] += mu_q * err * g;
        }
    }
}

/// Symmetrized multitask penalty gradient
/// `η·Σ_l (ρ_{kl}+ρ_{lk})/2 · (own − neighbor_l)`; applies identically to
/// w-space and β-space parameter blocks.
pub fn multitask_penalty_gradient(
    own: &[f64],
    neighbors: &[(&[f64], f64, f64)],
    eta: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; own.len()];
    for (params, rho_kl, rho_lk) in neighbors {
        if params.len() != own.len() {
            return Err(DiffnetError::DimensionMismatch {
                expected: own.len(),
                got: params.len(),
            });
        }
        let weight = eta * 0.5 * (rho_kl + rho_lk);
        for ((g, o), p) in grad.iter_mut().zip(own).zip(*params) {
            *g += weight * (o - p);
        }
    }
    Ok(grad)
}

/// Serializable parameter checkpoint for a single filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub filter_type: String,
    pub params: Vec<f64>,
    pub metadata: serde_json::Value,
}
