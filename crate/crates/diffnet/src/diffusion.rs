//! Slot-synchronous simulation engine: per-slot measurement, adaptation and
//! combination under a cooperation protocol, plus the Monte Carlo driver.
//!
//! Every slot has two strictly separated phases — all intermediate estimates
//! are computed before any agent reads a neighbor's value — so results do not
//! depend on agent iteration order. Monte Carlo runs are independent and may
//! execute concurrently; aggregation order is fixed by run index.

use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{DiffnetError, Result};
use crate::features::{Dictionary, GaussianKernel};
use crate::filters::{
    multitask_penalty_gradient, Filter, KlmsFilter, LmsFilter, LogisticFilter, SafFilter,
};
use crate::metrics::classification_accuracy;
use crate::topology::{MixingMatrix, TaskWeights};

/// One agent's filter; all agents in a run hold the same variant.
#[derive(Clone)]
pub enum AgentFilter {
    Lms(LmsFilter),
    Logistic(LogisticFilter),
    Klms(KlmsFilter),
    Saf(SafFilter),
}

impl AgentFilter {
    pub fn predict(&self, u: &[f64]) -> f64 {
        match self {
            AgentFilter::Lms(f) => f.predict(u),
            AgentFilter::Logistic(f) => f.predict(u),
            AgentFilter::Klms(f) => f.predict(u),
            AgentFilter::Saf(f) => f.predict(u),
        }
    }

    /// Local adaptation step. `mu_q` only applies to the spline ordinates of
    /// a SAF agent and is ignored by the other filters.
    pub fn adapt(&mut self, sample: &Sample, mu: f64, mu_q: f64) {
        match self {
            AgentFilter::Lms(f) => f.adapt(sample, mu),
            AgentFilter::Logistic(f) => f.adapt(sample, mu),
            AgentFilter::Klms(f) => f.adapt(sample, mu),
            AgentFilter::Saf(f) => f.adapt(sample, mu, mu_q),
        }
    }

    /// Exchangeable parameter block. For SAF this is the linear weights
    /// followed by all control-point ordinates.
    pub fn params(&self) -> Vec<f64> {
        match self {
            AgentFilter::Lms(f) => f.params().to_vec(),
            AgentFilter::Logistic(f) => f.params().to_vec(),
            AgentFilter::Klms(f) => f.params().to_vec(),
            AgentFilter::Saf(f) => {
                let mut p = f.linear_weights().to_vec();
                p.extend_from_slice(&f.q);
                p
            }
        }
    }

    pub fn set_params(&mut self, params: &[f64]) {
        match self {
            AgentFilter::Lms(f) => f.set_params(params),
            AgentFilter::Logistic(f) => f.set_params(params),
            AgentFilter::Klms(f) => f.set_params(params),
            AgentFilter::Saf(f) => {
                let m = f.linear_weights().len();
                f.set_linear_weights(&params[..m]);
                f.q.copy_from_slice(&params[m..]);
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AgentFilter::Lms(_) => "lms",
            AgentFilter::Logistic(_) => "logistic",
            AgentFilter::Klms(_) => "klms",
            AgentFilter::Saf(_) => "saf",
        }
    }
}

/// Convenience constructors for a homogeneous agent population.
pub fn lms_agents(n: usize, input_dim: usize) -> Vec<AgentFilter> {
    (0..n)
        .map(|_| AgentFilter::Lms(LmsFilter::new(input_dim)))
        .collect()
}

pub fn logistic_agents(n: usize, input_dim: usize, lambda: f64) -> Vec<AgentFilter> {
    (0..n)
        .map(|_| AgentFilter::Logistic(LogisticFilter::new(input_dim, lambda, n)))
        .collect()
}

pub fn klms_agents(
    n: usize,
    dictionary: std::sync::Arc<Dictionary>,
    kernel: GaussianKernel,
) -> Vec<AgentFilter> {
    (0..n)
        .map(|_| AgentFilter::Klms(KlmsFilter::new(dictionary.clone(), kernel)))
        .collect()
}

pub fn saf_agents(n: usize, input_dim: usize) -> Vec<AgentFilter> {
    (0..n)
        .map(|_| AgentFilter::Saf(SafFilter::new(input_dim)))
        .collect()
}

/// Cooperation protocol applied every slot.
#[derive(Clone)]
pub enum Protocol {
    NonCooperative,
    Atc { mixing: MixingMatrix },
    CtaSaf { mixing: MixingMatrix },
    Multitask { task_weights: TaskWeights, eta: f64 },
}

fn check_homogeneous(agents: &[AgentFilter]) -> Result<()> {
    if let Some(first) = agents.first() {
        if agents.iter().any(|a| a.kind() != first.kind()) {
            return Err(DiffnetError::InvalidConfig(
                "heterogeneous filter types across agents are not supported".into(),
            ));
        }
    }
    Ok(())
}

/// Left-stochastic combination `Σ_l A_{lk}·x_l`, skipping structural zeros so
/// identity mixing reproduces each agent's own block exactly.
fn combine(mixing: &MixingMatrix, blocks: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; blocks[k].len()];
    for (l, block) in blocks.iter().enumerate() {
        let a = mixing.get(l, k);
        if a != 0.0 {
            for (o, x) in out.iter_mut().zip(block) {
                *o += a * x;
            }
        }
    }
    out
}

/// Adapt-then-combine: every agent takes a local step producing φ_k, then the
/// new parameters are the mixed φ's. Both phases are slot-synchronous.
pub fn run_slot_atc(
    agents: &mut [AgentFilter],
    mixing: &MixingMatrix,
    samples: &[Sample],
    step_sizes: &[f64],
) -> Result<()> {
    check_homogeneous(agents)?;
    for ((agent, sample), &mu) in agents.iter_mut().zip(samples).zip(step_sizes) {
        agent.adapt(sample, mu, mu);
    }
    let phis: Vec<Vec<f64>> = agents.iter().map(|a| a.params()).collect();
    for k in 0..agents.len() {
        agents[k].set_params(&combine(mixing, &phis, k));
    }
    Ok(())
}

/// Multitask slot: local adaptation plus the neighbor-similarity penalty,
/// both evaluated at the previous slot's parameters. No combination phase.
pub fn run_slot_multitask(
    agents: &mut [AgentFilter],
    task_weights: &TaskWeights,
    eta: f64,
    samples: &[Sample],
    step_sizes: &[f64],
) -> Result<()> {
    check_homogeneous(agents)?;
    let previous: Vec<Vec<f64>> = agents.iter().map(|a| a.params()).collect();
    let n = agents.len();
    for k in 0..n {
        let neighbors: Vec<(&[f64], f64, f64)> = (0..n)
            .filter(|&l| l != k && (task_weights.get(k, l) != 0.0 || task_weights.get(l, k) != 0.0))
            .map(|l| {
                (
                    previous[l].as_slice(),
                    task_weights.get(k, l),
                    task_weights.get(l, k),
                )
            })
            .collect();
        let penalty = multitask_penalty_gradient(&previous[k], &neighbors, eta)?;
        agents[k].adapt(&samples[k], step_sizes[k], step_sizes[k]);
        let mut params = agents[k].params();
        for (p, g) in params.iter_mut().zip(&penalty) {
            *p -= step_sizes[k] * g;
        }
        agents[k].set_params(&params);
    }
    Ok(())
}

/// Communication accounting for the span exchange of one CTA-SAF slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanExchangeStats {
    /// Span ordinates received: 4 per directed neighbor link.
    pub span_values: usize,
    /// Span index announcements: 1 per directed neighbor link.
    pub span_indices: usize,
}

/// Combine-then-adapt for spline filters. Per agent: combine neighbor linear
/// weights, locate the active span from the combined output, combine only the
/// four ordinates of neighbors at that same span index, then run both
/// gradient updates from the combined state.
pub fn run_slot_cta_saf(
    agents: &mut [AgentFilter],
    mixing: &MixingMatrix,
    samples: &[Sample],
    step_sizes_w: &[f64],
    step_sizes_q: &[f64],
) -> Result<SpanExchangeStats> {
    let safs: Vec<&SafFilter> = agents
        .iter()
        .map(|a| match a {
            AgentFilter::Saf(f) => Ok(f),
            _ => Err(DiffnetError::InvalidConfig(
                "CTA-SAF protocol requires SAF filters".into(),
            )),
        })
        .collect::<Result<_>>()?;
    let lattice = (safs[0].x_min, safs[0].delta_x, safs[0].q.len());
    if safs
        .iter()
        .any(|f| (f.x_min, f.delta_x, f.q.len()) != lattice)
    {
        return Err(DiffnetError::InvalidConfig(
            "CTA-SAF requires identical spline lattices across agents".into(),
        ));
    }

    let prev_w: Vec<Vec<f64>> = safs.iter().map(|f| f.linear_weights().to_vec()).collect();
    let prev_q: Vec<Vec<f64>> = safs.iter().map(|f| f.q.clone()).collect();
    let n = agents.len();
    let mut stats = SpanExchangeStats {
        span_values: 0,
        span_indices: 0,
    };

    // Phase 1: everything each agent needs is computed from the previous
    // slot's snapshots; no new state is visible until phase 2.
    let mut updates: Vec<(Vec<f64>, usize, [f64; 4])> = Vec::with_capacity(n);
    for k in 0..n {
        let psi = combine(mixing, &prev_w, k);
        let template = safs[k];
        let s = crate::filters::dot(&psi, &samples[k].u);
        if !s.is_finite() {
            return Err(DiffnetError::NonFinite {
                agent: k,
                slot: 0,
                context: "combined linear output".into(),
            });
        }
        let lookup = template.span(s);
        // Span exchange: each neighbor sends back its 4 ordinates at k's
        // announced index.
        let mut xi = [0.0; 4];
        for l in 0..n {
            let a = mixing.get(l, k);
            if a != 0.0 {
                if l != k {
                    stats.span_values += 4;
                    stats.span_indices += 1;
                }
                for (j, x) in xi.iter_mut().enumerate() {
                    *x += a * prev_q[l][lookup.index + j];
                }
            }
        }
        let mut scratch = template.clone();
        scratch.set_linear_weights(&psi);
        scratch.q[lookup.index..lookup.index + 4].copy_from_slice(&xi);
        scratch.adapt(&samples[k], step_sizes_w[k], step_sizes_q[k]);
        let new_w = scratch.linear_weights().to_vec();
        let new_span = [
            scratch.q[lookup.index],
            scratch.q[lookup.index + 1],
            scratch.q[lookup.index + 2],
            scratch.q[lookup.index + 3],
        ];
        updates.push((new_w, lookup.index, new_span));
    }

    // Phase 2: install the updates.
    for (k, (new_w, index, new_span)) in updates.into_iter().enumerate() {
        if let AgentFilter::Saf(f) = &mut agents[k] {
            f.set_linear_weights(&new_w);
            f.q[index..index + 4].copy_from_slice(&new_span);
        }
    }
    Ok(stats)
}

/// Run one slot under the configured protocol. Samples are one per agent.
pub fn run_slot(
    agents: &mut [AgentFilter],
    protocol: &Protocol,
    samples: &[Sample],
    step_sizes: &[f64],
    step_sizes_q: &[f64],
) -> Result<()> {
    match protocol {
        Protocol::NonCooperative => {
            check_homogeneous(agents)?;
            for ((agent, sample), (&mu, &mu_q)) in agents
                .iter_mut()
                .zip(samples)
                .zip(step_sizes.iter().zip(step_sizes_q))
            {
                agent.adapt(sample, mu, mu_q);
            }
            Ok(())
        }
        Protocol::Atc { mixing } => run_slot_atc(agents, mixing, samples, step_sizes),
        Protocol::CtaSaf { mixing } => {
            run_slot_cta_saf(agents, mixing, samples, step_sizes, step_sizes_q).map(|_| ())
        }
        Protocol::Multitask { task_weights, eta } => {
            run_slot_multitask(agents, task_weights, *eta, samples, step_sizes)
        }
    }
}

/// Per-agent, per-slot traces of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    /// Squared prior error, measured before adaptation and before the slot's
    /// combination, indexed `[agent][slot]`.
    pub prior_error: Vec<Vec<f64>>,
    /// 1/0 correctness of the thresholded prediction (classification runs).
    pub accuracy: Option<Vec<Vec<f64>>>,
    pub final_params: Vec<Vec<f64>>,
    pub run_index: usize,
}

/// Simulate one run of `slots` time slots. `sampler(agent, slot)` yields the
/// agent's observation for the slot.
pub fn simulate_run(
    mut agents: Vec<AgentFilter>,
    protocol: &Protocol,
    slots: usize,
    step_sizes: &[f64],
    step_sizes_q: &[f64],
    mut sampler: impl FnMut(usize, usize) -> Sample,
    record_accuracy: bool,
    run_index: usize,
) -> Result<RunResult> {
    let n = agents.len();
    let mut prior_error = vec![Vec::with_capacity(slots); n];
    let mut accuracy = if record_accuracy {
        Some(vec![Vec::with_capacity(slots); n])
    } else {
        None
    };

    for slot in 0..slots {
        let samples: Vec<Sample> = (0..n).map(|k| sampler(k, slot)).collect();
        for k in 0..n {
            let prediction = agents[k].predict(&samples[k].u);
            if !prediction.is_finite() {
                return Err(DiffnetError::NonFinite {
                    agent: k,
                    slot,
                    context: "prior prediction".into(),
                });
            }
            let err = samples[k].d - prediction;
            prior_error[k].push(err * err);
            if let Some(acc) = accuracy.as_mut() {
                acc[k].push(classification_accuracy(prediction, samples[k].d));
            }
        }
        run_slot(&mut agents, protocol, &samples, step_sizes, step_sizes_q)?;
    }

    Ok(RunResult {
        prior_error,
        accuracy,
        final_params: agents.iter().map(|a| a.params()).collect(),
        run_index,
    })
}

/// Cross-run aggregate: per-slot mean and standard deviation of the
/// agent-averaged squared prior error, plus accuracy when recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateTrace {
    pub mean_mse: Vec<f64>,
    pub std_mse: Vec<f64>,
    pub mean_accuracy: Option<Vec<f64>>,
    pub std_accuracy: Option<Vec<f64>>,
    pub runs: usize,
}

fn per_run_agent_mean(traces: &[Vec<f64>], slot: usize) -> f64 {
    traces.iter().map(|t| t[slot]).sum::<f64>() / traces.len() as f64
}

pub fn aggregate(results: &[RunResult]) -> AggregateTrace {
    let runs = results.len();
    let slots = results
        .first()
        .map(|r| r.prior_error[0].len())
        .unwrap_or(0);
    let mut mean_mse = Vec::with_capacity(slots);
    let mut std_mse = Vec::with_capacity(slots);
    for slot in 0..slots {
        let values: Vec<f64> = results
            .iter()
            .map(|r| per_run_agent_mean(&r.prior_error, slot))
            .collect();
        let mean = values.iter().sum::<f64>() / runs as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / runs as f64;
        mean_mse.push(mean);
        std_mse.push(var.sqrt());
    }
    let (mean_accuracy, std_accuracy) = if results.iter().all(|r| r.accuracy.is_some()) && runs > 0
    {
        let mut means = Vec::with_capacity(slots);
        let mut stds = Vec::with_capacity(slots);
        for slot in 0..slots {
            let values: Vec<f64> = results
                .iter()
                .map(|r| per_run_agent_mean(r.accuracy.as_ref().unwrap(), slot))
                .collect();
            let mean = values.iter().sum::<f64>() / runs as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / runs as f64;
            means.push(mean);
            stds.push(var.sqrt());
        }
        (Some(means), Some(stds))
    } else {
        (None, None)
    };
    AggregateTrace {
        mean_mse,
        std_mse,
        mean_accuracy,
        std_accuracy,
        runs,
    }
}

/// Execute `runs` independent Monte Carlo runs of `run_fn`, serially or on a
/// thread pool of the requested width. Output is identical either way: each
/// run derives its own RNG streams and results are ordered by run index.
pub fn monte_carlo<F>(runs: usize, threads: usize, run_fn: F) -> Result<Vec<RunResult>>
where
    F: Fn(usize) -> Result<RunResult> + Sync,
{
    #[cfg(feature = "parallel")]
    if threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| DiffnetError::InvalidConfig(format!("thread pool: {e}")))?;
        return pool.install(|| (0..runs).into_par_iter().map(&run_fn).collect());
    }
    let _ = threads;
    (0..runs).map(run_fn).collect()
}
