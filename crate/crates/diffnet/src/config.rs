//! Experiment configuration, presets and the experiment runner.
//!
//! A configuration fixes the "assignments" shared by every Monte Carlo run:
//! network, model coefficients, noise variances, step sizes and dictionary.
//! Only input and noise sample draws vary per run.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::{
    self, draw_multitask_model, draw_step_sizes, load_csv_stream, next_classification_sample,
    next_sample, ClassificationStream, Sample,
};
use crate::diffusion::{
    aggregate, klms_agents, lms_agents, logistic_agents, monte_carlo, simulate_run, AgentFilter,
    AggregateTrace, Protocol, RunResult,
};
use crate::error::{DiffnetError, Result};
use crate::features::{build_dictionary, GaussianKernel};
use crate::metrics::{default_window, mse_db, steady_state};
use crate::rng::{self, purpose};
use crate::topology::{identity_mixing, max_degree_weights, uniform_task_weights, Network};

/// Algorithms runnable by the experiment driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    DLms,
    DMtLms,
    DKlms,
    DMtKlms,
    LogisticAtc,
    LogisticNoncoop,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::DLms => "d-lms",
            Algorithm::DMtLms => "d-mt-lms",
            Algorithm::DKlms => "d-klms",
            Algorithm::DMtKlms => "d-mt-klms",
            Algorithm::LogisticAtc => "logistic-atc",
            Algorithm::LogisticNoncoop => "logistic-noncoop",
        }
    }

    fn uses_dictionary(&self) -> bool {
        matches!(self, Algorithm::DKlms | Algorithm::DMtKlms)
    }

    fn is_classification(&self) -> bool {
        matches!(self, Algorithm::LogisticAtc | Algorithm::LogisticNoncoop)
    }
}

impl FromStr for Algorithm {
    type Err = DiffnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d-lms" => Ok(Algorithm::DLms),
            "d-mt-lms" => Ok(Algorithm::DMtLms),
            "d-klms" => Ok(Algorithm::DKlms),
            "d-mt-klms" => Ok(Algorithm::DMtKlms),
            "logistic-atc" => Ok(Algorithm::LogisticAtc),
            "logistic-noncoop" => Ok(Algorithm::LogisticNoncoop),
            other => Err(DiffnetError::InvalidConfig(format!(
                "unknown algorithm '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_agents: usize,
    /// Explicit edge list; when present it overrides random generation.
    #[serde(default)]
    pub edges: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_edge_probability")]
    pub edge_probability: f64,
}

fn default_edge_probability() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    MultitaskNonlinear,
    Classification,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamConfig {
    pub kind: StreamKind,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "default_flip_probability")]
    pub flip_probability: f64,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub label_column: Option<String>,
}

fn default_input_dim() -> usize {
    3
}

fn default_flip_probability() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub slots: usize,
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_parallel_runs")]
    pub parallel_runs: usize,
    /// Agents whose run-averaged individual traces are also emitted.
    #[serde(default)]
    pub per_agent_traces: Vec<usize>,
}

// Default benchmark realization. The fixed assignments (model coefficients,
// noise variances, step sizes, network) are one draw per seed; this one is
// well conditioned — no agent receives a near-zero step size, so learning
// curves separate cleanly.
fn default_seed() -> u64 {
    3
}

fn default_parallel_runs() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    pub gamma: f64,
    #[serde(default = "default_dictionary_size")]
    pub dictionary_size: usize,
    /// Sweep over dictionary sizes; overrides `dictionary_size` when set.
    #[serde(default)]
    pub dictionary_sizes: Option<Vec<usize>>,
}

fn default_dictionary_size() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepConfig {
    /// Upper bound of the per-agent uniform step-size draw.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    /// Fixed network-wide step size; overrides the draw when set.
    #[serde(default)]
    pub fixed_step: Option<f64>,
}

fn default_max_step() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub network: NetworkConfig,
    pub stream: StreamConfig,
    pub simulation: SimulationConfig,
    pub kernel: KernelConfig,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub steps: Option<StepConfig>,
}

fn default_eta() -> f64 {
    0.01
}

fn default_lambda() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| DiffnetError::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn steps(&self) -> StepConfig {
        self.steps.clone().unwrap_or(StepConfig {
            max_step: default_max_step(),
            fixed_step: None,
        })
    }

    pub fn dictionary_sizes(&self) -> Vec<usize> {
        self.kernel
            .dictionary_sizes
            .clone()
            .unwrap_or_else(|| vec![self.kernel.dictionary_size])
    }

    pub fn validate(&self) -> Result<()> {
        if self.network.n_agents == 0 {
            return Err(DiffnetError::InvalidConfig(
                "network.n_agents must be at least 1".into(),
            ));
        }
        if self.simulation.runs == 0 {
            return Err(DiffnetError::InvalidConfig(
                "simulation.runs must be at least 1".into(),
            ));
        }
        if self.simulation.slots == 0 {
            return Err(DiffnetError::InvalidConfig(
                "simulation.slots must be at least 1".into(),
            ));
        }
        if self.simulation.algorithms.is_empty() {
            return Err(DiffnetError::InvalidConfig(
                "simulation.algorithms must not be empty".into(),
            ));
        }
        if self.simulation.parallel_runs == 0 {
            return Err(DiffnetError::InvalidConfig(
                "simulation.parallel_runs must be at least 1".into(),
            ));
        }
        if self.kernel.gamma <= 0.0 {
            return Err(DiffnetError::InvalidConfig(
                "kernel.gamma must be positive".into(),
            ));
        }
        if self.dictionary_sizes().iter().any(|&s| s == 0) {
            return Err(DiffnetError::InvalidConfig(
                "dictionary sizes must be at least 1".into(),
            ));
        }
        if self.eta < 0.0 {
            return Err(DiffnetError::InvalidConfig("eta must be >= 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(DiffnetError::InvalidConfig("lambda must be >= 0".into()));
        }
        let steps = self.steps();
        if steps.max_step <= 0.0 {
            return Err(DiffnetError::InvalidConfig(
                "steps.max_step must be positive".into(),
            ));
        }
        if let Some(mu) = steps.fixed_step {
            if mu <= 0.0 {
                return Err(DiffnetError::InvalidConfig(
                    "steps.fixed_step must be positive".into(),
                ));
            }
        }
        if !(0.0..0.5).contains(&self.stream.flip_probability) {
            return Err(DiffnetError::InvalidConfig(
                "stream.flip_probability must be in [0, 0.5)".into(),
            ));
        }
        for &agent in &self.simulation.per_agent_traces {
            if agent >= self.network.n_agents {
                return Err(DiffnetError::InvalidConfig(format!(
                    "per_agent_traces references agent {agent}, only {} agents",
                    self.network.n_agents
                )));
            }
        }
        let classification = self
            .simulation
            .algorithms
            .iter()
            .any(|a| a.is_classification());
        let regression = self
            .simulation
            .algorithms
            .iter()
            .any(|a| !a.is_classification());
        if classification && regression {
            return Err(DiffnetError::InvalidConfig(
                "cannot mix classification and regression algorithms in one experiment".into(),
            ));
        }
        if classification && self.stream.kind == StreamKind::MultitaskNonlinear {
            return Err(DiffnetError::InvalidConfig(
                "classification algorithms need a classification or csv stream".into(),
            ));
        }
        if self.stream.kind == StreamKind::Csv
            && (self.stream.csv_path.is_none() || self.stream.label_column.is_none())
        {
            return Err(DiffnetError::InvalidConfig(
                "csv stream requires stream.csv_path and stream.label_column".into(),
            ));
        }
        Ok(())
    }
}

/// Named presets reproducing the experiments at desk scale.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig5" => ExperimentConfig {
            name: "fig5".into(),
            network: NetworkConfig {
                n_agents: 9,
                edges: None,
                edge_probability: 0.2,
            },
            stream: StreamConfig {
                kind: StreamKind::MultitaskNonlinear,
                input_dim: 3,
                flip_probability: 0.0,
                csv_path: None,
                label_column: None,
            },
            simulation: SimulationConfig {
                slots: 1000,
                runs: 50,
                master_seed: default_seed(),
                algorithms: vec![
                    Algorithm::DLms,
                    Algorithm::DMtLms,
                    Algorithm::DKlms,
                    Algorithm::DMtKlms,
                ],
                parallel_runs: 1,
                per_agent_traces: vec![],
            },
            kernel: KernelConfig {
                gamma: 1.0 / 3.0,
                dictionary_size: 100,
                dictionary_sizes: None,
            },
            eta: 0.01,
            lambda: default_lambda(),
            steps: Some(StepConfig {
                max_step: 0.1,
                fixed_step: None,
            }),
        },
        "fig6" => {
            let mut cfg = preset("fig5")?;
            cfg.name = "fig6".into();
            cfg.simulation.runs = 25;
            cfg.simulation.per_agent_traces = vec![0, 4, 8];
            cfg
        }
        "fig7" => {
            let mut cfg = preset("fig5")?;
            cfg.name = "fig7".into();
            cfg.simulation.runs = 25;
            cfg.simulation.algorithms = vec![Algorithm::DMtKlms];
            cfg.kernel.dictionary_sizes = Some(vec![10, 50, 100]);
            cfg
        }
        "fig3" => ExperimentConfig {
            name: "fig3".into(),
            network: NetworkConfig {
                n_agents: 20,
                edges: None,
                edge_probability: 0.2,
            },
            stream: StreamConfig {
                kind: StreamKind::Classification,
                input_dim: 10,
                flip_probability: 0.1,
                csv_path: None,
                label_column: None,
            },
            simulation: SimulationConfig {
                slots: 500,
                runs: 25,
                master_seed: default_seed(),
                algorithms: vec![Algorithm::LogisticAtc, Algorithm::LogisticNoncoop],
                parallel_runs: 1,
                per_agent_traces: vec![],
            },
            kernel: KernelConfig {
                gamma: 0.1,
                dictionary_size: 100,
                dictionary_sizes: None,
            },
            eta: 0.01,
            lambda: 0.01,
            steps: Some(StepConfig {
                max_step: 0.1,
                fixed_step: Some(0.05),
            }),
        },
        other => {
            return Err(DiffnetError::InvalidConfig(format!(
                "unknown preset '{other}' (known: fig3, fig5, fig6, fig7)"
            )))
        }
    };
    Ok(cfg)
}

/// Result of one algorithm (at one dictionary size) within an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub label: String,
    pub trace: AggregateTrace,
    /// Run-averaged squared prior error for the requested agents,
    /// `[requested agent order][slot]`.
    pub per_agent_mse: Option<Vec<Vec<f64>>>,
    pub steady_state_mse_db: f64,
    pub steady_state_mse_std: f64,
    pub steady_state_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub network_edge_list: String,
    pub algorithms: Vec<AlgorithmResult>,
}

fn build_network(cfg: &ExperimentConfig) -> Result<Network> {
    match &cfg.network.edges {
        Some(edges) => Network::new(cfg.network.n_agents, edges.iter().copied()),
        None => Network::generate_random_connected(
            cfg.network.n_agents,
            cfg.network.edge_probability,
            cfg.simulation.master_seed,
        ),
    }
}

enum StreamSource {
    Multitask(datagen::MultitaskNonlinearModel),
    Classification(ClassificationStream),
    Csv(Arc<datagen::CsvDataset>),
}

impl StreamSource {
    /// Per-run sampler drawing from the per-(run, agent) streams.
    fn sampler(
        &self,
        master_seed: u64,
        run: usize,
        n_agents: usize,
    ) -> Box<dyn FnMut(usize, usize) -> Sample + Send + '_> {
        match self {
            StreamSource::Multitask(model) => {
                let mut inputs: Vec<_> = (0..n_agents)
                    .map(|k| rng::stream(master_seed, run as u64, k as u64, purpose::INPUT))
                    .collect();
                let mut noises: Vec<_> = (0..n_agents)
                    .map(|k| rng::stream(master_seed, run as u64, k as u64, purpose::NOISE))
                    .collect();
                Box::new(move |agent, _slot| {
                    next_sample(model, agent, &mut inputs[agent], &mut noises[agent])
                })
            }
            StreamSource::Classification(stream) => {
                let mut rngs: Vec<_> = (0..n_agents)
                    .map(|k| rng::stream(master_seed, run as u64, k as u64, purpose::INPUT))
                    .collect();
                Box::new(move |agent, _slot| next_classification_sample(stream, &mut rngs[agent]))
            }
            StreamSource::Csv(dataset) => {
                let dataset = dataset.clone();
                let mut rngs: Vec<_> = (0..n_agents)
                    .map(|k| rng::stream(master_seed, run as u64, k as u64, purpose::CSV_REPLAY))
                    .collect();
                Box::new(move |agent, _slot| dataset.sample(&mut rngs[agent]))
            }
        }
    }
}

fn build_stream(cfg: &ExperimentConfig) -> Result<StreamSource> {
    match cfg.stream.kind {
        StreamKind::MultitaskNonlinear => Ok(StreamSource::Multitask(draw_multitask_model(
            cfg.network.n_agents,
            cfg.simulation.master_seed,
        ))),
        StreamKind::Classification => Ok(StreamSource::Classification(ClassificationStream::draw(
            cfg.stream.input_dim,
            cfg.stream.flip_probability,
            cfg.simulation.master_seed,
        ))),
        StreamKind::Csv => {
            let path = cfg.stream.csv_path.as_ref().expect("validated");
            let label = cfg.stream.label_column.as_ref().expect("validated");
            Ok(StreamSource::Csv(Arc::new(load_csv_stream(path, label)?)))
        }
    }
}

fn stream_input_dim(cfg: &ExperimentConfig, source: &StreamSource) -> usize {
    match source {
        StreamSource::Multitask(m) => m.input_dim,
        StreamSource::Classification(s) => s.input_dim,
        StreamSource::Csv(d) => {
            let _ = cfg;
            d.input_dim
        }
    }
}

/// Run every configured algorithm (crossed with the dictionary sweep when one
/// is set) on the shared fixed assignments.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seed = cfg.simulation.master_seed;
    let net = build_network(cfg)?;
    let n = net.n_agents();
    let mixing = max_degree_weights(&net);
    let task_weights = uniform_task_weights(&net);
    let source = build_stream(cfg)?;
    let input_dim = stream_input_dim(cfg, &source);
    let steps = cfg.steps();
    let step_sizes = match steps.fixed_step {
        Some(mu) => vec![mu; n],
        None => draw_step_sizes(n, steps.max_step, seed),
    };

    let mut algorithms = Vec::new();
    let dict_sizes = cfg.dictionary_sizes();
    let sweep = dict_sizes.len() > 1;
    for algorithm in &cfg.simulation.algorithms {
        let sizes: &[usize] = if algorithm.uses_dictionary() {
            &dict_sizes
        } else {
            &dict_sizes[..1]
        };
        for &dict_size in sizes {
            let label = if sweep && algorithm.uses_dictionary() {
                format!("{}-dict{}", algorithm.label(), dict_size)
            } else {
                algorithm.label().to_string()
            };
            let dictionary = if algorithm.uses_dictionary() {
                Some(Arc::new(build_dictionary(dict_size, input_dim, seed)))
            } else {
                None
            };
            let kernel = GaussianKernel::new(cfg.kernel.gamma)?;
            let make_agents = || -> Vec<AgentFilter> {
                match algorithm {
                    Algorithm::DLms | Algorithm::DMtLms => lms_agents(n, input_dim),
                    Algorithm::DKlms | Algorithm::DMtKlms => {
                        klms_agents(n, dictionary.clone().expect("dictionary set"), kernel)
                    }
                    Algorithm::LogisticAtc | Algorithm::LogisticNoncoop => {
                        logistic_agents(n, input_dim, cfg.lambda)
                    }
                }
            };
            let protocol = match algorithm {
                Algorithm::DLms | Algorithm::DKlms | Algorithm::LogisticAtc => Protocol::Atc {
                    mixing: mixing.clone(),
                },
                Algorithm::DMtLms | Algorithm::DMtKlms => Protocol::Multitask {
                    task_weights: task_weights.clone(),
                    eta: cfg.eta,
                },
                Algorithm::LogisticNoncoop => Protocol::Atc {
                    mixing: identity_mixing(n),
                },
            };
            let record_accuracy = algorithm.is_classification();
            let slots = cfg.simulation.slots;
            let step_sizes = step_sizes.clone();
            let source = &source;
            let results: Vec<RunResult> =
                monte_carlo(cfg.simulation.runs, cfg.simulation.parallel_runs, |run| {
                    let sampler = source.sampler(seed, run, n);
                    simulate_run(
                        make_agents(),
                        &protocol,
                        slots,
                        &step_sizes,
                        &step_sizes,
                        sampler,
                        record_accuracy,
                        run,
                    )
                })?;
            let trace = aggregate(&results);
            let window = default_window(slots);
            let (ss_mean, ss_std) = steady_state(&trace.mean_mse, window)?;
            let steady_state_accuracy = trace
                .mean_accuracy
                .as_ref()
                .map(|acc| steady_state(acc, window).map(|(m, _)| m))
                .transpose()?;
            let per_agent_mse = if cfg.simulation.per_agent_traces.is_empty() {
                None
            } else {
                Some(
                    cfg.simulation
                        .per_agent_traces
                        .iter()
                        .map(|&agent| {
                            (0..slots)
                                .map(|slot| {
                                    results
                                        .iter()
                                        .map(|r| r.prior_error[agent][slot])
                                        .sum::<f64>()
                                        / results.len() as f64
                                })
                                .collect()
                        })
                        .collect(),
                )
            };
            algorithms.push(AlgorithmResult {
                label,
                trace,
                per_agent_mse,
                steady_state_mse_db: mse_db(ss_mean),
                steady_state_mse_std: ss_std,
                steady_state_accuracy,
            });
        }
    }

    Ok(ExperimentResult {
        config: cfg.clone(),
        network_edge_list: net.to_edge_list(),
        algorithms,
    })
}

/// Draw a standard-normal vector from a shared stream; exposed for tests
/// that need inputs matching the experiment distribution.
pub fn standard_normal_vec(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}
