use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use diffnet::config::{preset, Algorithm, ExperimentConfig};
use diffnet::output::emit_experiment;

#[derive(Parser)]
#[command(name = "diffnet", version, about = "Diffusion adaptive filtering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or configured experiment and write trace CSVs,
    /// a summary JSON and a provenance file.
    Run(RunArgs),
    /// Print the resolved configuration of a preset as TOML.
    ShowPreset { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment preset: fig3, fig5, fig6 or fig7.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// TOML configuration file (flags below override its values).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Monte Carlo run count override.
    #[arg(long)]
    runs: Option<usize>,

    /// Time slot count override.
    #[arg(long)]
    slots: Option<usize>,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, env = "DIFFNET_OUT", default_value = "out")]
    out: PathBuf,

    /// Monte Carlo thread count; output is identical for any value.
    #[arg(long)]
    parallel_runs: Option<usize>,

    /// Comma-separated algorithm list, e.g. "d-lms,d-mt-klms".
    #[arg(long)]
    algorithms: Option<String>,

    /// Kernel dictionary size override.
    #[arg(long)]
    dictionary_size: Option<usize>,

    /// Multitask regularization factor override.
    #[arg(long)]
    eta: Option<f64>,

    /// Restore paper-scale run counts (fig5: 500, fig6: 100).
    #[arg(long)]
    paper_scale: bool,
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, diffnet::DiffnetError> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        (None, None) => preset("fig5")?,
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    if args.paper_scale {
        cfg.simulation.runs = match cfg.name.as_str() {
            "fig6" => 100,
            _ => 500,
        };
    }
    if let Some(runs) = args.runs {
        cfg.simulation.runs = runs;
    }
    if let Some(slots) = args.slots {
        cfg.simulation.slots = slots;
    }
    if let Some(seed) = args.seed {
        cfg.simulation.master_seed = seed;
    }
    if let Some(parallel) = args.parallel_runs {
        cfg.simulation.parallel_runs = parallel;
    }
    if let Some(list) = &args.algorithms {
        cfg.simulation.algorithms = list
            .split(',')
            .map(|s| Algorithm::from_str(s.trim()))
            .collect::<Result<_, _>>()?;
    }
    if let Some(size) = args.dictionary_size {
        cfg.kernel.dictionary_size = size;
        cfg.kernel.dictionary_sizes = None;
    }
    if let Some(eta) = args.eta {
        cfg.eta = eta;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), diffnet::DiffnetError> {
    let cfg = resolve_config(args)?;
    eprintln!(
        "running '{}': {} agents, {} slots, {} runs, seed {}",
        cfg.name,
        cfg.network.n_agents,
        cfg.simulation.slots,
        cfg.simulation.runs,
        cfg.simulation.master_seed
    );
    let result = diffnet::config::run_experiment(&cfg)?;
    for alg in &result.algorithms {
        match alg.steady_state_accuracy {
            Some(acc) => eprintln!(
                "  {:<24} steady-state accuracy {:.4}",
                alg.label, acc
            ),
            None => eprintln!(
                "  {:<24} steady-state MSE {:.2} dB",
                alg.label, alg.steady_state_mse_db
            ),
        }
    }
    let written = emit_experiment(&args.out, &result)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::ShowPreset { name } => preset(name).and_then(|cfg| {
            let text = toml::to_string_pretty(&cfg)
                .map_err(|e| diffnet::DiffnetError::InvalidConfig(e.to_string()))?;
            println!("{text}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
