//! CSV trace and JSON summary/provenance emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{AlgorithmResult, ExperimentResult};
use crate::error::Result;

/// Aggregate trace CSV: `slot,mean_mse,std_mse[,mean_accuracy]`.
pub fn trace_csv(result: &AlgorithmResult) -> String {
    let with_accuracy = result.trace.mean_accuracy.is_some();
    let mut out = String::from(if with_accuracy {
        "slot,mean_mse,std_mse,mean_accuracy\n"
    } else {
        "slot,mean_mse,std_mse\n"
    });
    for slot in 0..result.trace.mean_mse.len() {
        let _ = write!(
            out,
            "{},{},{}",
            slot, result.trace.mean_mse[slot], result.trace.std_mse[slot]
        );
        if let Some(acc) = &result.trace.mean_accuracy {
            let _ = write!(out, ",{}", acc[slot]);
        }
        out.push('\n');
    }
    out
}

/// Per-agent trace CSV: `slot,agent,mse`.
pub fn per_agent_csv(agents: &[usize], per_agent_mse: &[Vec<f64>]) -> String {
    let mut out = String::from("slot,agent,mse\n");
    for (trace, &agent) in per_agent_mse.iter().zip(agents) {
        for (slot, mse) in trace.iter().enumerate() {
            let _ = writeln!(out, "{slot},{agent},{mse}");
        }
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Write all artifacts of an experiment into `out_dir`:
/// one trace CSV per algorithm, optional per-agent CSVs, a summary JSON and
/// a provenance JSON sufficient to reproduce the output exactly.
pub fn emit_experiment(out_dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for alg in &result.algorithms {
        let path = out_dir.join(format!("{}_{}.csv", result.config.name, alg.label));
        fs::write(&path, trace_csv(alg))?;
        written.push(path);
        if let Some(per_agent) = &alg.per_agent_mse {
            let path = out_dir.join(format!(
                "{}_{}_agents.csv",
                result.config.name, alg.label
            ));
            fs::write(
                &path,
                per_agent_csv(&result.config.simulation.per_agent_traces, per_agent),
            )?;
            written.push(path);
        }
    }

    let summaries: Vec<_> = result
        .algorithms
        .iter()
        .map(|alg| {
            json!({
                "algorithm": alg.label,
                "steady_state_mse_db": alg.steady_state_mse_db,
                "steady_state_std": alg.steady_state_mse_std,
                "steady_state_accuracy": alg.steady_state_accuracy,
                "slots": result.config.simulation.slots,
                "runs": result.config.simulation.runs,
                "seed": result.config.simulation.master_seed,
            })
        })
        .collect();
    let summary_path = out_dir.join(format!("{}_summary.json", result.config.name));
    fs::write(&summary_path, serde_json::to_string_pretty(&summaries)?)?;
    written.push(summary_path);

    let config_json = serde_json::to_string_pretty(&result.config)?;
    let provenance = json!({
        "config": result.config,
        "config_hash": format!("{:016x}", fnv1a(config_json.as_bytes())),
        "master_seed": result.config.simulation.master_seed,
        "network_edge_list": result.network_edge_list,
    });
    let provenance_path = out_dir.join(format!("{}_provenance.json", result.config.name));
    fs::write(&provenance_path, serde_json::to_string_pretty(&provenance)?)?;
    written.push(provenance_path);

    Ok(written)
}
