//! CSV and JSON output for experiments.
//!
//! Every decimal is written with 12 significant digits so repeated runs
//! produce identical bytes and re-parsed values stay within 1e-10 of the
//! in-memory ones for the magnitudes involved here.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::harness::{AgentSummary, ExperimentOutput, Summary};
use crate::planning::ObjectiveKind;

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "ACTINF_OUTPUT_DIR";

pub const TRIALS_FILE: &str = "trials.csv";
pub const BELIEFS_FILE: &str = "beliefs.csv";
pub const EFE_FILE: &str = "efe.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Formats with 12 significant digits, dropping trailing zeros.
///
/// ```
/// use actinf::report::fmt12;
/// assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
/// assert_eq!(fmt12(250.0), "250");
/// assert_eq!(fmt12(-0.0), "0");
/// ```
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round12(x);
    let mag = r.abs().log10().floor() as i32;
    if !(-6..=15).contains(&mag) {
        // Scientific form keeps tiny and huge values short.
        let s = format!("{r:.11e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    format!("{r}")
}

/// Picks the output directory: the environment variable wins, then the
/// config, then `fallback`.
pub fn resolve_output_dir(configured: Option<&Path>, fallback: &Path) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    configured.map(Path::to_path_buf).unwrap_or_else(|| fallback.to_path_buf())
}

/// `trial,agent,context,t,action,observation,score_so_far`.
///
/// One row per timestep. The row at `t = 0` has no action. `score_so_far` is
/// the agent's running total over trials; it includes the current trial's
/// score only on the trial's final row, where the score is realised.
pub fn trials_csv(output: &ExperimentOutput) -> String {
    let mut out = String::from("trial,agent,context,t,action,observation,score_so_far\n");
    let mut running: Option<(ObjectiveKind, f64)> = None;
    for r in &output.records {
        let before = match running {
            Some((agent, total)) if agent == r.agent => total,
            _ => 0.0,
        };
        let last = r.observations.len() - 1;
        for (t, &obs) in r.observations.iter().enumerate() {
            let action = if t == 0 { String::new() } else { r.actions[t - 1].to_string() };
            let so_far = if t == last { before + r.score } else { before };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.trial,
                r.agent.name(),
                r.context,
                t,
                action,
                obs,
                fmt12(so_far)
            );
        }
        running = Some((r.agent, before + r.score));
    }
    out
}

/// `trial,agent,decision_time,belief_time,state,probability`.
pub fn beliefs_csv(output: &ExperimentOutput) -> String {
    let mut out = String::from("trial,agent,decision_time,belief_time,state,probability\n");
    for trace in &output.traces {
        for (decision, beliefs) in trace.per_decision.iter().enumerate() {
            for (belief_time, dist) in beliefs.per_time.iter().enumerate() {
                for (state, &p) in dist.probs().iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        trace.trial,
                        trace.agent.name(),
                        decision,
                        belief_time,
                        state,
                        fmt12(p)
                    );
                }
            }
        }
    }
    out
}

/// `trial,t,policy_index,total,risk,ambiguity,extrinsic,intrinsic,residual`,
/// for the expected-free-energy agent only.
pub fn efe_csv(output: &ExperimentOutput) -> String {
    let mut out = String::from("trial,t,policy_index,total,risk,ambiguity,extrinsic,intrinsic,residual\n");
    for r in output.records.iter().filter(|r| r.agent == ObjectiveKind::ExpectedFreeEnergy) {
        for d in &r.decisions {
            for (i, b) in d.breakdowns.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.trial,
                    d.t,
                    i,
                    fmt12(b.total),
                    fmt12(b.risk),
                    fmt12(b.ambiguity),
                    fmt12(b.extrinsic),
                    fmt12(b.intrinsic),
                    fmt12(b.residual)
                );
            }
        }
    }
    out
}

/// The summary with every float rounded to 12 significant digits.
pub fn summary_json(summary: &Summary) -> String {
    let rounded = Summary {
        gamma: round12(summary.gamma),
        agents: summary
            .agents
            .iter()
            .map(|a| AgentSummary {
                total: round12(a.total),
                mean: round12(a.mean),
                std_error: round12(a.std_error),
                cumulative: a.cumulative.iter().map(|&c| round12(c)).collect(),
                ..a.clone()
            })
            .collect(),
        ..summary.clone()
    };
    let mut s = serde_json::to_string_pretty(&rounded).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes all four files into `dir`, creating it if needed.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let files = [
        (TRIALS_FILE, trials_csv(output)),
        (BELIEFS_FILE, beliefs_csv(output)),
        (EFE_FILE, efe_csv(output)),
        (SUMMARY_FILE, summary_json(&output.summary)),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
