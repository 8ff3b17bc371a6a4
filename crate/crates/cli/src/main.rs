use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actinf::files;
use actinf::harness::Experiment;
use actinf::report::{fmt12, resolve_output_dir, write_outputs};
use actinf::{GenerativeModel, History, ObjectiveKind, Planner};
use clap::{Parser, Subcommand};

/// Active inference planning and T-Maze experiments.
#[derive(Parser, Debug)]
#[command(name = "actinf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file and report every violation.
    Validate { model: PathBuf },
    /// Print the expected free energy of every remaining policy.
    Plan {
        model: PathBuf,
        /// Observed indices o_0,o_1,.. (defaults to the most likely first observation).
        #[arg(long, value_delimiter = ',')]
        observations: Vec<usize>,
        /// Executed action indices a_1,.. (one fewer than observations).
        #[arg(long, value_delimiter = ',')]
        actions: Vec<usize>,
        /// Policy precision.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Run an experiment config and write its CSV and JSON outputs.
    Run {
        config: PathBuf,
        /// Output directory (the ACTINF_OUTPUT_DIR variable takes precedence).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay one trial of a config and print its belief trace.
    Trace {
        config: PathBuf,
        trial: usize,
        /// Only this agent (e.g. expected_free_energy).
        #[arg(long)]
        agent: Option<String>,
    },
}

/// Exit status 1: the input was understood but is invalid or the run failed.
const DOMAIN_FAILURE: u8 = 1;
/// Exit status 2: the input could not be read or parsed, or the config is unusable.
const INPUT_FAILURE: u8 = 2;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(message: impl ToString) -> Self {
        Self {
            code: DOMAIN_FAILURE,
            message: message.to_string(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Self {
            code: INPUT_FAILURE,
            message: message.to_string(),
        }
    }
}

fn load_model(path: &Path) -> Result<GenerativeModel, Failure> {
    let desc = files::load_model(path).map_err(Failure::input)?;
    GenerativeModel::from_description(desc).map_err(Failure::domain)
}

fn load_experiment(path: &Path) -> Result<Experiment, Failure> {
    let config = files::load_config(path).map_err(Failure::input)?;
    Experiment::new(config).map_err(Failure::input)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let desc = files::load_model(path).map_err(Failure::input)?;
    match actinf::validate_model(&desc) {
        Ok(()) => {
            println!(
                "ok: {} states, {} observations, {} actions, horizon {}",
                desc.n_states, desc.n_obs, desc.n_actions, desc.horizon
            );
            Ok(())
        }
        Err(report) => Err(Failure::domain(format!("invalid model\n{report}"))),
    }
}

fn plan(path: &Path, observations: Vec<usize>, actions: Vec<usize>, gamma: f64) -> Result<(), Failure> {
    let model = load_model(path)?;
    let observations = if observations.is_empty() {
        let first = actinf::inference::predict_observation(&model, model.initial_belief());
        vec![first.argmax(0.0)]
    } else {
        observations
    };
    let history = History::new(observations, actions).map_err(Failure::domain)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Failure::input(format!("gamma must be non-negative, got {gamma}")));
    }
    let plan = Planner::new(ObjectiveKind::ExpectedFreeEnergy, gamma)
        .plan(&model, &history)
        .map_err(Failure::domain)?;

    let mut order: Vec<usize> = (0..plan.evaluations.len()).collect();
    order.sort_by(|&i, &j| {
        plan.evaluations[i]
            .breakdown
            .total
            .total_cmp(&plan.evaluations[j].breakdown.total)
    });
    println!("policy\ttotal\trisk\tambiguity\textrinsic\tintrinsic\tresidual\tposterior");
    for i in order {
        let e = &plan.evaluations[i];
        let b = e.breakdown;
        let policy: Vec<String> = e.policy.actions.iter().map(|&a| model.action_label(a)).collect();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            policy.join(","),
            fmt12(b.total),
            fmt12(b.risk),
            fmt12(b.ambiguity),
            fmt12(b.extrinsic),
            fmt12(b.intrinsic),
            fmt12(b.residual),
            fmt12(plan.posterior.probs.get(i))
        );
    }
    Ok(())
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let experiment = load_experiment(path)?;
    let configured = out.or_else(|| experiment.config.output_dir.clone());
    let dir = resolve_output_dir(configured.as_deref(), Path::new("out"));
    let output = experiment.run().map_err(Failure::domain)?;
    let files = write_outputs(&output, &dir).map_err(Failure::domain)?;
    for agent in &output.summary.agents {
        println!(
            "{}: total {} mean {} ± {} over {} trials",
            agent.agent,
            fmt12(agent.total),
            fmt12(agent.mean),
            fmt12(agent.std_error),
            agent.n_trials
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn trace(path: &Path, trial: usize, agent: Option<String>) -> Result<(), Failure> {
    let experiment = load_experiment(path)?;
    if trial >= experiment.config.n_trials {
        return Err(Failure::input(format!(
            "trial {trial} out of range for {} trials",
            experiment.config.n_trials
        )));
    }
    let agents: Vec<_> = experiment
        .config
        .agents
        .iter()
        .filter(|a| agent.as_deref().is_none_or(|name| a.kind.name() == name))
        .cloned()
        .collect();
    if agents.is_empty() {
        return Err(Failure::input(format!("no agent named {}", agent.unwrap_or_default())));
    }
    let model = experiment.model();
    for config in agents {
        let (record, trace) = experiment.run_one(&config, trial).map_err(Failure::domain)?;
        let obs: Vec<String> = record.observations.iter().map(|&o| model.obs_label(o)).collect();
        let acts: Vec<String> = record.actions.iter().map(|&a| model.action_label(a)).collect();
        println!("agent {} trial {} context {}", record.agent, record.trial, record.context);
        println!("observations {}", obs.join(" "));
        println!("actions {}", acts.join(" "));
        println!("score {}", fmt12(record.score));
        for (t, beliefs) in trace.per_decision.iter().enumerate() {
            println!("beliefs held at t={t} (columns are timesteps 0..={})", beliefs.len() - 1);
            for s in 0..model.n_states() {
                let row: Vec<String> = beliefs.per_time.iter().map(|b| format!("{:.4}", b.get(s))).collect();
                println!("  {:<24}{}", model.state_label(s), row.join("  "));
            }
        }
        println!();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Plan {
            model,
            observations,
            actions,
            gamma,
        } => plan(&model, observations, actions, gamma),
        Command::Run { config, out } => run(&config, out),
        Command::Trace { config, trial, agent } => trace(&config, trial, agent),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
