//! Receding-horizon agent loop, trial records, and seeded experiments.
//!
//! Each decision runs the four steps in order: preferential inference on the
//! history, perceptual inference and objective evaluation for every remaining
//! action sequence, the softmax policy posterior, and execution of one action
//! drawn from the posterior's first-action marginal.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Categorical;
use crate::envs::{build_environment, Environment, EnvironmentBundle, EnvironmentConfig};
use crate::error::HarnessError;
use crate::history::{History, Policy};
use crate::inference::{filter_and_smooth, MarginalBeliefs};
use crate::model::GenerativeModel;
use crate::planning::{select_action, EfeBreakdown, ObjectiveKind, Planner, SelectionMode};

/// One agent to run in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: ObjectiveKind,
    /// Defaults to `sample` for the expected-reward agent and `argmax` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionMode>,
}

impl AgentConfig {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self { kind, selection: None }
    }

    pub fn selection(&self) -> SelectionMode {
        self.selection.unwrap_or(match self.kind {
            ObjectiveKind::ExpectedReward => SelectionMode::Sample,
            _ => SelectionMode::Argmax,
        })
    }
}

fn default_gamma() -> f64 {
    1.0
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Overrides the environment's default reward vector for the reward agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_per_obs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_trials == 0 {
            return Err(HarnessError::Config("n_trials must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(HarnessError::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.agents.is_empty() {
            return Err(HarnessError::Config("at least one agent is required".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless seed for stream `index` under `master`. Trials never share a
/// generator, so results do not depend on execution order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// What happened at one decision time.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub t: usize,
    pub policies: Vec<Policy>,
    pub policy_probs: Vec<f64>,
    pub breakdowns: Vec<EfeBreakdown>,
    pub scores: Vec<f64>,
    pub action_marginal: Categorical,
    pub action: usize,
}

/// One episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub agent: ObjectiveKind,
    pub context: String,
    pub initial_state: Option<usize>,
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub score: f64,
    pub decisions: Vec<DecisionRecord>,
}

/// Beliefs held at each decision time `0..=T` about every timestep `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTrace {
    pub trial: usize,
    pub agent: ObjectiveKind,
    pub per_decision: Vec<MarginalBeliefs>,
}

/// Agent settings shared across trials.
#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub kind: ObjectiveKind,
    pub gamma: f64,
    pub selection: SelectionMode,
    pub reward_per_obs: Vec<f64>,
}

/// Runs one episode from `seed`. The environment's hidden randomness and the
/// agent's action sampling use separate streams derived from it.
pub fn run_trial(
    model: &GenerativeModel,
    env: &mut dyn Environment,
    agent: &AgentSpec,
    trial: usize,
    seed: u64,
) -> Result<(TrialRecord, BeliefTrace), HarnessError> {
    let planning_err = |source| HarnessError::Planning { trial, source };
    let env_err = |source| HarnessError::Environment { trial, source };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let first = env.reset(derive_seed(seed, 0));
    let context = env.context_label();
    let initial_state = env.ground_truth();
    let mut history = History::initial(first);
    let planner = Planner::new(agent.kind, agent.gamma).with_reward(agent.reward_per_obs.clone());

    let mut decisions = Vec::with_capacity(model.horizon());
    let mut per_decision = Vec::with_capacity(model.horizon() + 1);
    for t in 0..model.horizon() {
        let plan = planner.plan(model, &history).map_err(planning_err)?;
        per_decision.push(plan.averaged_beliefs());
        let action = select_action(&plan.action_marginal, agent.selection, &mut rng);
        let step = env.step(action).map_err(env_err)?;
        decisions.push(DecisionRecord {
            t,
            policies: plan.posterior.policies.clone(),
            policy_probs: plan.posterior.probs.probs().to_vec(),
            breakdowns: plan.evaluations.iter().map(|e| e.breakdown).collect(),
            scores: plan.evaluations.iter().map(|e| e.score).collect(),
            action_marginal: plan.action_marginal,
            action,
        });
        history.push(action, step.observation);
        if step.done {
            break;
        }
    }
    let last = filter_and_smooth(model, &history, &Policy::empty()).map_err(|e| planning_err(e.into()))?;
    per_decision.push(last);

    let score = env
        .score(history.observations(), history.actions())
        .map_err(env_err)?;
    let record = TrialRecord {
        trial,
        agent: agent.kind,
        context,
        initial_state,
        observations: history.observations().to_vec(),
        actions: history.actions().to_vec(),
        score,
        decisions,
    };
    let trace = BeliefTrace {
        trial,
        agent: agent.kind,
        per_decision,
    };
    Ok((record, trace))
}

/// Per-agent score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: ObjectiveKind,
    pub selection: SelectionMode,
    pub n_trials: usize,
    pub total: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Running sum of trial scores, one entry per trial.
    pub cumulative: Vec<f64>,
}

impl AgentSummary {
    pub fn from_scores(agent: ObjectiveKind, selection: SelectionMode, scores: &[f64]) -> Self {
        let n = scores.len();
        let cumulative: Vec<f64> = scores
            .iter()
            .scan(0.0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        let total = cumulative.last().copied().unwrap_or(0.0);
        let mean = total / n as f64;
        let std_error = if n > 1 {
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            agent,
            selection,
            n_trials: n,
            total,
            mean,
            std_error,
            cumulative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub environment: String,
    pub master_seed: u64,
    pub gamma: f64,
    pub n_trials: usize,
    pub agents: Vec<AgentSummary>,
}

/// All records of an experiment, ordered by agent (config order) then trial.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub traces: Vec<BeliefTrace>,
    pub summary: Summary,
}

/// A prepared experiment: validated config plus its environment bundle.
pub struct Experiment {
    pub config: ExperimentConfig,
    bundle: EnvironmentBundle,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let bundle = build_environment(&config.environment)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(reward) = &config.reward_per_obs {
            if reward.len() != bundle.model.n_obs() {
                return Err(HarnessError::Config(format!(
                    "reward_per_obs has {} entries, model has {} observations",
                    reward.len(),
                    bundle.model.n_obs()
                )));
            }
        }
        Ok(Self { config, bundle })
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.bundle.model
    }

    fn agent_spec(&self, agent: &AgentConfig) -> AgentSpec {
        AgentSpec {
            kind: agent.kind,
            gamma: self.config.gamma,
            selection: agent.selection(),
            reward_per_obs: self
                .config
                .reward_per_obs
                .clone()
                .unwrap_or_else(|| self.bundle.reward_per_obs.clone()),
        }
    }

    /// Runs trial `index` for one agent, exactly as [`Experiment::run`] would.
    pub fn run_one(&self, agent: &AgentConfig, index: usize) -> Result<(TrialRecord, BeliefTrace), HarnessError> {
        let spec = self.agent_spec(agent);
        let mut env = self.bundle.instantiate();
        run_trial(
            &self.bundle.model,
            env.as_mut(),
            &spec,
            index,
            derive_seed(self.config.master_seed, index as u64),
        )
    }

    /// Runs every agent for `n_trials` trials. Trials execute in parallel;
    /// output order is fixed.
    pub fn run(&self) -> Result<ExperimentOutput, HarnessError> {
        let mut records = Vec::new();
        let mut traces = Vec::new();
        let mut agents = Vec::new();
        for agent in &self.config.agents {
            let results = (0..self.config.n_trials)
                .into_par_iter()
                .map(|i| self.run_one(agent, i))
                .collect::<Result<Vec<_>, _>>()?;
            let scores: Vec<f64> = results.iter().map(|(r, _)| r.score).collect();
            agents.push(AgentSummary::from_scores(agent.kind, agent.selection(), &scores));
            for (record, trace) in results {
                records.push(record);
                traces.push(trace);
            }
        }
        Ok(ExperimentOutput {
            summary: Summary {
                environment: self.config.environment.name.clone(),
                master_seed: self.config.master_seed,
                gamma: self.config.gamma,
                n_trials: self.config.n_trials,
                agents,
            },
            config: self.config.clone(),
            records,
            traces,
        })
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    Experiment::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kinds: &[ObjectiveKind], n_trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvironmentConfig::default(),
            agents: kinds.iter().map(|&k| AgentConfig::new(k)).collect(),
            gamma: 1.0,
            n_trials,
            master_seed: 2024,
            reward_per_obs: None,
            output_dir: None,
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            run_experiment(&config(&[ObjectiveKind::ExpectedFreeEnergy], 0)),
            Err(HarnessError::Config(_))
        ));
        let mut bad = config(&[ObjectiveKind::ExpectedFreeEnergy], 1);
        bad.gamma = 0.0;
        assert!(matches!(run_experiment(&bad), Err(HarnessError::Config(_))));
        let mut bad = config(&[], 1);
        bad.agents.clear();
        assert!(matches!(run_experiment(&bad), Err(HarnessError::Config(_))));
        let mut bad = config(&[ObjectiveKind::ExpectedReward], 1);
        bad.reward_per_obs = Some(vec![1.0]);
        assert!(matches!(run_experiment(&bad), Err(HarnessError::Config(_))));
    }

    #[test]
    fn default_selection_modes() {
        assert_eq!(AgentConfig::new(ObjectiveKind::ExpectedReward).selection(), SelectionMode::Sample);
        assert_eq!(AgentConfig::new(ObjectiveKind::ExpectedFreeEnergy).selection(), SelectionMode::Argmax);
        assert_eq!(AgentConfig::new(ObjectiveKind::InfoGainOnly).selection(), SelectionMode::Argmax);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn trial_order_does_not_matter() {
        let exp = Experiment::new(config(&[ObjectiveKind::ExpectedReward], 20)).unwrap();
        let agent = exp.config.agents[0].clone();
        let forward: Vec<TrialRecord> = (0..20).map(|i| exp.run_one(&agent, i).unwrap().0).collect();
        let mut backward: Vec<TrialRecord> = (0..20).rev().map(|i| exp.run_one(&agent, i).unwrap().0).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        let out = exp.run().unwrap();
        assert_eq!(out.records, forward);
    }

    #[test]
    fn records_have_consistent_shapes() {
        let out = run_experiment(&config(&ObjectiveKind::ALL, 5)).unwrap();
        assert_eq!(out.records.len(), 20);
        for (r, tr) in out.records.iter().zip(&out.traces) {
            assert_eq!(r.observations.len(), 3);
            assert_eq!(r.actions.len(), 2);
            assert_eq!(r.decisions.len(), 2);
            assert_eq!(r.decisions[0].policies.len(), 16);
            assert_eq!(r.decisions[1].policies.len(), 4);
            assert_eq!(tr.per_decision.len(), 3);
            for beliefs in &tr.per_decision {
                assert_eq!(beliefs.len(), 3);
                for b in &beliefs.per_time {
                    assert!((b.sum() - 1.0).abs() < 1e-10);
                }
            }
            assert!([-10.0, 0.0, 5.0, 10.0].contains(&r.score));
        }
    }

    #[test]
    fn cumulative_is_prefix_sum() {
        let s = AgentSummary::from_scores(ObjectiveKind::ExpectedReward, SelectionMode::Sample, &[5.0, -10.0, 10.0, 0.0]);
        assert_eq!(s.cumulative, vec![5.0, -5.0, 5.0, 5.0]);
        assert_eq!(s.total, 5.0);
        assert_eq!(s.mean, 1.25);
    }
}
