//! Expected free energy, its two decompositions, the policy posterior, and the
//! comparison objectives.
//!
//! For a policy evaluated after history `h` at time `t`, each future timestep
//! `τ = t+1..=T` contributes, with `q` the predicted state marginal, `P̃` the
//! preferred state marginal and `P̂(o) = Σ_s P(o|s) P̃(s)` its observation
//! marginal:
//!
//! ```text
//! risk       = KL[q(s) ‖ P̃(s)]
//! ambiguity  = E_q(s) H[P(o|s)]
//! extrinsic  = E_q(o) log P̂(o)
//! intrinsic  = E_q(o) KL[q(s|o) ‖ q(s)]
//! total      = risk + ambiguity
//! residual   = total + extrinsic + intrinsic = E_q(o) KL[q(s|o) ‖ P̃(s|o)] ≥ 0
//! ```
//!
//! Summing over `τ` gives the per-timestep (canonical) breakdown. The
//! trajectory form in [`efe_breakdown_trajectory`] replaces the sums of
//! marginal terms with the same quantities over whole future paths.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{entropy, log_sum_exp, pairwise_sum, Categorical};
use crate::error::{InferenceError, PlanningError};
use crate::history::{History, Policy};
use crate::inference::{
    enumerate_posterior, filter_and_smooth, predict_observation, preferential_inference, MarginalBeliefs,
    PreferencePosterior,
};
use crate::model::GenerativeModel;

/// Default cap on the number of enumerated policies.
pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// Action probabilities closer than this to the maximum count as tied.
pub const ARGMAX_TIE_TOLERANCE: f64 = 1e-12;

/// Expected free energy of one policy and its components, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EfeBreakdown {
    pub total: f64,
    pub risk: f64,
    pub ambiguity: f64,
    pub extrinsic: f64,
    pub intrinsic: f64,
    pub residual: f64,
}

impl EfeBreakdown {
    fn from_terms(risk: f64, ambiguity: f64, extrinsic: f64, intrinsic: f64) -> Self {
        let total = risk + ambiguity;
        Self {
            total,
            risk,
            ambiguity,
            extrinsic,
            intrinsic,
            residual: total + extrinsic + intrinsic,
        }
    }
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Mutual information between the state and the observation it emits,
/// `Σ_{s,o} q(s) P(o|s) [log P(o|s) − log q(o)]`.
fn state_obs_information(model: &GenerativeModel, belief: &Categorical, predicted_obs: &Categorical) -> f64 {
    let mut terms = Vec::with_capacity(model.n_states() * model.n_obs());
    for s in 0..model.n_states() {
        let qs = belief.get(s);
        if qs == 0.0 {
            continue;
        }
        for (o, &lik) in model.emission(s).iter().enumerate() {
            if lik > 0.0 {
                terms.push(qs * lik * (lik.ln() - predicted_obs.get(o).ln()));
            }
        }
    }
    pairwise_sum(&terms).max(0.0)
}

/// Breakdown from already-computed marginals, summing timesteps after `t`,
/// against the model's i.i.d. preferences.
pub fn breakdown_from_beliefs(model: &GenerativeModel, beliefs: &MarginalBeliefs, t: usize) -> EfeBreakdown {
    let remaining = beliefs.len() - t - 1;
    let preferences = PreferencePosterior {
        past: MarginalBeliefs { per_time: vec![] },
        future_states: vec![model.state_preference().clone(); remaining],
        future_obs: vec![model.preferred_obs_marginal().clone(); remaining],
    };
    breakdown_against(model, beliefs, t, &preferences)
}

/// Breakdown of predicted marginals against an inferred preference posterior.
pub fn breakdown_against(
    model: &GenerativeModel,
    beliefs: &MarginalBeliefs,
    t: usize,
    preferences: &PreferencePosterior,
) -> EfeBreakdown {
    let ambiguity_per_state: Vec<f64> = (0..model.n_states()).map(|s| entropy(model.emission(s))).collect();

    let (mut risk, mut ambiguity, mut extrinsic, mut intrinsic) = (vec![], vec![], vec![], vec![]);
    for (k, belief) in beliefs.per_time[t + 1..].iter().enumerate() {
        let predicted_obs = predict_observation(model, belief);
        let log_preferred_obs: Vec<f64> = preferences.future_obs[k].probs().iter().map(|&p| ln(p)).collect();
        risk.push(belief.kl_divergence(&preferences.future_states[k]));
        ambiguity.push(belief.expectation(&ambiguity_per_state));
        extrinsic.push(predicted_obs.expectation(&log_preferred_obs));
        intrinsic.push(state_obs_information(model, belief, &predicted_obs));
    }
    EfeBreakdown::from_terms(
        pairwise_sum(&risk),
        pairwise_sum(&ambiguity),
        pairwise_sum(&extrinsic),
        pairwise_sum(&intrinsic),
    )
}

/// Per-timestep expected free energy breakdown of `policy` after `history`.
pub fn efe_breakdown(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
) -> Result<EfeBreakdown, PlanningError> {
    let beliefs = filter_and_smooth(model, history, policy)?;
    Ok(breakdown_from_beliefs(model, &beliefs, history.time()))
}

/// The residual evaluated directly as `Σ_τ E_q(o) KL[q(s|o) ‖ P̃(s|o)]`,
/// where `P̃(s|o)` is the preference model's posterior. Cross-check for the
/// subtraction used in [`EfeBreakdown`].
pub fn residual_divergence(model: &GenerativeModel, beliefs: &MarginalBeliefs, t: usize) -> f64 {
    let pref = model.state_preference();
    let mut terms = vec![];
    for belief in &beliefs.per_time[t + 1..] {
        let predicted_obs = predict_observation(model, belief);
        for o in 0..model.n_obs() {
            let qo = predicted_obs.get(o);
            if qo == 0.0 {
                continue;
            }
            let posterior: Vec<f64> = (0..model.n_states())
                .map(|s| belief.get(s) * model.likelihood(o, s) / qo)
                .collect();
            let pref_posterior = Categorical::from_weights(
                (0..model.n_states()).map(|s| pref.get(s) * model.likelihood(o, s)).collect(),
            )
            .expect("preferences have full support");
            terms.push(qo * crate::distributions::kl_divergence(&posterior, pref_posterior.probs()));
        }
    }
    pairwise_sum(&terms)
}

/// Trajectory-exact breakdown: risk is the KL between the predicted and the
/// preferred distributions over whole future state paths, and intrinsic value
/// is the mutual information between future state and observation paths.
/// Enumerates, so it is subject to `cap` joint terms.
pub fn efe_breakdown_trajectory(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
    cap: u128,
) -> Result<EfeBreakdown, PlanningError> {
    let posterior = enumerate_posterior(model, history, policy, cap)?;
    let n_future = policy.len();
    if n_future == 0 {
        return Ok(EfeBreakdown::default());
    }
    let ns = model.n_states();
    let no = model.n_obs();
    let n_paths = ns.pow(n_future as u32);
    let obs_paths = (no as u128).pow(n_future as u32);
    if obs_paths * n_paths as u128 > cap {
        return Err(InferenceError::HorizonOverflow {
            terms: obs_paths * n_paths as u128,
            cap,
        }
        .into());
    }

    // Enumeration runs the last timestep fastest, so the future suffix of
    // trajectory i is path index i mod n_paths.
    let mut future = vec![0.0; n_paths];
    for (i, &p) in posterior.probs().probs().iter().enumerate() {
        future[i % n_paths] += p;
    }
    let suffix = |mut j: usize| -> Vec<usize> {
        let mut path = vec![0; n_future];
        for k in (0..n_future).rev() {
            path[k] = j % ns;
            j /= ns;
        }
        path
    };

    let log_pref_state: Vec<f64> = model.state_preference().probs().iter().map(|&p| ln(p)).collect();
    let log_pref_obs: Vec<f64> = model.preferred_obs_marginal().probs().iter().map(|&p| ln(p)).collect();
    let mut risk = vec![];
    let mut ambiguity = vec![];
    let mut obs_dist = vec![0.0; obs_paths as usize];
    for (j, &q) in future.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let path = suffix(j);
        let log_pref: f64 = path.iter().map(|&s| log_pref_state[s]).sum();
        risk.push(q * (q.ln() - log_pref));
        ambiguity.push(q * path.iter().map(|&s| entropy(model.emission(s))).sum::<f64>());
        // Spread q over observation paths.
        let mut obs = vec![0usize; n_future];
        for slot in obs_dist.iter_mut() {
            let lik: f64 = path.iter().zip(&obs).map(|(&s, &o)| model.likelihood(o, s)).product();
            *slot += q * lik;
            for k in (0..n_future).rev() {
                obs[k] += 1;
                if obs[k] < no {
                    break;
                }
                obs[k] = 0;
            }
        }
    }
    let mut extrinsic = vec![];
    let mut obs = vec![0usize; n_future];
    for &q in &obs_dist {
        if q > 0.0 {
            extrinsic.push(q * obs.iter().map(|&o| log_pref_obs[o]).sum::<f64>());
        }
        for k in (0..n_future).rev() {
            obs[k] += 1;
            if obs[k] < no {
                break;
            }
            obs[k] = 0;
        }
    }
    let ambiguity = pairwise_sum(&ambiguity);
    let intrinsic = (entropy(&obs_dist) - ambiguity).max(0.0);
    Ok(EfeBreakdown::from_terms(
        pairwise_sum(&risk),
        ambiguity,
        pairwise_sum(&extrinsic),
        intrinsic,
    ))
}

/// `Σ_τ E_q(o_τ)[reward(o_τ)]` over timesteps after `t`.
pub fn expected_reward(model: &GenerativeModel, beliefs: &MarginalBeliefs, t: usize, reward_per_obs: &[f64]) -> f64 {
    let terms: Vec<f64> = beliefs.per_time[t + 1..]
        .iter()
        .map(|b| predict_observation(model, b).expectation(reward_per_obs))
        .collect();
    pairwise_sum(&terms)
}

/// The objectives compared on the T-Maze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    ExpectedFreeEnergy,
    ExpectedReward,
    RewardPlusInfoGain,
    InfoGainOnly,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [
        ObjectiveKind::ExpectedFreeEnergy,
        ObjectiveKind::ExpectedReward,
        ObjectiveKind::RewardPlusInfoGain,
        ObjectiveKind::InfoGainOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::ExpectedFreeEnergy => "expected_free_energy",
            ObjectiveKind::ExpectedReward => "expected_reward",
            ObjectiveKind::RewardPlusInfoGain => "reward_plus_info_gain",
            ObjectiveKind::InfoGainOnly => "info_gain_only",
        }
    }

    fn needs_reward(self) -> bool {
        matches!(self, ObjectiveKind::ExpectedReward | ObjectiveKind::RewardPlusInfoGain)
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything computed for one candidate policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub policy: Policy,
    pub beliefs: MarginalBeliefs,
    pub breakdown: EfeBreakdown,
    pub expected_reward: f64,
    /// Objective value to maximize.
    pub score: f64,
}

fn check_reward(model: &GenerativeModel, kind: ObjectiveKind, reward_per_obs: &[f64]) -> Result<(), PlanningError> {
    if kind.needs_reward() && reward_per_obs.len() != model.n_obs() {
        return Err(PlanningError::DimensionMismatch(format!(
            "reward vector has {} entries, model has {} observations",
            reward_per_obs.len(),
            model.n_obs()
        )));
    }
    Ok(())
}

pub fn evaluate_policy(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
    kind: ObjectiveKind,
    reward_per_obs: &[f64],
) -> Result<PolicyEvaluation, PlanningError> {
    check_reward(model, kind, reward_per_obs)?;
    let preferences = preferential_inference(model, history)?;
    evaluate_with(model, history, policy, kind, reward_per_obs, &preferences)
}

fn evaluate_with(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
    kind: ObjectiveKind,
    reward_per_obs: &[f64],
    preferences: &PreferencePosterior,
) -> Result<PolicyEvaluation, PlanningError> {
    let beliefs = filter_and_smooth(model, history, policy)?;
    let t = history.time();
    let breakdown = breakdown_against(model, &beliefs, t, preferences);
    let expected_reward = if kind.needs_reward() {
        expected_reward(model, &beliefs, t, reward_per_obs)
    } else {
        0.0
    };
    let score = match kind {
        ObjectiveKind::ExpectedFreeEnergy => -breakdown.total,
        ObjectiveKind::ExpectedReward => expected_reward,
        ObjectiveKind::RewardPlusInfoGain => expected_reward + breakdown.intrinsic,
        ObjectiveKind::InfoGainOnly => breakdown.intrinsic,
    };
    Ok(PolicyEvaluation {
        policy: policy.clone(),
        beliefs,
        breakdown,
        expected_reward,
        score,
    })
}

/// Score of `policy` under `kind`, oriented so that larger is better for
/// every kind (the free-energy kind returns `−total`).
pub fn alternative_objective(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
    kind: ObjectiveKind,
    reward_per_obs: &[f64],
) -> Result<f64, PlanningError> {
    evaluate_policy(model, history, policy, kind, reward_per_obs).map(|e| e.score)
}

/// All `n_actions^len` action sequences in lexicographic order.
pub fn enumerate_policies(n_actions: usize, len: usize, cap: u128) -> Result<Vec<Policy>, PlanningError> {
    let count = (n_actions as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(PlanningError::PolicySpaceOverflow { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut seq = vec![0usize; len];
    for _ in 0..count {
        out.push(Policy::new(seq.clone()));
        for k in (0..len).rev() {
            seq[k] += 1;
            if seq[k] < n_actions {
                break;
            }
            seq[k] = 0;
        }
    }
    Ok(out)
}

/// Softmax posterior over policies, `Q(π) ∝ exp(γ · score(π))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPosterior {
    pub policies: Vec<Policy>,
    /// Normalized log probabilities.
    pub log_weights: Vec<f64>,
    pub probs: Categorical,
    n_actions: usize,
}

impl PolicyPosterior {
    /// `scores` are maximized; pass negated free energies for the standard
    /// posterior. `gamma = 0` gives the uniform posterior.
    pub fn from_scores(
        policies: Vec<Policy>,
        scores: &[f64],
        gamma: f64,
        n_actions: usize,
    ) -> Result<Self, PlanningError> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(PlanningError::InvalidPrecision(gamma));
        }
        if policies.is_empty() || policies.len() != scores.len() {
            return Err(PlanningError::DimensionMismatch(format!(
                "{} policies, {} scores",
                policies.len(),
                scores.len()
            )));
        }
        let raw: Vec<f64> = scores.iter().map(|&s| if gamma == 0.0 { 0.0 } else { gamma * s }).collect();
        let lse = log_sum_exp(&raw);
        let log_weights: Vec<f64> = raw.iter().map(|&x| x - lse).collect();
        let probs = Categorical::from_log_weights(&raw)
            .map_err(|e| PlanningError::DimensionMismatch(format!("degenerate policy scores: {e}")))?;
        Ok(Self {
            policies,
            log_weights,
            probs,
            n_actions,
        })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Standard policy posterior: softmax of `−γ · G` over all remaining action
/// sequences.
pub fn policy_posterior(
    model: &GenerativeModel,
    history: &History,
    gamma: f64,
) -> Result<PolicyPosterior, PlanningError> {
    Planner::new(ObjectiveKind::ExpectedFreeEnergy, gamma)
        .plan(model, history)
        .map(|plan| plan.posterior)
}

/// `Q(a_{t+1}) = Σ_π [first action of π = a] Q(π)`.
pub fn action_marginal(posterior: &PolicyPosterior) -> Categorical {
    let mut weights = vec![0.0; posterior.n_actions];
    for (policy, &p) in posterior.policies.iter().zip(posterior.probs.probs()) {
        if let Some(a) = policy.first_action() {
            weights[a] += p;
        }
    }
    Categorical::from_weights(weights).expect("posterior over non-empty policies")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Argmax,
    Sample,
}

/// Picks an action from its marginal. `Argmax` takes the most probable action,
/// lowest index among ties (within [`ARGMAX_TIE_TOLERANCE`]) and does not
/// touch `rng`. `Sample` draws one uniform `f64` from `rng` and inverts the
/// CDF in index order.
pub fn select_action<R: Rng + ?Sized>(marginal: &Categorical, mode: SelectionMode, rng: &mut R) -> usize {
    match mode {
        SelectionMode::Argmax => marginal.argmax(ARGMAX_TIE_TOLERANCE),
        SelectionMode::Sample => marginal.quantile(rng.gen::<f64>()),
    }
}

/// The result of one planning step.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub preferences: PreferencePosterior,
    pub evaluations: Vec<PolicyEvaluation>,
    pub posterior: PolicyPosterior,
    pub action_marginal: Categorical,
}

impl Plan {
    /// Bayesian model average of the per-policy beliefs.
    pub fn averaged_beliefs(&self) -> MarginalBeliefs {
        let items: Vec<(f64, &MarginalBeliefs)> = self
            .posterior
            .probs
            .probs()
            .iter()
            .zip(&self.evaluations)
            .map(|(&p, e)| (p, &e.beliefs))
            .collect();
        MarginalBeliefs::average(&items)
    }
}

/// Evaluates every remaining policy under one objective and forms the
/// posterior. Policies are evaluated in parallel; results keep enumeration
/// order.
#[derive(Debug, Clone)]
pub struct Planner {
    pub kind: ObjectiveKind,
    pub gamma: f64,
    pub reward_per_obs: Vec<f64>,
    pub policy_cap: u128,
}

impl Planner {
    pub fn new(kind: ObjectiveKind, gamma: f64) -> Self {
        Self {
            kind,
            gamma,
            reward_per_obs: vec![],
            policy_cap: DEFAULT_POLICY_CAP,
        }
    }

    pub fn with_reward(mut self, reward_per_obs: Vec<f64>) -> Self {
        self.reward_per_obs = reward_per_obs;
        self
    }

    pub fn plan(&self, model: &GenerativeModel, history: &History) -> Result<Plan, PlanningError> {
        history.check(model)?;
        check_reward(model, self.kind, &self.reward_per_obs)?;
        let remaining = model.horizon() - history.time();
        if remaining == 0 {
            return Err(PlanningError::HorizonReached);
        }
        let preferences = preferential_inference(model, history)?;
        let policies = enumerate_policies(model.n_actions(), remaining, self.policy_cap)?;
        let evaluations = policies
            .par_iter()
            .map(|p| evaluate_with(model, history, p, self.kind, &self.reward_per_obs, &preferences))
            .collect::<Result<Vec<_>, _>>()?;
        let scores: Vec<f64> = evaluations.iter().map(|e| e.score).collect();
        let posterior = PolicyPosterior::from_scores(policies, &scores, self.gamma, model.n_actions())?;
        let action_marginal = action_marginal(&posterior);
        Ok(Plan {
            preferences,
            evaluations,
            posterior,
            action_marginal,
        })
    }
}
