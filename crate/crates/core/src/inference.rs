//! Exact inference over hidden-state trajectories.
//!
//! Two independent routes compute the same posteriors:
//!
//! * [`enumerate_posterior`] sums the full joint over all `|S|^(T+1)` state
//!   sequences. It is slow and obviously correct, and serves as the oracle.
//! * [`filter_and_smooth`] runs forward-backward in log space over the
//!   action-conditioned chain. Timesteps after the last observation receive
//!   predictive marginals.
//!
//! The remaining operations derive observation predictions, hypothetical
//! Bayes updates, and the preference posterior from these marginals.

use serde::Serialize;

use crate::distributions::{log_sum_exp, pairwise_sum, Categorical};
use crate::error::InferenceError;
use crate::history::{History, Policy};
use crate::model::GenerativeModel;

/// Default cap on the number of joint terms enumerated by [`enumerate_posterior`].
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Exact distribution over complete state sequences `s_0..s_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectoryPosterior {
    n_states: usize,
    length: usize,
    // Trajectory i occupies states[i * length..(i + 1) * length].
    states: Vec<usize>,
    probs: Categorical,
}

impl StateTrajectoryPosterior {
    /// Number of trajectories in the support.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of timesteps per trajectory.
    pub fn trajectory_length(&self) -> usize {
        self.length
    }

    pub fn trajectory(&self, i: usize) -> &[usize] {
        &self.states[i * self.length..(i + 1) * self.length]
    }

    pub fn probs(&self) -> &Categorical {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.states
            .chunks(self.length)
            .zip(self.probs.probs().iter().copied())
    }

    /// Per-timestep marginals.
    pub fn marginals(&self) -> MarginalBeliefs {
        let mut weights = vec![vec![0.0; self.n_states]; self.length];
        for (path, p) in self.iter() {
            for (t, &s) in path.iter().enumerate() {
                weights[t][s] += p;
            }
        }
        MarginalBeliefs {
            per_time: weights
                .into_iter()
                .map(|w| Categorical::from_weights(w).expect("posterior has mass"))
                .collect(),
        }
    }
}

/// One categorical belief over states per timestep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalBeliefs {
    pub per_time: Vec<Categorical>,
}

impl MarginalBeliefs {
    pub fn at(&self, t: usize) -> &Categorical {
        &self.per_time[t]
    }

    pub fn len(&self) -> usize {
        self.per_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_time.is_empty()
    }

    /// Probability-weighted average of several belief sets over the same
    /// timesteps (Bayesian model average over policies).
    pub fn average(items: &[(f64, &MarginalBeliefs)]) -> MarginalBeliefs {
        let length = items[0].1.len();
        let n = items[0].1.at(0).len();
        let per_time = (0..length)
            .map(|t| {
                let w: Vec<f64> = (0..n)
                    .map(|s| {
                        let terms: Vec<f64> = items.iter().map(|(p, b)| p * b.at(t).get(s)).collect();
                        pairwise_sum(&terms)
                    })
                    .collect();
                Categorical::from_weights(w).expect("average of distributions")
            })
            .collect();
        MarginalBeliefs { per_time }
    }
}

/// Posterior preferences given the history: smoothed beliefs about the past
/// and i.i.d. preference marginals for each future timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePosterior {
    pub past: MarginalBeliefs,
    /// Timesteps `t+1..=T`.
    pub future_states: Vec<Categorical>,
    /// Timesteps `t+1..=T`.
    pub future_obs: Vec<Categorical>,
}

/// The full action sequence `a_1..a_T` (transition `k-1 → k` uses entry `k-1`).
fn action_sequence(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
) -> Result<Vec<usize>, InferenceError> {
    history.check(model)?;
    policy.check(model, history)?;
    let mut actions = history.actions().to_vec();
    actions.extend_from_slice(&policy.actions);
    Ok(actions)
}

/// Exact posterior over state trajectories by summing the joint over every
/// sequence. Future observations are marginalized out.
pub fn enumerate_posterior(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
    cap: u128,
) -> Result<StateTrajectoryPosterior, InferenceError> {
    let actions = action_sequence(model, history, policy)?;
    let ns = model.n_states();
    let length = actions.len() + 1;
    let terms = (ns as u128).checked_pow(length as u32).unwrap_or(u128::MAX);
    if terms > cap {
        return Err(InferenceError::HorizonOverflow { terms, cap });
    }
    let count = terms as usize;
    let observations = history.observations();

    let mut states = Vec::with_capacity(count * length);
    let mut weights = Vec::with_capacity(count);
    let mut path = vec![0usize; length];
    for _ in 0..count {
        let mut p = model.initial_belief().get(path[0]);
        for k in 1..length {
            p *= model.transition(actions[k - 1], path[k], path[k - 1]);
        }
        for (k, &o) in observations.iter().enumerate() {
            p *= model.likelihood(o, path[k]);
        }
        states.extend_from_slice(&path);
        weights.push(p);
        // Odometer increment, last timestep fastest.
        for k in (0..length).rev() {
            path[k] += 1;
            if path[k] < ns {
                break;
            }
            path[k] = 0;
        }
    }
    if pairwise_sum(&weights) <= 0.0 {
        return Err(InferenceError::ZeroEvidence {
            timestep: history.time(),
        });
    }
    Ok(StateTrajectoryPosterior {
        n_states: ns,
        length,
        states,
        probs: Categorical::from_weights(weights).expect("positive evidence"),
    })
}

/// Per-timestep exact marginals by log-space forward-backward. Timesteps
/// beyond the history get predictive marginals under the policy.
pub fn filter_and_smooth(
    model: &GenerativeModel,
    history: &History,
    policy: &Policy,
) -> Result<MarginalBeliefs, InferenceError> {
    let actions = action_sequence(model, history, policy)?;
    forward_backward(model, history.observations(), &actions)
}

/// Smoothed beliefs over the observed prefix `0..=t` only.
pub fn smooth_history(model: &GenerativeModel, history: &History) -> Result<MarginalBeliefs, InferenceError> {
    history.check(model)?;
    forward_backward(model, history.observations(), history.actions())
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn forward_backward(
    model: &GenerativeModel,
    observations: &[usize],
    actions: &[usize],
) -> Result<MarginalBeliefs, InferenceError> {
    let ns = model.n_states();
    let length = actions.len() + 1;
    let obs_term = |k: usize, s: usize| -> f64 {
        observations
            .get(k)
            .map_or(0.0, |&o| ln(model.likelihood(o, s)))
    };

    let mut alpha = vec![vec![0.0; ns]; length];
    for s in 0..ns {
        alpha[0][s] = ln(model.initial_belief().get(s)) + obs_term(0, s);
    }
    if log_sum_exp(&alpha[0]) == f64::NEG_INFINITY {
        return Err(InferenceError::ZeroEvidence { timestep: 0 });
    }
    let mut buf = vec![0.0; ns];
    for k in 1..length {
        let a = actions[k - 1];
        for next in 0..ns {
            for s in 0..ns {
                buf[s] = alpha[k - 1][s] + ln(model.transition(a, next, s));
            }
            alpha[k][next] = log_sum_exp(&buf) + obs_term(k, next);
        }
        if log_sum_exp(&alpha[k]) == f64::NEG_INFINITY {
            return Err(InferenceError::ZeroEvidence { timestep: k });
        }
    }

    let mut beta = vec![vec![0.0; ns]; length];
    for k in (0..length - 1).rev() {
        let a = actions[k];
        for s in 0..ns {
            for next in 0..ns {
                buf[next] = ln(model.transition(a, next, s)) + obs_term(k + 1, next) + beta[k + 1][next];
            }
            beta[k][s] = log_sum_exp(&buf);
        }
    }

    let per_time = (0..length)
        .map(|k| {
            let joint: Vec<f64> = (0..ns).map(|s| alpha[k][s] + beta[k][s]).collect();
            Categorical::from_log_weights(&joint).map_err(|_| InferenceError::ZeroEvidence { timestep: k })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MarginalBeliefs { per_time })
}

/// Observation distribution implied by a state belief: `Σ_s P(o|s) q(s)`.
pub fn predict_observation(model: &GenerativeModel, belief: &Categorical) -> Categorical {
    let weights: Vec<f64> = (0..model.n_obs())
        .map(|o| {
            let terms: Vec<f64> = (0..model.n_states())
                .map(|s| model.likelihood(o, s) * belief.get(s))
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Categorical::from_weights(weights).expect("likelihood columns are normalized")
}

/// Per-timestep predicted observation marginals.
pub fn predictive_observations(model: &GenerativeModel, beliefs: &MarginalBeliefs) -> Vec<Categorical> {
    beliefs
        .per_time
        .iter()
        .map(|b| predict_observation(model, b))
        .collect()
}

/// Bayes update of a state belief by a single observation.
pub fn bayes_update(
    model: &GenerativeModel,
    prior: &Categorical,
    observation: usize,
    timestep: usize,
) -> Result<Categorical, InferenceError> {
    let weights: Vec<f64> = (0..model.n_states())
        .map(|s| prior.get(s) * model.likelihood(observation, s))
        .collect();
    Categorical::from_weights(weights).map_err(|_| InferenceError::ZeroProbabilityObservation {
        observation,
        timestep,
    })
}

/// Posterior over states at `timestep` had `observation` been seen there.
pub fn conditional_state_posterior(
    model: &GenerativeModel,
    beliefs: &MarginalBeliefs,
    timestep: usize,
    observation: usize,
) -> Result<Categorical, InferenceError> {
    bayes_update(model, beliefs.at(timestep), observation, timestep)
}

/// Preference posterior given the history. Past beliefs are smoothed over
/// the observed prefix; future preferences are the model's i.i.d. state and
/// observation preference marginals.
pub fn preferential_inference(
    model: &GenerativeModel,
    history: &History,
) -> Result<PreferencePosterior, InferenceError> {
    let past = smooth_history(model, history)?;
    let remaining = model.horizon() - history.time();
    Ok(PreferencePosterior {
        past,
        future_states: vec![model.state_preference().clone(); remaining],
        future_obs: vec![model.preferred_obs_marginal().clone(); remaining],
    })
}
