//! Discrete generative models: a POMDP prediction model and an i.i.d. hidden
//! Markov preference model that share one likelihood map.
//!
//! A [`ModelDescription`] is the raw, serializable form (the model file
//! schema). [`GenerativeModel`] is the validated, immutable form that every
//! inference and planning routine consumes.
//!
//! Index conventions, all dense and 0-based:
//!
//! * `likelihood[o][s]` is `P(o_t = o | s_t = s)`;
//! * `transitions[a][s'][s]` is `P(s_{t+1} = s' | s_t = s, a_{t+1} = a)`;
//! * `obs_log_pref[o]` is an unnormalized log-preference over observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{pairwise_sum, Categorical, ACCEPT_TOLERANCE};
use crate::error::{ValidationReport, Violation, ViolationKind};

/// Human-readable names for indices. Reporting only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
}

/// The on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescription {
    pub n_states: usize,
    pub n_obs: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// `n_obs` rows of `n_states` entries.
    pub likelihood: Vec<Vec<f64>>,
    /// `n_actions` matrices, each `n_states` rows (next state) of `n_states` entries (current state).
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub initial_belief: Vec<f64>,
    pub obs_log_pref: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

/// Observation log-preferences plus the state log-preferences derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPreferences {
    pub obs_log_pref: Vec<f64>,
    pub state_log_pref: Option<Vec<f64>>,
}

/// A validated generative model. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    n_states: usize,
    n_obs: usize,
    n_actions: usize,
    horizon: usize,
    // emission[s][o] = P(o | s)
    emission: Vec<Vec<f64>>,
    // dynamics[a][s][s'] = P(s' | s, a)
    dynamics: Vec<Vec<Vec<f64>>>,
    initial_belief: Categorical,
    preferences: LogPreferences,
    state_preference: Categorical,
    obs_preference: Categorical,
    preferred_obs_marginal: Categorical,
    labels: Option<Labels>,
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, kind: ViolationKind, tensor: &str, index: Vec<usize>, detail: String) {
        self.violations.push(Violation {
            kind,
            tensor: tensor.to_string(),
            index,
            detail,
        });
    }

    /// Checks finiteness and sign of every entry; returns false if any failed.
    fn entries(&mut self, tensor: &str, prefix: &[usize], values: &[f64]) -> bool {
        let mut ok = true;
        for (i, &v) in values.iter().enumerate() {
            let mut index = prefix.to_vec();
            index.push(i);
            if !v.is_finite() {
                self.push(ViolationKind::NonFiniteEntry, tensor, index, format!("entry is {v}"));
                ok = false;
            } else if v < 0.0 {
                self.push(ViolationKind::NegativeEntry, tensor, index, format!("entry is {v}"));
                ok = false;
            }
        }
        ok
    }

    fn stochastic(&mut self, tensor: &str, index: Vec<usize>, what: &str, values: &[f64]) {
        let sum = pairwise_sum(values);
        if (sum - 1.0).abs() > ACCEPT_TOLERANCE {
            self.push(
                ViolationKind::NotStochastic,
                tensor,
                index,
                format!("{what} sums to {sum}"),
            );
        }
    }

    fn length(&mut self, tensor: &str, index: Vec<usize>, got: usize, want: usize) -> bool {
        if got != want {
            self.push(
                ViolationKind::DimensionMismatch,
                tensor,
                index,
                format!("length {got}, expected {want}"),
            );
            false
        } else {
            true
        }
    }
}

/// Checks a model description against every structural rule and reports all
/// violations at once.
pub fn validate_model(desc: &ModelDescription) -> Result<(), ValidationReport> {
    let mut c = Checker { violations: vec![] };
    for (name, value) in [
        ("n_states", desc.n_states),
        ("n_obs", desc.n_obs),
        ("n_actions", desc.n_actions),
        ("horizon", desc.horizon),
    ] {
        if value == 0 {
            c.push(ViolationKind::DimensionMismatch, name, vec![], "must be at least 1".into());
        }
    }
    let (ns, no, na) = (desc.n_states, desc.n_obs, desc.n_actions);

    // Likelihood: columns over observations.
    let mut lik_ok = c.length("likelihood", vec![], desc.likelihood.len(), no);
    for (o, row) in desc.likelihood.iter().enumerate() {
        lik_ok &= c.length("likelihood", vec![o], row.len(), ns);
    }
    if lik_ok {
        let mut entries_ok = true;
        for (o, row) in desc.likelihood.iter().enumerate() {
            entries_ok &= c.entries("likelihood", &[o], row);
        }
        if entries_ok {
            for s in 0..ns {
                let column: Vec<f64> = desc.likelihood.iter().map(|row| row[s]).collect();
                c.stochastic("likelihood", vec![s], &format!("column {s}"), &column);
            }
        }
    }

    // Transitions: for each action, columns over next states.
    let mut trans_ok = c.length("transitions", vec![], desc.transitions.len(), na);
    for (a, matrix) in desc.transitions.iter().enumerate() {
        trans_ok &= c.length("transitions", vec![a], matrix.len(), ns);
        for (next, row) in matrix.iter().enumerate() {
            trans_ok &= c.length("transitions", vec![a, next], row.len(), ns);
        }
    }
    if trans_ok {
        for (a, matrix) in desc.transitions.iter().enumerate() {
            let mut entries_ok = true;
            for (next, row) in matrix.iter().enumerate() {
                entries_ok &= c.entries("transitions", &[a, next], row);
            }
            if entries_ok {
                for s in 0..ns {
                    let slice: Vec<f64> = matrix.iter().map(|row| row[s]).collect();
                    c.stochastic(
                        "transitions",
                        vec![a, s],
                        &format!("action {a}, source state {s}"),
                        &slice,
                    );
                }
            }
        }
    }

    if c.length("initial_belief", vec![], desc.initial_belief.len(), ns)
        && c.entries("initial_belief", &[], &desc.initial_belief)
    {
        c.stochastic("initial_belief", vec![], "initial belief", &desc.initial_belief);
    }

    if c.length("obs_log_pref", vec![], desc.obs_log_pref.len(), no) {
        for (o, &v) in desc.obs_log_pref.iter().enumerate() {
            if !v.is_finite() {
                c.push(ViolationKind::NonFiniteEntry, "obs_log_pref", vec![o], format!("entry is {v}"));
            }
        }
    }

    if let Some(labels) = &desc.labels {
        for (name, got, want) in [
            ("labels.states", labels.states.len(), ns),
            ("labels.observations", labels.observations.len(), no),
            ("labels.actions", labels.actions.len(), na),
        ] {
            if got != 0 {
                c.length(name, vec![], got, want);
            }
        }
    }

    if c.violations.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport {
            violations: c.violations,
        })
    }
}

/// Expected-log pullback of observation preferences through the likelihood:
/// `state_log_pref[s] = Σ_o P(o|s) · obs_log_pref[o]`.
fn pullback_log(emission: &[Vec<f64>], obs_log_pref: &[f64]) -> Vec<f64> {
    emission
        .iter()
        .map(|column| {
            let terms: Vec<f64> = column
                .iter()
                .zip(obs_log_pref)
                .map(|(&p, &c)| if p == 0.0 { 0.0 } else { p * c })
                .collect();
            pairwise_sum(&terms)
        })
        .collect()
}

impl GenerativeModel {
    /// Validates a description and builds the model, deriving the state
    /// preferences.
    pub fn from_description(desc: ModelDescription) -> Result<Self, ValidationReport> {
        validate_model(&desc)?;
        let (ns, no, na) = (desc.n_states, desc.n_obs, desc.n_actions);
        let emission: Vec<Vec<f64>> = (0..ns)
            .map(|s| {
                let column: Vec<f64> = (0..no).map(|o| desc.likelihood[o][s]).collect();
                Categorical::from_weights(column).expect("validated column").into()
            })
            .collect();
        let dynamics: Vec<Vec<Vec<f64>>> = (0..na)
            .map(|a| {
                (0..ns)
                    .map(|s| {
                        let slice: Vec<f64> = (0..ns).map(|next| desc.transitions[a][next][s]).collect();
                        Categorical::from_weights(slice).expect("validated slice").into()
                    })
                    .collect()
            })
            .collect();
        let initial_belief =
            Categorical::from_weights(desc.initial_belief).expect("validated initial belief");
        let state_log_pref = pullback_log(&emission, &desc.obs_log_pref);
        let state_preference =
            Categorical::from_log_weights(&state_log_pref).expect("finite state log-preferences");
        let obs_preference =
            Categorical::from_log_weights(&desc.obs_log_pref).expect("finite obs log-preferences");
        let marginal: Vec<f64> = (0..no)
            .map(|o| {
                let terms: Vec<f64> = (0..ns).map(|s| emission[s][o] * state_preference.get(s)).collect();
                pairwise_sum(&terms)
            })
            .collect();
        let preferred_obs_marginal = Categorical::from_weights(marginal).expect("non-empty marginal");
        Ok(Self {
            n_states: ns,
            n_obs: no,
            n_actions: na,
            horizon: desc.horizon,
            emission,
            dynamics,
            initial_belief,
            preferences: LogPreferences {
                obs_log_pref: desc.obs_log_pref,
                state_log_pref: Some(state_log_pref),
            },
            state_preference,
            obs_preference,
            preferred_obs_marginal,
            labels: desc.labels,
        })
    }

    pub fn to_description(&self) -> ModelDescription {
        ModelDescription {
            n_states: self.n_states,
            n_obs: self.n_obs,
            n_actions: self.n_actions,
            horizon: self.horizon,
            likelihood: (0..self.n_obs)
                .map(|o| (0..self.n_states).map(|s| self.emission[s][o]).collect())
                .collect(),
            transitions: (0..self.n_actions)
                .map(|a| {
                    (0..self.n_states)
                        .map(|next| (0..self.n_states).map(|s| self.dynamics[a][s][next]).collect())
                        .collect()
                })
                .collect(),
            initial_belief: self.initial_belief.probs().to_vec(),
            obs_log_pref: self.preferences.obs_log_pref.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `P(o | s)`.
    pub fn likelihood(&self, obs: usize, state: usize) -> f64 {
        self.emission[state][obs]
    }

    /// The observation distribution emitted by `state`.
    pub fn emission(&self, state: usize) -> &[f64] {
        &self.emission[state]
    }

    /// `P(next | state, action)`.
    pub fn transition(&self, action: usize, next: usize, state: usize) -> f64 {
        self.dynamics[action][state][next]
    }

    /// The next-state distribution from `state` under `action`.
    pub fn successors(&self, action: usize, state: usize) -> &[f64] {
        &self.dynamics[action][state]
    }

    pub fn initial_belief(&self) -> &Categorical {
        &self.initial_belief
    }

    pub fn preferences(&self) -> &LogPreferences {
        &self.preferences
    }

    pub fn obs_log_pref(&self) -> &[f64] {
        &self.preferences.obs_log_pref
    }

    pub fn state_log_pref(&self) -> &[f64] {
        self.preferences
            .state_log_pref
            .as_deref()
            .expect("state preferences are derived at construction")
    }

    /// Preferred states, `∝ exp(state_log_pref)`.
    pub fn state_preference(&self) -> &Categorical {
        &self.state_preference
    }

    /// `∝ exp(obs_log_pref)`, the normalized observation preference as written.
    pub fn obs_preference(&self) -> &Categorical {
        &self.obs_preference
    }

    /// Observation marginal of the preference model: `Σ_s P(o|s) · P̃(s)`.
    ///
    /// This is the observation preference that is consistent with the shared
    /// likelihood, and the one the extrinsic value is measured against.
    pub fn preferred_obs_marginal(&self) -> &Categorical {
        &self.preferred_obs_marginal
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn state_label(&self, s: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.states.get(s).cloned())
            .unwrap_or_else(|| s.to_string())
    }

    pub fn obs_label(&self, o: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.observations.get(o).cloned())
            .unwrap_or_else(|| o.to_string())
    }

    pub fn action_label(&self, a: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.actions.get(a).cloned())
            .unwrap_or_else(|| a.to_string())
    }

    /// A copy with every observation log-preference shifted by `k`.
    pub fn with_shifted_preferences(&self, k: f64) -> Self {
        let mut desc = self.to_description();
        for c in &mut desc.obs_log_pref {
            *c += k;
        }
        Self::from_description(desc).expect("shift preserves validity")
    }

    /// A copy with a replacement likelihood, given as `likelihood[o][s]`.
    pub fn with_likelihood(&self, likelihood: Vec<Vec<f64>>) -> Result<Self, ValidationReport> {
        let mut desc = self.to_description();
        desc.likelihood = likelihood;
        Self::from_description(desc)
    }
}

/// Returns the state preference distribution obtained by pulling the
/// observation preferences back through the likelihood map.
pub fn pullback_preferences(model: &GenerativeModel) -> Categorical {
    model.state_preference().clone()
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, zero_chance: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < zero_chance {
                    0.0
                } else {
                    -(1.0 - rng.gen::<f64>()).ln()
                }
            })
            .collect();
        let sum: f64 = w.iter().sum();
        if sum > 0.0 {
            return w.into_iter().map(|x| x / sum).collect();
        }
    }
}

/// Draws a random valid model. Roughly one entry in five of every stochastic
/// vector is an exact zero, so sparse supports get exercised.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_obs: usize,
    n_actions: usize,
    horizon: usize,
) -> GenerativeModel {
    let columns: Vec<Vec<f64>> = (0..n_states).map(|_| random_simplex(rng, n_obs, 0.2)).collect();
    let likelihood = (0..n_obs)
        .map(|o| columns.iter().map(|col| col[o]).collect())
        .collect();
    let transitions = (0..n_actions)
        .map(|_| {
            let slices: Vec<Vec<f64>> = (0..n_states).map(|_| random_simplex(rng, n_states, 0.2)).collect();
            (0..n_states)
                .map(|next| slices.iter().map(|sl| sl[next]).collect())
                .collect()
        })
        .collect();
    let initial_belief = random_simplex(rng, n_states, 0.2);
    let obs_log_pref = (0..n_obs).map(|_| rng.gen_range(-4.0..4.0)).collect();
    GenerativeModel::from_description(ModelDescription {
        n_states,
        n_obs,
        n_actions,
        horizon,
        likelihood,
        transitions,
        initial_belief,
        obs_log_pref,
        labels: None,
    })
    .expect("random model is valid by construction")
}
