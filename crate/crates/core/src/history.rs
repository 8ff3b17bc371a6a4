//! Observed history `(o_0..o_t, a_1..a_t)` and candidate future action
//! sequences.

use serde::{Deserialize, Serialize};

use crate::error::InferenceError;
use crate::model::GenerativeModel;

/// What the agent has seen and done so far. The observation at `t = 0`
/// precedes the first action, so there is always one more observation than
/// action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    observations: Vec<usize>,
    actions: Vec<usize>,
}

impl History {
    pub fn new(observations: Vec<usize>, actions: Vec<usize>) -> Result<Self, InferenceError> {
        if observations.is_empty() {
            return Err(InferenceError::InvalidHistory(
                "at least the initial observation is required".into(),
            ));
        }
        if actions.len() + 1 != observations.len() {
            return Err(InferenceError::InvalidHistory(format!(
                "{} observations need {} actions, got {}",
                observations.len(),
                observations.len() - 1,
                actions.len()
            )));
        }
        Ok(Self {
            observations,
            actions,
        })
    }

    pub fn initial(observation: usize) -> Self {
        Self {
            observations: vec![observation],
            actions: vec![],
        }
    }

    /// Records one executed action and the observation that followed it.
    pub fn push(&mut self, action: usize, observation: usize) {
        self.actions.push(action);
        self.observations.push(observation);
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// The current timestep `t`.
    pub fn time(&self) -> usize {
        self.observations.len() - 1
    }

    pub fn check(&self, model: &GenerativeModel) -> Result<(), InferenceError> {
        if self.time() > model.horizon() {
            return Err(InferenceError::InvalidHistory(format!(
                "history reaches t = {}, beyond the horizon {}",
                self.time(),
                model.horizon()
            )));
        }
        if let Some(&o) = self.observations.iter().find(|&&o| o >= model.n_obs()) {
            return Err(InferenceError::InvalidHistory(format!(
                "observation {o} out of range for {} observations",
                model.n_obs()
            )));
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= model.n_actions()) {
            return Err(InferenceError::InvalidHistory(format!(
                "action {a} out of range for {} actions",
                model.n_actions()
            )));
        }
        Ok(())
    }
}

/// A candidate sequence of future actions `a_{t+1}..a_T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    pub fn empty() -> Self {
        Self { actions: vec![] }
    }

    pub fn first_action(&self) -> Option<usize> {
        self.actions.first().copied()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks that the policy covers exactly the remaining horizon after
    /// `history`, with valid action indices.
    pub fn check(&self, model: &GenerativeModel, history: &History) -> Result<(), InferenceError> {
        let remaining = model.horizon().saturating_sub(history.time());
        if self.actions.len() != remaining {
            return Err(InferenceError::InvalidPolicy(format!(
                "policy has {} actions, remaining horizon is {remaining}",
                self.actions.len()
            )));
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= model.n_actions()) {
            return Err(InferenceError::InvalidPolicy(format!(
                "action {a} out of range for {} actions",
                model.n_actions()
            )));
        }
        Ok(())
    }
}

impl From<Vec<usize>> for Policy {
    fn from(actions: Vec<usize>) -> Self {
        Self { actions }
    }
}
