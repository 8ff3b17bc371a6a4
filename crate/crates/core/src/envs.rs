//! Environments the agent acts in, and the T-Maze.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::model::{GenerativeModel, Labels, ModelDescription};

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub observation: usize,
    pub done: bool,
}

/// The external process as the harness sees it.
pub trait Environment: Send {
    fn n_observations(&self) -> usize;

    fn n_actions(&self) -> usize;

    /// Starts a new episode whose hidden randomness comes from `seed` only.
    /// Returns the first observation.
    fn reset(&mut self, seed: u64) -> usize;

    fn step(&mut self, action: usize) -> Result<Step, EnvError>;

    /// The current hidden state. Logging only.
    fn ground_truth(&self) -> Option<usize>;

    /// Short label for the episode's hidden context, for reports.
    fn context_label(&self) -> String {
        self.ground_truth().map_or_else(|| "-".into(), |s| s.to_string())
    }

    /// Scores a complete episode.
    fn score(&self, observations: &[usize], actions: &[usize]) -> Result<f64, EnvError>;
}

/// Named environment selection plus parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub name: String,
    #[serde(default)]
    pub overrides: tmaze::TMazeParams,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            name: "tmaze".into(),
            overrides: tmaze::TMazeParams::default(),
        }
    }
}

/// A constructed environment with its paired model and default reward vector.
pub struct EnvironmentBundle {
    pub model: GenerativeModel,
    pub reward_per_obs: Vec<f64>,
    factory: Box<dyn Fn() -> Box<dyn Environment> + Send + Sync>,
}

impl EnvironmentBundle {
    /// A fresh, independent environment instance.
    pub fn instantiate(&self) -> Box<dyn Environment> {
        (self.factory)()
    }
}

pub fn build_environment(config: &EnvironmentConfig) -> Result<EnvironmentBundle, EnvError> {
    match config.name.as_str() {
        "tmaze" | "t-maze" => {
            let params = config.overrides;
            Ok(EnvironmentBundle {
                model: tmaze::tmaze_model(&params),
                reward_per_obs: params.reward_per_obs(),
                factory: Box::new(move || Box::new(tmaze::TMaze::new(params))),
            })
        }
        other => Err(EnvError::UnknownEnvironment(other.to_string())),
    }
}

pub mod tmaze {
    //! Four locations (middle, top-left, top-right, bottom) crossed with two
    //! contexts (reward on the left or on the right). The agent starts in the
    //! middle, sees a context-revealing cue at the bottom, and is absorbed by
    //! whichever top arm it enters.
    //!
    //! State index is `2 * location + context`.

    use super::*;

    pub const N_LOCATIONS: usize = 4;
    pub const N_CONTEXTS: usize = 2;
    pub const N_STATES: usize = N_LOCATIONS * N_CONTEXTS;
    pub const N_OBS: usize = 7;
    pub const N_ACTIONS: usize = 4;
    /// Decisions per trial; timesteps run `0..=HORIZON`.
    pub const HORIZON: usize = 2;

    pub const MIDDLE: usize = 0;
    pub const TOP_LEFT: usize = 1;
    pub const TOP_RIGHT: usize = 2;
    pub const BOTTOM: usize = 3;

    pub const REWARD_LEFT: usize = 0;
    pub const REWARD_RIGHT: usize = 1;

    pub const OBS_MIDDLE: usize = 0;
    pub const OBS_LEFT_REWARD: usize = 1;
    pub const OBS_LEFT_PUNISH: usize = 2;
    pub const OBS_RIGHT_REWARD: usize = 3;
    pub const OBS_RIGHT_PUNISH: usize = 4;
    pub const OBS_CUE_BLACK: usize = 5;
    pub const OBS_CUE_WHITE: usize = 6;

    pub const LOCATION_NAMES: [&str; N_LOCATIONS] = ["middle", "top-left", "top-right", "bottom"];
    pub const CONTEXT_NAMES: [&str; N_CONTEXTS] = ["reward-left", "reward-right"];
    pub const OBS_NAMES: [&str; N_OBS] = [
        "middle-null",
        "left-reward",
        "left-punish",
        "right-reward",
        "right-punish",
        "cue-black",
        "cue-white",
    ];

    /// Preference strength and trajectory payoffs.
    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct TMazeParams {
        /// Log-preference of reward observations; punishments get its negation.
        pub preference_magnitude: f64,
        /// Score when the reward is reached on the first move.
        pub direct_reward: f64,
        /// Score when the reward is reached on the second move after the cue.
        pub cue_reward: f64,
        /// Score when any punishment is observed.
        pub punishment: f64,
    }

    impl Default for TMazeParams {
        fn default() -> Self {
            Self {
                preference_magnitude: 6.0,
                direct_reward: 10.0,
                cue_reward: 5.0,
                punishment: -10.0,
            }
        }
    }

    impl TMazeParams {
        pub fn obs_log_pref(&self) -> Vec<f64> {
            let m = self.preference_magnitude;
            vec![0.0, m, -m, m, -m, 0.0, 0.0]
        }

        /// Per-observation reward used by the reward-maximizing agents: the
        /// preference log-values themselves.
        pub fn reward_per_obs(&self) -> Vec<f64> {
            self.obs_log_pref()
        }
    }

    pub fn state_index(location: usize, context: usize) -> usize {
        2 * location + context
    }

    /// `(location, context)` of a state index.
    pub fn decode(state: usize) -> (usize, usize) {
        (state / 2, state % 2)
    }

    /// Top arms are absorbing; from anywhere else the action names the destination.
    pub fn next_location(location: usize, action: usize) -> usize {
        match location {
            TOP_LEFT | TOP_RIGHT => location,
            _ => action,
        }
    }

    pub fn emit(location: usize, context: usize) -> usize {
        match (location, context) {
            (MIDDLE, _) => OBS_MIDDLE,
            (TOP_LEFT, REWARD_LEFT) => OBS_LEFT_REWARD,
            (TOP_LEFT, _) => OBS_LEFT_PUNISH,
            (TOP_RIGHT, REWARD_RIGHT) => OBS_RIGHT_REWARD,
            (TOP_RIGHT, _) => OBS_RIGHT_PUNISH,
            (_, REWARD_LEFT) => OBS_CUE_BLACK,
            _ => OBS_CUE_WHITE,
        }
    }

    pub fn is_reward(obs: usize) -> bool {
        matches!(obs, OBS_LEFT_REWARD | OBS_RIGHT_REWARD)
    }

    pub fn is_punishment(obs: usize) -> bool {
        matches!(obs, OBS_LEFT_PUNISH | OBS_RIGHT_PUNISH)
    }

    pub fn is_cue(obs: usize) -> bool {
        matches!(obs, OBS_CUE_BLACK | OBS_CUE_WHITE)
    }

    /// The agent's generative model of the maze: deterministic emissions and
    /// moves, starting in the middle with both contexts equally likely.
    pub fn tmaze_model(params: &TMazeParams) -> GenerativeModel {
        let mut likelihood = vec![vec![0.0; N_STATES]; N_OBS];
        let mut transitions = vec![vec![vec![0.0; N_STATES]; N_STATES]; N_ACTIONS];
        for s in 0..N_STATES {
            let (loc, ctx) = decode(s);
            likelihood[emit(loc, ctx)][s] = 1.0;
            for (a, matrix) in transitions.iter_mut().enumerate() {
                matrix[state_index(next_location(loc, a), ctx)][s] = 1.0;
            }
        }
        let mut initial_belief = vec![0.0; N_STATES];
        initial_belief[state_index(MIDDLE, REWARD_LEFT)] = 0.5;
        initial_belief[state_index(MIDDLE, REWARD_RIGHT)] = 0.5;
        let states = (0..N_STATES)
            .map(|s| {
                let (loc, ctx) = decode(s);
                format!("{}/{}", LOCATION_NAMES[loc], CONTEXT_NAMES[ctx])
            })
            .collect();
        GenerativeModel::from_description(ModelDescription {
            n_states: N_STATES,
            n_obs: N_OBS,
            n_actions: N_ACTIONS,
            horizon: HORIZON,
            likelihood,
            transitions,
            initial_belief,
            obs_log_pref: params.obs_log_pref(),
            labels: Some(Labels {
                states,
                observations: OBS_NAMES.iter().map(|s| s.to_string()).collect(),
                actions: LOCATION_NAMES.iter().map(|s| format!("go-{s}")).collect(),
            }),
        })
        .expect("T-Maze model is valid by construction")
    }

    /// One deterministic transition and emission.
    pub fn tmaze_step(state: usize, action: usize) -> (usize, usize) {
        let (loc, ctx) = decode(state);
        let next = next_location(loc, action);
        (state_index(next, ctx), emit(next, ctx))
    }

    /// Trial score: `direct_reward` when the reward is seen at `t = 1`,
    /// `cue_reward` when it is first seen at `t = 2` right after a cue,
    /// `punishment` when any punishment is seen, zero otherwise. Absorbed
    /// repeats count once.
    pub fn score_trajectory(params: &TMazeParams, observations: &[usize], actions: &[usize]) -> Result<f64, EnvError> {
        if observations.len() != HORIZON + 1 || actions.len() != HORIZON {
            return Err(EnvError::MalformedTrajectory(format!(
                "expected {} observations and {HORIZON} actions, got {} and {}",
                HORIZON + 1,
                observations.len(),
                actions.len()
            )));
        }
        if let Some(&o) = observations.iter().find(|&&o| o >= N_OBS) {
            return Err(EnvError::MalformedTrajectory(format!("observation {o} out of range")));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= N_ACTIONS) {
            return Err(EnvError::MalformedTrajectory(format!("action {a} out of range")));
        }
        let score = if observations.iter().any(|&o| is_punishment(o)) {
            params.punishment
        } else if is_reward(observations[1]) {
            params.direct_reward
        } else if is_cue(observations[1]) && is_reward(observations[2]) {
            params.cue_reward
        } else {
            0.0
        };
        Ok(score)
    }

    /// The maze itself, mirroring [`tmaze_model`] exactly.
    #[derive(Debug, Clone)]
    pub struct TMaze {
        params: TMazeParams,
        state: Option<usize>,
        t: usize,
    }

    impl TMaze {
        pub fn new(params: TMazeParams) -> Self {
            Self {
                params,
                state: None,
                t: 0,
            }
        }

        pub fn context(&self) -> Option<usize> {
            self.state.map(|s| decode(s).1)
        }
    }

    impl Environment for TMaze {
        fn n_observations(&self) -> usize {
            N_OBS
        }

        fn n_actions(&self) -> usize {
            N_ACTIONS
        }

        fn reset(&mut self, seed: u64) -> usize {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let context = if rng.gen::<f64>() < 0.5 { REWARD_LEFT } else { REWARD_RIGHT };
            self.state = Some(state_index(MIDDLE, context));
            self.t = 0;
            emit(MIDDLE, context)
        }

        fn step(&mut self, action: usize) -> Result<Step, EnvError> {
            let state = self.state.ok_or(EnvError::NotReset)?;
            if self.t >= HORIZON {
                return Err(EnvError::StepAfterDone);
            }
            if action >= N_ACTIONS {
                return Err(EnvError::InvalidAction {
                    action,
                    n_actions: N_ACTIONS,
                });
            }
            let (next, observation) = tmaze_step(state, action);
            self.state = Some(next);
            self.t += 1;
            Ok(Step {
                observation,
                done: self.t == HORIZON,
            })
        }

        fn ground_truth(&self) -> Option<usize> {
            self.state
        }

        fn context_label(&self) -> String {
            self.context().map_or_else(|| "-".into(), |c| CONTEXT_NAMES[c].to_string())
        }

        fn score(&self, observations: &[usize], actions: &[usize]) -> Result<f64, EnvError> {
            score_trajectory(&self.params, observations, actions)
        }
    }

}
