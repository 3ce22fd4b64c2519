//! Cooperative Dec-POMDP environments behind one interface.

pub mod chain_coop;
mod history;
pub mod micro_battle;

use serde::{Deserialize, Serialize};

pub use chain_coop::{ChainCoop, ChainCoopConfig};
pub use history::History;
pub use micro_battle::{Direction, EnemyAction, MicroBattle, MicroBattleConfig, Unit};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("agent {agent} chose unavailable action {action}")]
    UnavailableAction { agent: usize, action: usize },
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("tabular state space of {states} states exceeds the limit of {limit}")]
    StateSpaceOverflow { states: usize, limit: usize },
    #[error("invalid environment config: {0}")]
    Config(String),
}

/// Static shape of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_len: usize,
    pub state_len: usize,
    pub episode_limit: usize,
    pub reward_scale: f64,
    /// Discount used when the training config does not set one.
    pub default_gamma: f64,
}

/// What every agent sees after `reset` or `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvObservation {
    pub state: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub kills: usize,
    pub damage: f64,
    pub won: bool,
    /// Episode ended only because the step cap was reached.
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn observation(&self) -> EnvObservation {
        EnvObservation {
            state: self.state.clone(),
            observations: self.observations.clone(),
            masks: self.masks.clone(),
        }
    }

    /// Terminal for bootstrapping purposes (the cap is not a true terminal).
    pub fn terminated(&self) -> bool {
        self.done && !self.info.timed_out
    }
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, seed: u64) -> EnvObservation;
    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError>;
    fn observe(&self) -> EnvObservation;
    /// Index of the current state for tabular environments.
    fn tabular_state(&self) -> Option<usize> {
        None
    }
    fn boxed_clone(&self) -> Box<dyn Environment>;
    /// Explicit model access for environments small enough to enumerate.
    fn as_tabular(&self) -> Option<&dyn TabularEnv> {
        None
    }
}

/// Exact model of a finite environment with joint-action indexing.
pub trait TabularEnv {
    fn enumerate_tabular(&self, gamma: f64) -> Result<crate::oracle::TabularMDP, EnvError>;
    fn state_masks(&self, state: usize) -> Vec<Vec<bool>>;
    fn encode_joint_action(&self, actions: &[usize]) -> usize;
    fn decode_joint_action(&self, index: usize) -> Vec<usize>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    MicroBattle(MicroBattleConfig),
    ChainCoop(ChainCoopConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::MicroBattle(MicroBattleConfig::default())
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            EnvConfig::MicroBattle(c) => Box::new(MicroBattle::new(c.clone())?),
            EnvConfig::ChainCoop(c) => Box::new(ChainCoop::new(c.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::MicroBattle(_) => "micro_battle",
            EnvConfig::ChainCoop(_) => "chain_coop",
        }
    }
}

pub(crate) fn check_actions(masks: &[Vec<bool>], actions: &[usize]) -> Result<(), EnvError> {
    if actions.len() != masks.len() {
        return Err(EnvError::WrongActionCount {
            expected: masks.len(),
            got: actions.len(),
        });
    }
    for (agent, (&action, mask)) in actions.iter().zip(masks).enumerate() {
        if !mask.get(action).copied().unwrap_or(false) {
            return Err(EnvError::UnavailableAction { agent, action });
        }
    }
    Ok(())
}

/// One trace record per tick, for JSON-lines export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub state: Vec<f64>,
    pub chosen: Vec<usize>,
    pub executed: Vec<usize>,
    pub victim: Option<usize>,
    pub reward: f64,
    pub budget: usize,
    pub done: bool,
}
