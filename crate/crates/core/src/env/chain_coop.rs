//! Two agents on a short corridor; the team is paid once both stand on the
//! last cell at the same time. Small enough to enumerate exactly.

use serde::{Deserialize, Serialize};

use super::{check_actions, EnvError, EnvObservation, EnvSpec, Environment, StepInfo, StepResult, TabularEnv};
use crate::oracle::{Outcome, TabularMDP};

pub const LEFT: usize = 0;
pub const STAY: usize = 1;
pub const RIGHT: usize = 2;
const N_ACTIONS: usize = 3;
const TABULAR_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainCoopConfig {
    pub length: usize,
    pub n_agents: usize,
    pub episode_limit: usize,
}

impl Default for ChainCoopConfig {
    fn default() -> Self {
        Self {
            length: 5,
            n_agents: 2,
            episode_limit: 12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainCoop {
    config: ChainCoopConfig,
    spec: EnvSpec,
    positions: Vec<usize>,
    t: usize,
    done: bool,
}

impl ChainCoop {
    pub fn new(config: ChainCoopConfig) -> Result<Self, EnvError> {
        if config.length < 2 || config.n_agents == 0 || config.episode_limit == 0 {
            return Err(EnvError::Config("length ≥ 2, n_agents ≥ 1, episode_limit ≥ 1".into()));
        }
        let state_len = config.length * config.n_agents;
        let spec = EnvSpec {
            n_agents: config.n_agents,
            n_actions: N_ACTIONS,
            obs_len: state_len,
            state_len,
            episode_limit: config.episode_limit,
            reward_scale: 1.0,
            default_gamma: 0.95,
        };
        Ok(Self {
            positions: vec![0; config.n_agents],
            config,
            spec,
            t: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &ChainCoopConfig {
        &self.config
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn goal(&self) -> usize {
        self.config.length - 1
    }

    /// Number of non-terminal tabular states; the terminal state has this index.
    pub fn n_positions(&self) -> usize {
        self.config.length.pow(self.config.n_agents as u32)
    }

    pub fn terminal_index(&self) -> usize {
        self.n_positions()
    }

    pub fn n_joint_actions(&self) -> usize {
        N_ACTIONS.pow(self.config.n_agents as u32)
    }

    /// Agent 0 is the most significant digit: `p0·L + p1` for two agents.
    pub fn encode_positions(&self, positions: &[usize]) -> usize {
        positions.iter().fold(0, |acc, &p| acc * self.config.length + p)
    }

    pub fn decode_positions(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.config.n_agents];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.config.length;
            rest /= self.config.length;
        }
        out
    }

    /// Agent 0 is the least significant digit: `Σ aᵢ·3ⁱ`.
    pub fn encode_joint_action(&self, actions: &[usize]) -> usize {
        actions.iter().rev().fold(0, |acc, &a| acc * N_ACTIONS + a)
    }

    pub fn decode_joint_action(&self, index: usize) -> Vec<usize> {
        let mut rest = index;
        (0..self.config.n_agents)
            .map(|_| {
                let a = rest % N_ACTIONS;
                rest /= N_ACTIONS;
                a
            })
            .collect()
    }

    fn moved(&self, p: usize, a: usize) -> usize {
        match a {
            LEFT => p.saturating_sub(1),
            RIGHT => (p + 1).min(self.goal()),
            _ => p,
        }
    }

    /// Deterministic successor of a non-terminal position tuple:
    /// `(next positions, reward, terminal)`.
    pub fn transition(&self, positions: &[usize], actions: &[usize]) -> (Vec<usize>, f64, bool) {
        let next: Vec<usize> = positions
            .iter()
            .zip(actions)
            .map(|(&p, &a)| self.moved(p, a))
            .collect();
        let won = next.iter().all(|&p| p == self.goal());
        (next, if won { 1.0 } else { 0.0 }, won)
    }

    /// Every action is always available; walls turn moves into stays.
    pub fn masks(&self) -> Vec<Vec<bool>> {
        vec![vec![true; N_ACTIONS]; self.config.n_agents]
    }

    pub fn state(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.spec.state_len];
        if !self.done || self.positions.iter().any(|&p| p != self.goal()) {
            for (i, &p) in self.positions.iter().enumerate() {
                s[i * self.config.length + p] = 1.0;
            }
        }
        s
    }

    /// Explicit infinite-horizon MDP over joint positions plus one absorbing
    /// terminal state. The episode cap is not part of the tabular model.
    pub fn enumerate_tabular(&self, gamma: f64) -> Result<TabularMDP, EnvError> {
        let n_pos = self.n_positions();
        if n_pos + 1 > TABULAR_LIMIT {
            return Err(EnvError::StateSpaceOverflow {
                states: n_pos + 1,
                limit: TABULAR_LIMIT,
            });
        }
        let n_joint = self.n_joint_actions();
        let terminal = self.terminal_index();
        let mut outcomes = Vec::with_capacity((n_pos + 1) * n_joint);
        for s in 0..=n_pos {
            for ja in 0..n_joint {
                if s == terminal {
                    outcomes.push(vec![Outcome { next: terminal, prob: 1.0, reward: 0.0 }]);
                    continue;
                }
                let (next, reward, done) = self.transition(&self.decode_positions(s), &self.decode_joint_action(ja));
                let next = if done { terminal } else { self.encode_positions(&next) };
                outcomes.push(vec![Outcome { next, prob: 1.0, reward }]);
            }
        }
        let mut is_terminal = vec![false; n_pos + 1];
        is_terminal[terminal] = true;
        let mut initial = vec![0.0; n_pos + 1];
        initial[0] = 1.0;
        TabularMDP::new(n_pos + 1, n_joint, outcomes, is_terminal, initial, gamma)
            .map_err(|e| EnvError::Config(e.to_string()))
    }
}

impl Environment for ChainCoop {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> EnvObservation {
        self.positions = vec![0; self.config.n_agents];
        self.t = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        check_actions(&self.masks(), actions)?;
        let (next, reward, won) = self.transition(&self.positions, actions);
        self.positions = next;
        self.t += 1;
        let capped = self.t >= self.config.episode_limit;
        self.done = won || capped;
        let obs = self.observe();
        Ok(StepResult {
            state: obs.state,
            observations: obs.observations,
            masks: obs.masks,
            reward,
            done: self.done,
            info: StepInfo {
                kills: 0,
                damage: 0.0,
                won,
                timed_out: capped && !won,
            },
        })
    }

    fn observe(&self) -> EnvObservation {
        let state = self.state();
        EnvObservation {
            observations: vec![state.clone(); self.config.n_agents],
            state,
            masks: self.masks(),
        }
    }

    fn tabular_state(&self) -> Option<usize> {
        if self.done && self.positions.iter().all(|&p| p == self.goal()) {
            Some(self.terminal_index())
        } else {
            Some(self.encode_positions(&self.positions))
        }
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }

    fn as_tabular(&self) -> Option<&dyn TabularEnv> {
        Some(self)
    }
}

impl TabularEnv for ChainCoop {
    fn enumerate_tabular(&self, gamma: f64) -> Result<TabularMDP, EnvError> {
        ChainCoop::enumerate_tabular(self, gamma)
    }

    fn state_masks(&self, _state: usize) -> Vec<Vec<bool>> {
        self.masks()
    }

    fn encode_joint_action(&self, actions: &[usize]) -> usize {
        ChainCoop::encode_joint_action(self, actions)
    }

    fn decode_joint_action(&self, index: usize) -> Vec<usize> {
        ChainCoop::decode_joint_action(self, index)
    }
}
