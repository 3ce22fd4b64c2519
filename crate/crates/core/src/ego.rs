//! Value-decomposition team learner: a shared utility network over history
//! windows, VDN or QMIX mixing, episodic replay and a lagging target copy.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use romance_autodiff::{
    clip_grad_norm, Activation, AutodiffError, BoundParams, Graph, Mlp, ParamSet, RmsProp, RmsPropConfig, Tensor, Var,
    CHECKPOINT_FORMAT_VERSION,
};
use serde::{Deserialize, Serialize};

use crate::env::{EnvObservation, EnvSpec, History};
use crate::lpa::masked_argmax;

#[derive(Debug, thiserror::Error)]
pub enum EgoError {
    #[error("unknown mixer `{0}` (expected vdn or qmix)")]
    UnknownMixer(String),
    #[error("agent {0} has no available action")]
    EmptyMask(usize),
    #[error("epsilon {0} outside [0, 1]")]
    BadEpsilon(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerMode {
    Vdn,
    Qmix,
}

impl FromStr for MixerMode {
    type Err = EgoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vdn" => Ok(MixerMode::Vdn),
            "qmix" => Ok(MixerMode::Qmix),
            other => Err(EgoError::UnknownMixer(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoConfig {
    pub mixer: MixerMode,
    pub hidden: usize,
    pub mixer_embed: usize,
    pub window: usize,
    pub optimizer: RmsPropConfig,
    pub target_interval: usize,
    pub batch_episodes: usize,
    pub buffer_episodes: usize,
    pub grad_clip: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of all training episodes over which epsilon is annealed.
    pub epsilon_anneal_fraction: f64,
}

impl Default for EgoConfig {
    fn default() -> Self {
        Self {
            mixer: MixerMode::Qmix,
            hidden: 64,
            mixer_embed: 32,
            window: 4,
            optimizer: RmsPropConfig::default(),
            target_interval: 200,
            batch_episodes: 32,
            buffer_episodes: 2000,
            grad_clip: 10.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_fraction: 0.1,
        }
    }
}

/// Linear anneal from `start` to `end` over `anneal_episodes`, then flat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
}

impl EpsilonSchedule {
    pub fn new(config: &EgoConfig, total_episodes: usize) -> Self {
        Self {
            start: config.epsilon_start,
            end: config.epsilon_end,
            anneal_episodes: ((total_episodes as f64 * config.epsilon_anneal_fraction).round() as usize).max(1),
        }
    }

    pub fn value(&self, episode: usize) -> f64 {
        let frac = (episode as f64 / self.anneal_episodes as f64).min(1.0);
        self.start * (1.0 - frac) + self.end * frac
    }
}

/// Per-agent history windows turned into utility-network inputs.
#[derive(Clone, Debug)]
pub struct AgentInputs {
    histories: Vec<History>,
    n_actions: usize,
}

impl AgentInputs {
    pub fn new(spec: &EnvSpec, window: usize) -> Self {
        Self {
            histories: (0..spec.n_agents)
                .map(|_| History::new(window, spec.obs_len, spec.n_actions))
                .collect(),
            n_actions: spec.n_actions,
        }
    }

    pub fn input_len(spec: &EnvSpec, window: usize) -> usize {
        window * (spec.obs_len + spec.n_actions) + spec.n_agents
    }

    pub fn reset(&mut self, obs: &EnvObservation) {
        for (h, o) in self.histories.iter_mut().zip(&obs.observations) {
            h.clear();
            h.push(o, None);
        }
    }

    /// Records the new observations with the actions the agents chose.
    pub fn push(&mut self, observations: &[Vec<f64>], chosen: &[usize]) {
        for ((h, o), &a) in self.histories.iter_mut().zip(observations).zip(chosen) {
            h.push(o, Some(a));
        }
        debug_assert!(chosen.iter().all(|&a| a < self.n_actions));
    }

    /// History features followed by the agent one-hot, per agent.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        let n = self.histories.len();
        self.histories
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut x = h.features();
                x.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                x
            })
            .collect()
    }
}

/// Epsilon-greedy: with probability `epsilon` a uniform available action,
/// otherwise the first available argmax.
pub fn select_actions(
    qs: &[Vec<f64>],
    masks: &[Vec<bool>],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, EgoError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(EgoError::BadEpsilon(epsilon));
    }
    qs.iter()
        .zip(masks)
        .enumerate()
        .map(|(i, (q, m))| {
            let available: Vec<usize> = (0..m.len()).filter(|&a| m[a]).collect();
            if available.is_empty() {
                return Err(EgoError::EmptyMask(i));
            }
            if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                Ok(available[rng.gen_range(0..available.len())])
            } else {
                Ok(masked_argmax(q, m).expect("nonempty mask"))
            }
        })
        .collect()
}

/// Anything that yields per-agent Q-vectors for the current tick.
pub trait EgoPolicy {
    /// `inputs` are the per-agent utility inputs; `tabular_state` is set for
    /// environments with an explicit model.
    fn q_values(&self, inputs: &[Vec<f64>], tabular_state: Option<usize>) -> Vec<Vec<f64>>;

    /// Length of the observation history the inputs should carry.
    fn history_window(&self) -> usize {
        1
    }
}

impl EgoPolicy for crate::lpa::TabularEgo {
    fn q_values(&self, _inputs: &[Vec<f64>], tabular_state: Option<usize>) -> Vec<Vec<f64>> {
        let s = tabular_state.expect("tabular ego needs a tabular environment");
        crate::lpa::TabularEgo::q_values(self, s).to_vec()
    }
}

/// One ego-view episode: `T+1` inputs/states/masks around `T` transitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub states: Vec<Vec<f64>>,
    pub masks: Vec<Vec<Vec<bool>>>,
    /// Chosen (not executed) joint actions.
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    /// True only for real terminals, not for the step cap.
    pub terminated: Vec<bool>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            episodes: VecDeque::new(),
        }
    }

    pub fn push(&mut self, episode: EpisodeRecord) {
        if episode.is_empty() {
            return;
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Uniform sample of distinct episodes (all of them if fewer are stored).
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&EpisodeRecord> {
        let n = n.min(self.episodes.len());
        sample(rng, self.episodes.len(), n)
            .into_iter()
            .map(|i| &self.episodes[i])
            .collect()
    }
}

/// Single-layer hypernetworks producing the mixing weights from the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Qmix {
    w1: Mlp,
    b1: Mlp,
    w2: Mlp,
    b2: Mlp,
    embed: usize,
}

/// Flattened transitions with detached TD targets.
#[derive(Clone, Debug)]
pub struct TdBatch {
    /// `(transitions · n_agents) × input_len`, agent-major within a transition.
    pub inputs: Tensor,
    pub actions: Vec<usize>,
    pub states: Tensor,
    pub targets: Tensor,
}

impl TdBatch {
    pub fn transitions(&self) -> usize {
        self.states.rows()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EgoCheckpoint {
    format_version: u32,
    config: EgoConfig,
    n_agents: usize,
    n_actions: usize,
    input_len: usize,
    state_len: usize,
    agent: Mlp,
    mixer: Option<Qmix>,
    params: ParamSet,
}

#[derive(Clone, Debug)]
pub struct EgoNetwork {
    config: EgoConfig,
    n_agents: usize,
    n_actions: usize,
    input_len: usize,
    state_len: usize,
    agent: Mlp,
    mixer: Option<Qmix>,
    params: ParamSet,
    target: ParamSet,
    optimizer: RmsProp,
    since_sync: usize,
    updates: usize,
    syncs: usize,
}

impl EgoNetwork {
    pub fn new(spec: &EnvSpec, config: EgoConfig, rng: &mut impl Rng) -> Self {
        let input_len = AgentInputs::input_len(spec, config.window);
        let mut params = ParamSet::new();
        let agent = Mlp::new(
            &mut params,
            "agent",
            &[input_len, config.hidden, spec.n_actions],
            Activation::Relu,
            rng,
        );
        let mixer = match config.mixer {
            MixerMode::Vdn => None,
            MixerMode::Qmix => {
                let s = spec.state_len;
                let e = config.mixer_embed;
                let mut layer = |name: &str, out: usize| Mlp::new(&mut params, name, &[s, out], Activation::Identity, rng);
                Some(Qmix {
                    w1: layer("mixer.hyper_w1", spec.n_agents * e),
                    b1: layer("mixer.hyper_b1", e),
                    w2: layer("mixer.hyper_w2", e),
                    b2: layer("mixer.hyper_b2", 1),
                    embed: e,
                })
            }
        };
        let optimizer = RmsProp::new(config.optimizer, &params);
        Self {
            target: params.clone(),
            config,
            n_agents: spec.n_agents,
            n_actions: spec.n_actions,
            input_len,
            state_len: spec.state_len,
            agent,
            mixer,
            params,
            optimizer,
            since_sync: 0,
            updates: 0,
            syncs: 0,
        }
    }

    pub fn config(&self) -> &EgoConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn target_params(&self) -> &ParamSet {
        &self.target
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn syncs(&self) -> usize {
        self.syncs
    }

    pub fn updates_since_sync(&self) -> usize {
        self.since_sync
    }

    pub fn digest(&self) -> String {
        self.params.digest()
    }

    pub fn mixer_mode(&self) -> MixerMode {
        self.config.mixer
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    fn agent_qs_plain(&self, params: &ParamSet, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let x = Tensor::from_rows(inputs).expect("equal-length inputs");
        let out = self.agent.forward_plain(params, &x).expect("input width checked at construction");
        (0..out.rows()).map(|r| out.row(r).to_vec()).collect()
    }

    /// Online utilities for one tick.
    pub fn q_values(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.agent_qs_plain(&self.params, inputs)
    }

    /// `batch × n_agents` chosen utilities and `batch × state_len` states to `batch × 1`.
    pub fn mix_graph(&self, g: &mut Graph, bound: &BoundParams, agent_qs: Var, states: Var) -> Result<Var, EgoError> {
        match &self.mixer {
            None => Ok(g.sum_rows(agent_qs)),
            Some(m) => {
                let w1 = m.w1.forward(g, bound, states)?;
                let w1 = g.abs(w1);
                let b1 = m.b1.forward(g, bound, states)?;
                let h = g.batched_vecmat(agent_qs, w1, m.embed);
                let h = g.add(h, b1);
                let h = g.relu(h);
                let w2 = m.w2.forward(g, bound, states)?;
                let w2 = g.abs(w2);
                let b2 = m.b2.forward(g, bound, states)?;
                let out = g.batched_vecmat(h, w2, 1);
                Ok(g.add(out, b2))
            }
        }
    }

    fn mix_with(&self, params: &ParamSet, agent_qs: &Tensor, states: &Tensor) -> Tensor {
        let mut g = Graph::new();
        let bound = g.bind(params);
        let q = g.leaf(agent_qs.clone());
        let s = g.leaf(states.clone());
        let out = self.mix_graph(&mut g, &bound, q, s).expect("shapes fixed at construction");
        g.value(out).clone()
    }

    /// `Q_tot` of one state from per-agent chosen utilities (online parameters).
    pub fn mix(&self, agent_qs: &[f64], state: &[f64]) -> f64 {
        let q = Tensor::row_vector(agent_qs.to_vec());
        let s = Tensor::row_vector(state.to_vec());
        self.mix_with(&self.params, &q, &s).data()[0]
    }

    /// Flattens episodes and computes `y = r + γ·(1 − terminated)·Q_tot⁻(s′, argmax⁻)`.
    pub fn prepare_batch(&self, episodes: &[&EpisodeRecord], gamma: f64) -> Result<TdBatch, EgoError> {
        let n = self.n_agents;
        let total: usize = episodes.iter().map(|e| e.len()).sum();
        if total == 0 {
            return Err(EgoError::EmptyBatch);
        }
        let mut inputs = Vec::with_capacity(total * n * self.input_len);
        let mut next_inputs = Vec::with_capacity(total * n * self.input_len);
        let mut states = Vec::with_capacity(total * self.state_len);
        let mut next_states = Vec::with_capacity(total * self.state_len);
        let mut actions = Vec::with_capacity(total * n);
        let mut next_masks = Vec::with_capacity(total * n);
        let mut rewards = Vec::with_capacity(total);
        let mut terminated = Vec::with_capacity(total);
        for ep in episodes {
            for t in 0..ep.len() {
                for i in 0..n {
                    inputs.extend_from_slice(&ep.inputs[t][i]);
                    next_inputs.extend_from_slice(&ep.inputs[t + 1][i]);
                    next_masks.push(&ep.masks[t + 1][i]);
                }
                states.extend_from_slice(&ep.states[t]);
                next_states.extend_from_slice(&ep.states[t + 1]);
                actions.extend_from_slice(&ep.actions[t]);
                rewards.push(ep.rewards[t]);
                terminated.push(ep.terminated[t]);
            }
        }
        let next_inputs = Tensor::from_vec(total * n, self.input_len, next_inputs)?;
        let next_q = self.agent.forward_plain(&self.target, &next_inputs)?;
        let best: Vec<f64> = (0..total * n)
            .map(|r| {
                let row = next_q.row(r);
                masked_argmax(row, next_masks[r]).map_or(0.0, |a| row[a])
            })
            .collect();
        let next_states = Tensor::from_vec(total, self.state_len, next_states)?;
        let next_tot = self.mix_with(&self.target, &Tensor::from_vec(total, n, best)?, &next_states);
        let targets = (0..total)
            .map(|b| {
                let boot = if terminated[b] { 0.0 } else { gamma * next_tot.data()[b] };
                rewards[b] + boot
            })
            .collect();
        Ok(TdBatch {
            inputs: Tensor::from_vec(total * n, self.input_len, inputs)?,
            actions,
            states: Tensor::from_vec(total, self.state_len, states)?,
            targets: Tensor::from_vec(total, 1, targets)?,
        })
    }

    /// Mean squared TD error of `batch` under the bound online parameters.
    pub fn td_loss(&self, g: &mut Graph, bound: &BoundParams, batch: &TdBatch) -> Result<Var, EgoError> {
        let x = g.leaf(batch.inputs.clone());
        let q = self.agent.forward(g, bound, x)?;
        let chosen = g.gather(q, &batch.actions);
        let chosen = g.reshape(chosen, batch.transitions(), self.n_agents);
        let s = g.leaf(batch.states.clone());
        let tot = self.mix_graph(g, bound, chosen, s)?;
        let y = g.leaf(batch.targets.clone());
        let err = g.sub(tot, y);
        let sq = g.square(err);
        Ok(g.mean(sq))
    }

    /// One optimizer step on `batch`; returns the pre-step loss.
    pub fn train_step(&mut self, batch: &TdBatch) -> Result<f64, EgoError> {
        let mut g = Graph::new();
        let bound = g.bind(&self.params);
        let loss = self.td_loss(&mut g, &bound, batch)?;
        let value = g.value(loss).data()[0];
        let mut grads = g.backward(loss)?.for_params(&bound);
        if self.config.grad_clip > 0.0 {
            clip_grad_norm(&mut grads, self.config.grad_clip);
        }
        self.optimizer.step(&mut self.params, &grads)?;
        self.updates += 1;
        self.since_sync += 1;
        if self.since_sync >= self.config.target_interval {
            self.sync_target();
        }
        Ok(value)
    }

    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
        self.since_sync = 0;
        self.syncs += 1;
    }

    pub fn to_json(&self) -> Result<String, EgoError> {
        Ok(serde_json::to_string(&EgoCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            n_agents: self.n_agents,
            n_actions: self.n_actions,
            input_len: self.input_len,
            state_len: self.state_len,
            agent: self.agent.clone(),
            mixer: self.mixer.clone(),
            params: self.params.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, EgoError> {
        let c: EgoCheckpoint = serde_json::from_str(text)?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(AutodiffError::UnsupportedVersion(c.format_version).into());
        }
        if !c.params.all_finite() {
            return Err(EgoError::Checkpoint("non-finite parameters".into()));
        }
        if c.mixer.is_some() != (c.config.mixer == MixerMode::Qmix) {
            return Err(EgoError::Checkpoint("mixer tag does not match mixer parameters".into()));
        }
        Ok(Self {
            optimizer: RmsProp::new(c.config.optimizer, &c.params),
            target: c.params.clone(),
            config: c.config,
            n_agents: c.n_agents,
            n_actions: c.n_actions,
            input_len: c.input_len,
            state_len: c.state_len,
            agent: c.agent,
            mixer: c.mixer,
            params: c.params,
            since_sync: 0,
            updates: 0,
            syncs: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EgoError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EgoError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl EgoPolicy for EgoNetwork {
    fn q_values(&self, inputs: &[Vec<f64>], _tabular_state: Option<usize>) -> Vec<Vec<f64>> {
        EgoNetwork::q_values(self, inputs)
    }

    fn history_window(&self) -> usize {
        self.config.window
    }
}
