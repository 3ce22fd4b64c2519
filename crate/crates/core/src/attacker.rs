//! Victim-selection attackers trained with a sparsity prior, plus the
//! population diversity term.
//!
//! Actions are `0..n` (attack agent i) and `n` (null). The policy is
//! `v(a|s̄) ∝ p_ref(a)·exp(Q̄(s̄,a)/λ)` with `p_ref = (δ/n, …, δ/n, 1−δ)`.

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use romance_autodiff::{
    clip_grad_norm, log_sum_exp, softmax_rows, Activation, AutodiffError, BoundParams, Graph, Mlp, ParamSet, RmsProp,
    RmsPropConfig, Tensor, Var, CHECKPOINT_FORMAT_VERSION,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lpa::{AttackerObservation, Budget};

#[derive(Debug, thiserror::Error)]
pub enum AttackerError {
    #[error("delta {0} outside [0, 1]")]
    BadDelta(f64),
    #[error("lambda {0} must be positive")]
    BadLambda(f64),
    #[error("distributions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} distributions, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("one batch per population member expected ({members} members, {batches} batches)")]
    BatchCount { members: usize, batches: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerConfig {
    pub hidden: usize,
    pub lambda: f64,
    pub delta: f64,
    /// Mixing weight of the uniform distribution inside divergences.
    pub smoothing: f64,
    /// Weight of the diversity term in the population loss.
    pub alpha: f64,
    pub point_capacity: usize,
    pub diversity_samples: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_interval: usize,
    pub grad_clip: f64,
    pub optimizer: RmsPropConfig,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            lambda: 0.04,
            delta: 0.05,
            smoothing: 0.02,
            alpha: 0.1,
            point_capacity: 256,
            diversity_samples: 64,
            replay_capacity: 5000,
            batch_size: 256,
            target_interval: 200,
            grad_clip: 10.0,
            optimizer: RmsPropConfig::default(),
        }
    }
}

/// `(δ/n, …, δ/n, 1−δ)` over victims then null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    probs: Vec<f64>,
}

impl ReferenceDistribution {
    pub fn new(n_agents: usize, delta: f64) -> Result<Self, AttackerError> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(AttackerError::BadDelta(delta));
        }
        let mut probs = vec![delta / n_agents as f64; n_agents];
        probs.push(1.0 - delta);
        Ok(Self { probs })
    }

    pub fn from_probs(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `p_ref(a)·exp(Q̄(a)/λ) / Z`, max-subtracted.
pub fn victim_policy(q: &[f64], p_ref: &ReferenceDistribution, lambda: f64) -> Vec<f64> {
    let scaled = Tensor::row_vector(q.iter().map(|x| x / lambda).collect());
    softmax_rows(&scaled, Some(p_ref.probs())).into_vec()
}

/// `λ·log Σ_a p_ref(a)·exp(Q̄(a)/λ)`.
pub fn soft_value(q: &[f64], p_ref: &ReferenceDistribution, lambda: f64) -> f64 {
    let scaled: Vec<f64> = q.iter().map(|x| x / lambda).collect();
    lambda * log_sum_exp(&scaled, Some(p_ref.probs()))
}

/// `y = r̄ + γ·soft_value(Q̄⁻(s̄′))`, or `r̄` on terminal transitions.
pub fn sprq_target(
    reward: f64,
    next_q_target: &[f64],
    terminated: bool,
    gamma: f64,
    lambda: f64,
    p_ref: &ReferenceDistribution,
) -> f64 {
    if terminated {
        reward
    } else {
        reward + gamma * soft_value(next_q_target, p_ref, lambda)
    }
}

fn smooth(v: &[f64], b: f64) -> Vec<f64> {
    let u = 1.0 / v.len() as f64;
    v.iter().map(|p| (1.0 - b) * p + b * u).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Generalized JSD: mean KL of each smoothed distribution to their average.
pub fn jsd(distributions: &[Vec<f64>], smoothing: f64) -> Result<f64, AttackerError> {
    if distributions.len() < 2 {
        return Err(AttackerError::TooFew { needed: 2, got: distributions.len() });
    }
    let len = distributions[0].len();
    if let Some(d) = distributions.iter().find(|d| d.len() != len) {
        return Err(AttackerError::LengthMismatch(len, d.len()));
    }
    let smoothed: Vec<Vec<f64>> = distributions.iter().map(|d| smooth(d, smoothing)).collect();
    let n = smoothed.len() as f64;
    let mean: Vec<f64> = (0..len).map(|a| smoothed.iter().map(|d| d[a]).sum::<f64>() / n).collect();
    Ok((smoothed.iter().map(|d| kl(d, &mean)).sum::<f64>() / n).max(0.0))
}

/// FIFO of augmented states where the attacker chose a victim with budget left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPointBuffer {
    capacity: usize,
    points: VecDeque<AttackerObservation>,
}

impl AttackPointBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            points: VecDeque::new(),
        }
    }

    /// Stores `obs` if it is an attack point; returns whether it was stored.
    pub fn record(&mut self, obs: &AttackerObservation, victim: Option<usize>) -> bool {
        if victim.is_none() || obs.remaining == 0 {
            return false;
        }
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(obs.clone());
        true
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AttackerObservation> {
        self.points.iter()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.points {
            for v in &p.features {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update((p.remaining as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// One attacker-view transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackerTransition {
    pub features: Vec<f64>,
    /// Victim index, `n_agents` for null.
    pub action: usize,
    /// Negated ego reward.
    pub reward: f64,
    pub next_features: Vec<f64>,
    pub terminated: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AttackerReplay {
    capacity: usize,
    items: VecDeque<AttackerTransition>,
}

impl AttackerReplay {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn extend(&mut self, transitions: impl IntoIterator<Item = AttackerTransition>) {
        for t in transitions {
            if self.items.len() == self.capacity {
                self.items.pop_front();
            }
            self.items.push_back(t);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&AttackerTransition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

/// Inputs, taken actions and detached targets for one SPRQ step.
#[derive(Clone, Debug)]
pub struct AttackerBatch {
    pub features: Tensor,
    pub actions: Vec<usize>,
    pub targets: Tensor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AttackerCheckpoint {
    format_version: u32,
    n_agents: usize,
    config: AttackerConfig,
    net: Mlp,
    params: ParamSet,
    points: AttackPointBuffer,
}

#[derive(Clone, Debug)]
pub struct AttackerNetwork {
    n_agents: usize,
    config: AttackerConfig,
    p_ref: ReferenceDistribution,
    net: Mlp,
    params: ParamSet,
    target: ParamSet,
    optimizer: RmsProp,
    points: AttackPointBuffer,
    replay: AttackerReplay,
    since_sync: usize,
    updates: usize,
}

impl AttackerNetwork {
    /// `state_len` excludes the budget feature.
    pub fn new(n_agents: usize, state_len: usize, config: AttackerConfig, rng: &mut impl Rng) -> Result<Self, AttackerError> {
        if config.lambda <= 0.0 {
            return Err(AttackerError::BadLambda(config.lambda));
        }
        let p_ref = ReferenceDistribution::new(n_agents, config.delta)?;
        let mut params = ParamSet::new();
        let net = Mlp::new(
            &mut params,
            "attacker",
            &[state_len + 1, config.hidden, n_agents + 1],
            Activation::Relu,
            rng,
        );
        // zero output layer: the initial policy is exactly the prior
        for name in ["attacker.l1.weight", "attacker.l1.bias"] {
            let id = params.find(name).expect("output layer");
            let (r, c) = params.get(id).shape();
            params.set(id, Tensor::zeros(r, c))?;
        }
        Ok(Self {
            n_agents,
            p_ref,
            optimizer: RmsProp::new(config.optimizer, &params),
            target: params.clone(),
            points: AttackPointBuffer::new(config.point_capacity),
            replay: AttackerReplay::new(config.replay_capacity),
            config,
            net,
            params,
            since_sync: 0,
            updates: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn null_action(&self) -> usize {
        self.n_agents
    }

    pub fn config(&self) -> &AttackerConfig {
        &self.config
    }

    pub fn p_ref(&self) -> &ReferenceDistribution {
        &self.p_ref
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn digest(&self) -> String {
        self.params.digest()
    }

    pub fn points(&self) -> &AttackPointBuffer {
        &self.points
    }

    pub fn replay(&self) -> &AttackerReplay {
        &self.replay
    }

    pub fn replay_mut(&mut self) -> &mut AttackerReplay {
        &mut self.replay
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.config.lambda = lambda;
    }

    pub fn q_values(&self, features: &[f64]) -> Vec<f64> {
        self.net
            .forward_plain(&self.params, &Tensor::row_vector(features.to_vec()))
            .expect("feature width fixed at construction")
            .into_vec()
    }

    fn q_rows(&self, params: &ParamSet, rows: Tensor) -> Tensor {
        self.net.forward_plain(params, &rows).expect("feature width fixed at construction")
    }

    pub fn policy(&self, features: &[f64]) -> Vec<f64> {
        victim_policy(&self.q_values(features), &self.p_ref, self.config.lambda)
    }

    /// Policies for many observations at once, one row each.
    pub fn policies(&self, points: &Tensor) -> Tensor {
        let q = self.q_rows(&self.params, points.clone());
        softmax_rows(&q.map(|x| x / self.config.lambda), Some(self.p_ref.probs()))
    }

    /// Samples a victim and records the observation if it is an attack point.
    pub fn sample_victim(&mut self, obs: &AttackerObservation, rng: &mut impl Rng) -> Option<usize> {
        let victim = sample_from(&self.policy(&obs.features), self.n_agents, rng);
        self.points.record(obs, victim);
        victim
    }

    /// Detached SPRQ targets from the target network.
    pub fn prepare_batch(&self, transitions: &[&AttackerTransition], gamma: f64) -> Result<AttackerBatch, AttackerError> {
        if transitions.is_empty() {
            return Err(AttackerError::EmptyBatch);
        }
        let rows = |f: &dyn Fn(&AttackerTransition) -> &Vec<f64>| -> Result<Tensor, AttackerError> {
            Ok(Tensor::from_rows(&transitions.iter().map(|t| f(t).clone()).collect::<Vec<_>>())?)
        };
        let features = rows(&|t| &t.features)?;
        let next_q = self.q_rows(&self.target, rows(&|t| &t.next_features)?);
        let targets = transitions
            .iter()
            .enumerate()
            .map(|(i, t)| sprq_target(t.reward, next_q.row(i), t.terminated, gamma, self.config.lambda, &self.p_ref))
            .collect();
        Ok(AttackerBatch {
            features,
            actions: transitions.iter().map(|t| t.action).collect(),
            targets: Tensor::from_vec(transitions.len(), 1, targets)?,
        })
    }

    /// `mean (Q̄_φ(s̄, ā) − y)²`.
    pub fn sprq_loss(&self, g: &mut Graph, bound: &BoundParams, batch: &AttackerBatch) -> Result<Var, AttackerError> {
        let x = g.leaf(batch.features.clone());
        let q = self.net.forward(g, bound, x)?;
        let chosen = g.gather(q, &batch.actions);
        let y = g.leaf(batch.targets.clone());
        let err = g.sub(chosen, y);
        let sq = g.square(err);
        Ok(g.mean(sq))
    }

    /// Smoothed policy rows `(1−b)·v + b/|Ā|` at `points`.
    fn smoothed_policy_graph(&self, g: &mut Graph, bound: &BoundParams, points: Var) -> Result<Var, AttackerError> {
        let q = self.net.forward(g, bound, points)?;
        let scaled = g.scale(q, 1.0 / self.config.lambda);
        let v = g.weighted_softmax(scaled, self.p_ref.probs());
        let b = self.config.smoothing;
        let v = g.scale(v, 1.0 - b);
        Ok(g.add_scalar(v, b / (self.n_agents + 1) as f64))
    }

    fn apply(&mut self, grads: Vec<Tensor>) -> Result<(), AttackerError> {
        let mut grads = grads;
        if self.config.grad_clip > 0.0 {
            clip_grad_norm(&mut grads, self.config.grad_clip);
        }
        self.optimizer.step(&mut self.params, &grads)?;
        self.updates += 1;
        self.since_sync += 1;
        if self.since_sync >= self.config.target_interval {
            self.sync_target();
        }
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
        self.since_sync = 0;
    }

    /// One SPRQ-only update; returns the loss.
    pub fn sprq_step(&mut self, batch: &AttackerBatch) -> Result<f64, AttackerError> {
        let mut g = Graph::new();
        let bound = g.bind(&self.params);
        let loss = self.sprq_loss(&mut g, &bound, batch)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?.for_params(&bound);
        self.apply(grads)?;
        Ok(value)
    }

    pub fn to_json(&self) -> Result<String, AttackerError> {
        Ok(serde_json::to_string(&AttackerCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            n_agents: self.n_agents,
            config: self.config.clone(),
            net: self.net.clone(),
            params: self.params.clone(),
            points: self.points.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, AttackerError> {
        let c: AttackerCheckpoint = serde_json::from_str(text)?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(AutodiffError::UnsupportedVersion(c.format_version).into());
        }
        if !c.params.all_finite() {
            return Err(AttackerError::Checkpoint("non-finite parameters".into()));
        }
        Ok(Self {
            p_ref: ReferenceDistribution::new(c.n_agents, c.config.delta)?,
            optimizer: RmsProp::new(c.config.optimizer, &c.params),
            target: c.params.clone(),
            replay: AttackerReplay::new(c.config.replay_capacity),
            n_agents: c.n_agents,
            config: c.config,
            net: c.net,
            params: c.params,
            points: c.points,
            since_sync: 0,
            updates: 0,
        })
    }
}

fn sample_from(probs: &[f64], null: usize, rng: &mut impl Rng) -> Option<usize> {
    let a = WeightedIndex::new(probs).expect("valid distribution").sample(rng);
    (a != null).then_some(a)
}

/// Observations stacked into rows.
pub fn points_tensor(points: &[&AttackerObservation]) -> Option<Tensor> {
    if points.is_empty() {
        return None;
    }
    Some(Tensor::from_rows(&points.iter().map(|p| p.features.clone()).collect::<Vec<_>>()).expect("equal widths"))
}

/// Up to `n` points drawn uniformly without replacement from the union of buffers.
pub fn sample_attack_points<'a>(
    buffers: &[&'a AttackPointBuffer],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<&'a AttackerObservation> {
    let all: Vec<&AttackerObservation> = buffers.iter().flat_map(|b| b.iter()).collect();
    let k = n.min(all.len());
    rand::seq::index::sample(rng, all.len(), k).into_iter().map(|i| all[i]).collect()
}

/// Mean JSD of the members' policies over `points` (0 when fewer than two
/// members or no points).
pub fn diversity_loss(members: &[&AttackerNetwork], points: &[&AttackerObservation]) -> f64 {
    if members.len() < 2 || points.is_empty() {
        return 0.0;
    }
    let b = members[0].config.smoothing;
    let rows = points_tensor(points).expect("nonempty");
    let pols: Vec<Tensor> = members.iter().map(|m| m.policies(&rows)).collect();
    let total: f64 = (0..points.len())
        .map(|r| {
            let dists: Vec<Vec<f64>> = pols.iter().map(|p| p.row(r).to_vec()).collect();
            jsd(&dists, b).expect("equal lengths")
        })
        .sum();
    total / points.len() as f64
}

/// Graph form of [`diversity_loss`] with one bound parameter set per member.
pub fn diversity_loss_graph(
    g: &mut Graph,
    bounds: &[BoundParams],
    members: &[&AttackerNetwork],
    points: &Tensor,
) -> Result<Var, AttackerError> {
    let n_p = members.len();
    let x = g.leaf(points.clone());
    let mut us = Vec::with_capacity(n_p);
    for (m, b) in members.iter().zip(bounds) {
        us.push(m.smoothed_policy_graph(g, b, x)?);
    }
    let mut sum = us[0];
    for &u in &us[1..] {
        sum = g.add(sum, u);
    }
    let mean = g.scale(sum, 1.0 / n_p as f64);
    let log_mean = g.log(mean);
    let mut total = None;
    for &u in &us {
        let log_u = g.log(u);
        let diff = g.sub(log_u, log_mean);
        let prod = g.mul(u, diff);
        let s = g.sum(prod);
        total = Some(match total {
            None => s,
            Some(t) => g.add(t, s),
        });
    }
    Ok(g.scale(total.expect("nonempty population"), 1.0 / (n_p * points.rows()) as f64))
}

/// `(1/n_p)·Σ_j L_sprq(φ_j) − α·L_div`, built over one bound set per member.
/// Returns the loss and whether the diversity term was evaluated.
pub fn population_loss_graph(
    g: &mut Graph,
    bounds: &[BoundParams],
    members: &[&AttackerNetwork],
    batches: &[AttackerBatch],
    points: Option<&Tensor>,
    alpha: f64,
) -> Result<(Var, bool), AttackerError> {
    if batches.len() != members.len() {
        return Err(AttackerError::BatchCount { members: members.len(), batches: batches.len() });
    }
    let mut total = None;
    for ((m, b), batch) in members.iter().zip(bounds).zip(batches) {
        let l = m.sprq_loss(g, b, batch)?;
        total = Some(match total {
            None => l,
            Some(t) => g.add(t, l),
        });
    }
    let mean = g.scale(total.ok_or(AttackerError::EmptyBatch)?, 1.0 / members.len() as f64);
    match points {
        Some(p) if alpha != 0.0 && members.len() >= 2 => {
            let div = diversity_loss_graph(g, bounds, members, p)?;
            let weighted = g.scale(div, -alpha);
            Ok((g.add(mean, weighted), true))
        }
        _ => Ok((mean, false)),
    }
}

/// Joint update of every member on the population loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationStep {
    pub loss: f64,
    pub diversity_evaluated: bool,
}

pub fn population_step(
    members: &mut [AttackerNetwork],
    batches: &[AttackerBatch],
    points: Option<&Tensor>,
    alpha: f64,
) -> Result<PopulationStep, AttackerError> {
    let (value, diversity_evaluated, grads) = {
        let refs: Vec<&AttackerNetwork> = members.iter().collect();
        let mut g = Graph::new();
        let bounds: Vec<BoundParams> = refs.iter().map(|m| g.bind(&m.params)).collect();
        let (loss, div) = population_loss_graph(&mut g, &bounds, &refs, batches, points, alpha)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?;
        let per: Vec<Vec<Tensor>> = bounds.iter().map(|b| grads.for_params(b)).collect();
        (value, div, per)
    };
    for (m, g) in members.iter_mut().zip(grads) {
        m.apply(g)?;
    }
    Ok(PopulationStep { loss: value, diversity_evaluated })
}

/// What an adversary sees when choosing a victim.
pub struct AttackContext<'a> {
    pub state: &'a [f64],
    pub budget: Budget,
    pub tabular_state: Option<usize>,
}

pub trait Adversary {
    fn n_agents(&self) -> usize;
    fn choose(&mut self, ctx: &AttackContext, rng: &mut dyn rand::RngCore) -> Option<usize>;

    /// Parameter digest for learned adversaries.
    fn digest(&self) -> Option<String> {
        None
    }
}

pub struct NullAdversary {
    pub n_agents: usize,
}

impl Adversary for NullAdversary {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn choose(&mut self, _ctx: &AttackContext, _rng: &mut dyn rand::RngCore) -> Option<usize> {
        None
    }
}

/// Attacks with a fixed per-step probability, uniform victim, while budget lasts.
pub struct RandomAdversary {
    pub n_agents: usize,
    pub rate: f64,
}

impl RandomAdversary {
    /// Rate `K/T`, so about `K` attacks are attempted over a full-length episode.
    pub fn for_budget(n_agents: usize, capacity: usize, episode_limit: usize) -> Self {
        Self {
            n_agents,
            rate: (capacity as f64 / episode_limit as f64).min(1.0),
        }
    }
}

impl Adversary for RandomAdversary {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn choose(&mut self, ctx: &AttackContext, rng: &mut dyn rand::RngCore) -> Option<usize> {
        if ctx.budget.remaining() == 0 || rng.gen::<f64>() >= self.rate {
            return None;
        }
        Some(rng.gen_range(0..self.n_agents))
    }
}

impl Adversary for AttackerNetwork {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn choose(&mut self, ctx: &AttackContext, rng: &mut dyn rand::RngCore) -> Option<usize> {
        let obs = crate::lpa::attacker_view(ctx.state, ctx.budget);
        let mut rng = rng;
        self.sample_victim(&obs, &mut rng)
    }

    fn digest(&self) -> Option<String> {
        Some(AttackerNetwork::digest(self))
    }
}

/// A victim-selection table over augmented tabular states `(s, k)`.
pub struct TabularAdversary {
    pub n_agents: usize,
    pub capacity: usize,
    /// `policy[augmented_index(s, k)]` over victims then null.
    pub policy: Vec<Vec<f64>>,
}

impl Adversary for TabularAdversary {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn choose(&mut self, ctx: &AttackContext, rng: &mut dyn rand::RngCore) -> Option<usize> {
        let s = ctx.tabular_state.expect("tabular adversary needs a tabular environment");
        let row = &self.policy[crate::oracle::augmented_index(s, ctx.budget.remaining(), self.capacity)];
        let mut rng = rng;
        sample_from(row, self.n_agents, &mut rng)
    }
}
