//! Budget-limited action perturbation around any [`Environment`].
//!
//! An attack is a victim choice (an agent or null). A non-null victim with
//! budget left has its action replaced by the worst available action under
//! its own Q-values. Budget is spent on every non-null victim choice made
//! with `k > 0`, including the rare case where the forced action equals the
//! chosen one; both counters are kept.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EnvObservation, Environment, StepResult, TraceRecord};
use crate::oracle::{augmented_index, Outcome, OracleError, TabularMDP};

#[derive(Debug, thiserror::Error)]
pub enum LpaError {
    #[error("victim {victim} out of range for {n_agents} agents")]
    VictimOutOfRange { victim: usize, n_agents: usize },
    #[error("expected Q-values for {expected} agents, got {got}")]
    QShape { expected: usize, got: usize },
    #[error("agent {0} has no available action")]
    EmptyMask(usize),
    #[error("environment has no tabular model")]
    NotTabular,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    capacity: usize,
    remaining: usize,
}

impl Budget {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            remaining: capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn reset(&mut self) {
        self.remaining = self.capacity;
    }

    /// Spends one unit if any is left.
    pub fn spend(&mut self) -> bool {
        if self.remaining > 0 {
            self.remaining -= 1;
            true
        } else {
            false
        }
    }

    /// `k/K`, defined as 0 when `K = 0`.
    pub fn fraction(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            self.remaining as f64 / self.capacity as f64
        }
    }
}

/// First index of the largest available entry.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if ok && best.map_or(true, |b| v > q[b]) {
            best = Some(a);
        }
    }
    best
}

/// First index of the smallest available entry.
pub fn masked_argmin(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if ok && best.map_or(true, |b| v < q[b]) {
            best = Some(a);
        }
    }
    best
}

/// The executed joint action for a victim choice.
pub fn perturb(
    victim: Option<usize>,
    joint: &[usize],
    qs: &[Vec<f64>],
    masks: &[Vec<bool>],
    k: usize,
) -> Result<Vec<usize>, LpaError> {
    let mut executed = joint.to_vec();
    let Some(v) = victim else {
        return Ok(executed);
    };
    if v >= joint.len() {
        return Err(LpaError::VictimOutOfRange { victim: v, n_agents: joint.len() });
    }
    if k == 0 {
        return Ok(executed);
    }
    if qs.len() != joint.len() {
        return Err(LpaError::QShape { expected: joint.len(), got: qs.len() });
    }
    executed[v] = masked_argmin(&qs[v], &masks[v]).ok_or(LpaError::EmptyMask(v))?;
    Ok(executed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpaStepRecord {
    pub chosen: Vec<usize>,
    pub victim: Option<usize>,
    pub executed: Vec<usize>,
    pub budget_before: usize,
    pub budget_after: usize,
    pub result: StepResult,
}

impl LpaStepRecord {
    pub fn attacked(&self) -> bool {
        self.budget_after < self.budget_before
    }

    pub fn perturbed(&self) -> bool {
        self.chosen != self.executed
    }
}

/// Per-episode attack counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackCounters {
    /// Non-null victim choices that spent budget.
    pub issued: usize,
    /// Steps where the executed joint action differed from the chosen one.
    pub perturbed: usize,
}

pub struct LpaEnv {
    env: Box<dyn Environment>,
    budget: Budget,
    counters: AttackCounters,
    trace: Option<Vec<TraceRecord>>,
    t: usize,
}

impl LpaEnv {
    pub fn new(env: Box<dyn Environment>, capacity: usize) -> Self {
        Self {
            env,
            budget: Budget::new(capacity),
            counters: AttackCounters::default(),
            trace: None,
            t: 0,
        }
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        self.budget = Budget::new(capacity);
    }

    pub fn counters(&self) -> AttackCounters {
        self.counters
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn reset(&mut self, seed: u64) -> EnvObservation {
        self.budget.reset();
        self.counters = AttackCounters::default();
        self.t = 0;
        if let Some(trace) = &mut self.trace {
            trace.clear();
        }
        self.env.reset(seed)
    }

    pub fn observe(&self) -> EnvObservation {
        self.env.observe()
    }

    pub fn lpa_step(&mut self, joint: &[usize], victim: Option<usize>, qs: &[Vec<f64>]) -> Result<LpaStepRecord, LpaError> {
        let masks = self.env.observe().masks;
        let before = self.budget.remaining();
        let executed = perturb(victim, joint, qs, &masks, before)?;
        let result = self.env.step(&executed)?;
        if victim.is_some() {
            self.budget.spend();
        }
        let record = LpaStepRecord {
            chosen: joint.to_vec(),
            victim,
            executed,
            budget_before: before,
            budget_after: self.budget.remaining(),
            result,
        };
        if record.attacked() {
            self.counters.issued += 1;
        }
        if record.perturbed() {
            self.counters.perturbed += 1;
        }
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord {
                t: self.t,
                state: record.result.state.clone(),
                chosen: record.chosen.clone(),
                executed: record.executed.clone(),
                victim,
                reward: record.result.reward,
                budget: record.budget_after,
                done: record.result.done,
            });
        }
        self.t += 1;
        Ok(record)
    }
}

/// Writes one JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[TraceRecord], mut writer: W) -> Result<(), LpaError> {
    for r in trace {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackerObservation {
    pub features: Vec<f64>,
    pub remaining: usize,
    pub capacity: usize,
}

pub fn attacker_view(state: &[f64], budget: Budget) -> AttackerObservation {
    let mut features = Vec::with_capacity(state.len() + 1);
    features.extend_from_slice(state);
    features.push(budget.fraction());
    AttackerObservation {
        features,
        remaining: budget.remaining(),
        capacity: budget.capacity(),
    }
}

/// Ego utilities per tabular state: `q[state][agent][action]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularEgo {
    pub q: Vec<Vec<Vec<f64>>>,
}

impl TabularEgo {
    pub fn q_values(&self, state: usize) -> &[Vec<f64>] {
        &self.q[state]
    }

    pub fn greedy(&self, state: usize, masks: &[Vec<bool>]) -> Vec<usize> {
        self.q[state]
            .iter()
            .zip(masks)
            .map(|(q, m)| masked_argmax(q, m).expect("every agent has an available action"))
            .collect()
    }
}

/// The attacker's MDP over `(s, k)` with actions `0..n` (victims) and `n`
/// (null). Rewards are the negated ego rewards of the executed action, and
/// budget follows the wrapper's spending rule.
pub fn build_attacker_mdp(env: &dyn Environment, ego: &TabularEgo, capacity: usize, gamma: f64) -> Result<TabularMDP, LpaError> {
    let tab = env.as_tabular().ok_or(LpaError::NotTabular)?;
    let base = tab.enumerate_tabular(gamma)?;
    let n_agents = env.spec().n_agents;
    let n_bar = n_agents + 1;
    let n_states = base.n_states() * (capacity + 1);
    let mut outcomes = Vec::with_capacity(n_states * n_bar);
    let mut terminal = vec![false; n_states];
    let mut initial = vec![0.0; n_states];
    for s in 0..base.n_states() {
        initial[augmented_index(s, capacity, capacity)] = base.initial()[s];
        let masks = tab.state_masks(s);
        let chosen = if base.is_terminal(s) { None } else { Some(ego.greedy(s, &masks)) };
        for k in 0..=capacity {
            let idx = augmented_index(s, k, capacity);
            terminal[idx] = base.is_terminal(s);
            for bar_a in 0..n_bar {
                let Some(chosen) = &chosen else {
                    outcomes.push(vec![Outcome { next: idx, prob: 1.0, reward: 0.0 }]);
                    continue;
                };
                let victim = (bar_a < n_agents).then_some(bar_a);
                let executed = perturb(victim, chosen, ego.q_values(s), &masks, k)?;
                let k_next = if victim.is_some() && k > 0 { k - 1 } else { k };
                let row = base
                    .outcomes(s, tab.encode_joint_action(&executed))
                    .iter()
                    .map(|o| Outcome {
                        next: augmented_index(o.next, k_next, capacity),
                        prob: o.prob,
                        reward: -o.reward,
                    })
                    .collect();
                outcomes.push(row);
            }
        }
    }
    Ok(TabularMDP::new(n_states, n_bar, outcomes, terminal, initial, gamma)?)
}
