//! Exact dynamic programming over small explicit MDPs.

use std::io::Write;

use romance_autodiff::log_sum_exp;
use serde::{Deserialize, Serialize};

const MAX_ITERATIONS: usize = 1_000_000;
const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance used by [`policy_evaluation`].
pub const EVAL_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Sparse `P[s][a][s′]` and `R[s][a][s′]`: each `(s, a)` row lists the
/// successors with nonzero probability. Terminal states are absorbing with
/// value 0 and are never backed up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMDP {
    n_states: usize,
    n_actions: usize,
    outcomes: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
    initial: Vec<f64>,
    gamma: f64,
}

impl TabularMDP {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        outcomes: Vec<Vec<Outcome>>,
        terminal: Vec<bool>,
        initial: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, OracleError> {
        let bad = |m: String| Err(OracleError::InvalidMdp(m));
        if n_states == 0 || n_actions == 0 {
            return bad("empty state or action set".into());
        }
        if outcomes.len() != n_states * n_actions {
            return bad(format!("{} outcome rows for {}×{}", outcomes.len(), n_states, n_actions));
        }
        if terminal.len() != n_states || initial.len() != n_states {
            return bad("terminal mask or initial distribution has wrong length".into());
        }
        if !(0.0..1.0).contains(&gamma) {
            return bad(format!("gamma {gamma} outside [0, 1)"));
        }
        for (row, list) in outcomes.iter().enumerate() {
            let mut total = 0.0;
            for o in list {
                if o.next >= n_states || !o.prob.is_finite() || o.prob < 0.0 || !o.reward.is_finite() {
                    return bad(format!("row {row} has an invalid outcome {o:?}"));
                }
                total += o.prob;
            }
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return bad(format!("row (s={}, a={}) sums to {total}", row / n_actions, row % n_actions));
            }
        }
        let init_total: f64 = initial.iter().sum();
        if (init_total - 1.0).abs() > ROW_SUM_TOL || initial.iter().any(|&p| p < 0.0) {
            return bad(format!("initial distribution sums to {init_total}"));
        }
        Ok(Self {
            n_states,
            n_actions,
            outcomes,
            terminal,
            initial,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.outcomes[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Dense transition probability, summing duplicate successors.
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.outcomes(s, a).iter().filter(|o| o.next == next).map(|o| o.prob).sum()
    }

    /// `Σ_{s′} P(s′|s,a)·(R(s,a,s′) + γ·V(s′))`.
    pub fn q_value(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        self.outcomes(s, a)
            .iter()
            .map(|o| o.prob * (o.reward + self.gamma * values[o.next]))
            .sum()
    }

    pub fn q_table(&self, values: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| self.q_value(s, a, values)).collect())
            .collect()
    }

    /// Expected value under the initial distribution.
    pub fn initial_value(&self, values: &[f64]) -> f64 {
        self.initial.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.outcomes
            .iter()
            .flatten()
            .map(|o| o.reward.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    /// Greedy action per state (0 for terminal states).
    pub policy: Vec<usize>,
    /// Sup-norm change of every sweep.
    pub residuals: Vec<f64>,
}

impl ValueTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), OracleError> {
        #[derive(Serialize)]
        struct Row {
            state: usize,
            value: f64,
            greedy_action: usize,
        }
        let mut w = csv::Writer::from_writer(writer);
        for (state, (&value, &greedy_action)) in self.values.iter().zip(&self.policy).enumerate() {
            w.serialize(Row { state, value, greedy_action })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftValueTable {
    pub values: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// `p_ref(a)·exp((Q(s,a) − V(s))/λ)` per state.
    pub policy: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs synchronous sweeps of `backup` until the sup-norm change drops below `tol`.
fn iterate<F>(mdp: &TabularMDP, tol: f64, mut backup: F) -> Result<(Vec<f64>, Vec<f64>), OracleError>
where
    F: FnMut(usize, &[f64]) -> f64,
{
    let mut values = vec![0.0; mdp.n_states];
    let mut residuals = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let next: Vec<f64> = (0..mdp.n_states)
            .map(|s| if mdp.terminal[s] { 0.0 } else { backup(s, &values) })
            .collect();
        let r = sup_diff(&next, &values);
        values = next;
        residuals.push(r);
        if r < tol {
            return Ok((values, residuals));
        }
    }
    Err(OracleError::NotConverged {
        iterations: MAX_ITERATIONS,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Optimal (maximizing) values; greedy ties go to the lowest action index.
pub fn value_iteration(mdp: &TabularMDP, tol: f64) -> Result<ValueTable, OracleError> {
    let (values, residuals) = iterate(mdp, tol, |s, v| {
        (0..mdp.n_actions)
            .map(|a| mdp.q_value(s, a, v))
            .fold(f64::NEG_INFINITY, f64::max)
    })?;
    let policy = (0..mdp.n_states)
        .map(|s| {
            if mdp.terminal[s] {
                0
            } else {
                argmax(&(0..mdp.n_actions).map(|a| mdp.q_value(s, a, &values)).collect::<Vec<_>>())
            }
        })
        .collect();
    Ok(ValueTable { values, policy, residuals })
}

/// Fixed point of `V(s) = λ·log Σ_a p_ref(a)·exp(Q(s,a)/λ)`.
pub fn soft_value_iteration(
    mdp: &TabularMDP,
    p_ref: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<SoftValueTable, OracleError> {
    if p_ref.len() != mdp.n_actions {
        return Err(OracleError::InvalidPolicy(format!(
            "reference distribution has {} entries for {} actions",
            p_ref.len(),
            mdp.n_actions
        )));
    }
    if lambda <= 0.0 {
        return Err(OracleError::InvalidPolicy(format!("lambda {lambda} must be positive")));
    }
    let soft = |q: &[f64]| {
        let scaled: Vec<f64> = q.iter().map(|x| x / lambda).collect();
        lambda * log_sum_exp(&scaled, Some(p_ref))
    };
    let (values, residuals) = iterate(mdp, tol, |s, v| {
        let q: Vec<f64> = (0..mdp.n_actions).map(|a| mdp.q_value(s, a, v)).collect();
        soft(&q)
    })?;
    let q = mdp.q_table(&values);
    let policy = q
        .iter()
        .enumerate()
        .map(|(s, qs)| {
            // the terminal "value" of 0 is not a soft maximum, so renormalize from Q
            let v = if mdp.terminal[s] { soft(qs) } else { values[s] };
            qs.iter()
                .zip(p_ref)
                .map(|(qa, p)| p * ((qa - v) / lambda).exp())
                .collect()
        })
        .collect();
    Ok(SoftValueTable { values, q, policy, residuals })
}

/// Value of a fixed stochastic policy (`policy[s][a]`), iterated to [`EVAL_TOL`].
pub fn policy_evaluation(mdp: &TabularMDP, policy: &[Vec<f64>]) -> Result<ValueTable, OracleError> {
    if policy.len() != mdp.n_states {
        return Err(OracleError::InvalidPolicy(format!(
            "{} rows for {} states",
            policy.len(),
            mdp.n_states
        )));
    }
    for (s, row) in policy.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if row.len() != mdp.n_actions || row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(OracleError::InvalidPolicy(format!("row {s} is not a distribution")));
        }
    }
    let (values, residuals) = iterate(mdp, EVAL_TOL, |s, v| {
        policy[s]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, &p)| p * mdp.q_value(s, a, v))
            .sum()
    })?;
    let greedy = policy.iter().map(|row| argmax(row)).collect();
    Ok(ValueTable { values, policy: greedy, residuals })
}

/// Sup-norm distance between `values` and one more optimal backup.
pub fn bellman_residual(mdp: &TabularMDP, values: &[f64]) -> f64 {
    (0..mdp.n_states)
        .filter(|&s| !mdp.terminal[s])
        .map(|s| {
            let best = (0..mdp.n_actions)
                .map(|a| mdp.q_value(s, a, values))
                .fold(f64::NEG_INFINITY, f64::max);
            (best - values[s]).abs()
        })
        .fold(0.0, f64::max)
}

pub fn deterministic_policy(n_actions: usize, actions: &[usize]) -> Vec<Vec<f64>> {
    actions
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

/// A stochastic attacker on a base MDP whose actions are joint ego actions:
/// the distribution over executed joint actions `â` at `(s, k)` when the ego
/// chose `a`. Entries with `â ≠ a` spend one unit of budget.
pub trait JointAdversary {
    fn executed(&self, s: usize, k: usize, chosen: usize) -> Vec<(usize, f64)>;
}

/// Index of `(s, k)` in the budget-augmented state space.
pub fn augmented_index(s: usize, k: usize, budget: usize) -> usize {
    s * (budget + 1) + k
}

/// The two augmented MDPs compared by the under-attack lower bound, both over
/// states `(s, k)` and joint ego actions, with `k′ = k − I(â ≠ a)`.
///
/// The first (`exact`) is the attacked system itself: reward `R(s, â, s′)`.
/// The second (`surrogate`) pays `Σ_{â′≠a} π_adv(â′)·R(s, â′, s′)` on every
/// attacked branch in place of `R(s, â, s′)`.
pub struct UnderAttackPair {
    pub exact: TabularMDP,
    pub surrogate: TabularMDP,
}

pub fn under_attack_mdps(
    base: &TabularMDP,
    budget: usize,
    adversary: &dyn JointAdversary,
) -> Result<UnderAttackPair, OracleError> {
    let n_aug = base.n_states * (budget + 1);
    let n_act = base.n_actions;
    let mut exact = Vec::with_capacity(n_aug * n_act);
    let mut surrogate = Vec::with_capacity(n_aug * n_act);
    let mut terminal = vec![false; n_aug];
    let mut initial = vec![0.0; n_aug];
    for s in 0..base.n_states {
        initial[augmented_index(s, budget, budget)] = base.initial[s];
        for k in 0..=budget {
            terminal[augmented_index(s, k, budget)] = base.terminal[s];
            for a in 0..n_act {
                let dist = if base.terminal[s] { vec![(a, 1.0)] } else { adversary.executed(s, k, a) };
                let mut ex = Vec::new();
                let mut sur = Vec::new();
                for &(hat, p) in &dist {
                    if p == 0.0 {
                        continue;
                    }
                    let attacked = hat != a;
                    if attacked && k == 0 {
                        return Err(OracleError::InvalidPolicy(format!(
                            "adversary perturbs at zero budget (s={s}, a={a})"
                        )));
                    }
                    let k_next = if attacked { k - 1 } else { k };
                    for o in base.outcomes(s, hat) {
                        let next = augmented_index(o.next, k_next, budget);
                        ex.push(Outcome { next, prob: p * o.prob, reward: o.reward });
                        let reward = if attacked {
                            dist.iter()
                                .filter(|&&(h2, _)| h2 != a)
                                .map(|&(h2, p2)| p2 * reward_to(base, s, h2, o.next))
                                .sum()
                        } else {
                            o.reward
                        };
                        sur.push(Outcome { next, prob: p * o.prob, reward });
                    }
                }
                exact.push(ex);
                surrogate.push(sur);
            }
        }
    }
    Ok(UnderAttackPair {
        exact: TabularMDP::new(n_aug, n_act, exact, terminal.clone(), initial.clone(), base.gamma)?,
        surrogate: TabularMDP::new(n_aug, n_act, surrogate, terminal, initial, base.gamma)?,
    })
}

/// `R(s, a, s′)`, or 0 when `s′` is unreachable from `(s, a)`.
fn reward_to(mdp: &TabularMDP, s: usize, a: usize, next: usize) -> f64 {
    let reach: Vec<&Outcome> = mdp.outcomes(s, a).iter().filter(|o| o.next == next).collect();
    let p: f64 = reach.iter().map(|o| o.prob).sum();
    if p == 0.0 {
        0.0
    } else {
        reach.iter().map(|o| o.prob * o.reward).sum::<f64>() / p
    }
}

/// Lifts a policy over base states to the budget-augmented states.
pub fn lift_policy(policy: &[Vec<f64>], budget: usize) -> Vec<Vec<f64>> {
    policy
        .iter()
        .flat_map(|row| std::iter::repeat(row.clone()).take(budget + 1))
        .collect()
}
