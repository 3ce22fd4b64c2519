//! Evaluation protocols and budget sweeps.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use romance_core::attacker::{Adversary, AttackerNetwork, NullAdversary, RandomAdversary};
use romance_core::ego::EgoPolicy;
use romance_core::env::EnvConfig;
use romance_core::evolution::{Archive, EvolutionError};
use romance_core::lpa::LpaEnv;
use romance_core::rollout::{evaluate_policy, EpisodeStats, EvalSummary, RolloutError};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// No attack.
    Natural,
    /// Uniform victims at rate `K/T`.
    Random,
    /// Held-out evolved attackers.
    Ega,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Natural => "natural",
            Protocol::Random => "random",
            Protocol::Ega => "ega",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("the ega protocol needs at least one held-out attacker")]
    MissingAttackers,
    #[error("no egos to evaluate")]
    NoEgos,
    #[error("held-out attacker changed during evaluation")]
    AttackerMutated,
    #[error("episodes must be at least 1")]
    NoEpisodes,
    #[error("budget list is empty")]
    NoBudgets,
    #[error(transparent)]
    Env(#[from] romance_core::env::EnvError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub episodes: usize,
    pub win_rate: f64,
    pub mean_return: f64,
    pub max_attacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub budget: usize,
    pub episodes: usize,
    pub win_rate: f64,
    pub mean_return: f64,
    /// Over all pooled episodes.
    pub ci_half_width: f64,
    pub max_attacks: usize,
    pub per_seed: Vec<SeedResult>,
}

/// Loads every attacker from the given archive directories.
pub fn load_attackers(dirs: &[impl AsRef<Path>]) -> Result<Vec<AttackerNetwork>, EvalError> {
    let mut out = Vec::new();
    for d in dirs {
        out.extend(Archive::load(d)?.entries().iter().map(|e| e.attacker.clone()));
    }
    Ok(out)
}

/// Greedy rollouts of each `(seed, ego)` under `protocol` at budget `budget`.
/// Held-out attackers are cloned per use and checked for mutation.
pub fn evaluate(
    egos: &[(u64, &dyn EgoPolicy)],
    protocol: Protocol,
    env: &EnvConfig,
    budget: usize,
    episodes: usize,
    attackers: &[AttackerNetwork],
    gamma: f64,
) -> Result<EvalReport, EvalError> {
    if egos.is_empty() {
        return Err(EvalError::NoEgos);
    }
    if episodes == 0 {
        return Err(EvalError::NoEpisodes);
    }
    if protocol == Protocol::Ega && attackers.is_empty() {
        return Err(EvalError::MissingAttackers);
    }
    let digests: Vec<String> = attackers.iter().map(|a| a.digest()).collect();
    let proto_env = env.build()?;
    let n = proto_env.spec().n_agents;
    let limit = proto_env.spec().episode_limit;
    let mut all: Vec<EpisodeStats> = Vec::new();
    let mut per_seed = Vec::with_capacity(egos.len());
    for &(seed, ego) in egos {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lpa = LpaEnv::new(proto_env.boxed_clone(), budget);
        let mut summaries: Vec<EvalSummary> = Vec::new();
        match protocol {
            Protocol::Natural => {
                let mut adv = NullAdversary { n_agents: n };
                summaries.push(evaluate_policy(ego, &mut adv, &mut lpa, episodes, gamma, &mut rng)?);
            }
            Protocol::Random => {
                let mut adv = RandomAdversary::for_budget(n, budget, limit);
                summaries.push(evaluate_policy(ego, &mut adv, &mut lpa, episodes, gamma, &mut rng)?);
            }
            Protocol::Ega => {
                for a in attackers {
                    let mut adv = a.clone();
                    summaries.push(evaluate_policy(ego, &mut adv as &mut dyn Adversary, &mut lpa, episodes, gamma, &mut rng)?);
                }
            }
        }
        let stats: Vec<EpisodeStats> = summaries
            .iter()
            .flat_map(|s| {
                s.wins.iter().zip(&s.returns).map(|(&won, &ego_return)| EpisodeStats { won, ego_return, ..Default::default() })
            })
            .collect();
        let seed_summary = EvalSummary::from_episodes(&stats);
        per_seed.push(SeedResult {
            seed,
            episodes: seed_summary.episodes,
            win_rate: seed_summary.win_rate,
            mean_return: seed_summary.mean_return,
            max_attacks: summaries.iter().map(|s| s.max_attacks).max().unwrap_or(0),
        });
        all.extend(stats);
    }
    if attackers.iter().map(|a| a.digest()).ne(digests.into_iter()) {
        return Err(EvalError::AttackerMutated);
    }
    let pooled = EvalSummary::from_episodes(&all);
    Ok(EvalReport {
        protocol,
        budget,
        episodes: pooled.episodes,
        win_rate: pooled.win_rate,
        mean_return: pooled.mean_return,
        ci_half_width: pooled.ci_half_width,
        max_attacks: per_seed.iter().map(|s| s.max_attacks).max().unwrap_or(0),
        per_seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: usize,
    pub report: EvalReport,
}

/// Held-out-attacker evaluation at each budget, ascending.
pub fn budget_sweep(
    egos: &[(u64, &dyn EgoPolicy)],
    env: &EnvConfig,
    attackers: &[AttackerNetwork],
    budgets: &[usize],
    episodes: usize,
    gamma: f64,
) -> Result<Vec<SweepRow>, EvalError> {
    if budgets.is_empty() {
        return Err(EvalError::NoBudgets);
    }
    let mut ks = budgets.to_vec();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .map(|k| {
            Ok(SweepRow {
                budget: k,
                report: evaluate(egos, Protocol::Ega, env, k, episodes, attackers, gamma)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["budget", "win_rate", "ci_half_width", "mean_return", "episodes"])?;
    for r in rows {
        w.write_record([
            r.budget.to_string(),
            r.report.win_rate.to_string(),
            r.report.ci_half_width.to_string(),
            r.report.mean_return.to_string(),
            r.report.episodes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use romance_core::attacker::AttackerConfig;
    use romance_core::env::ChainCoopConfig;
    use romance_core::lpa::TabularEgo;

    fn chain() -> EnvConfig {
        EnvConfig::ChainCoop(ChainCoopConfig::default())
    }

    /// Both agents always step right: wins in four ticks.
    fn walker() -> TabularEgo {
        TabularEgo { q: vec![vec![vec![0.0, 0.0, 1.0]; 2]; 26] }
    }

    fn attackers(n: usize) -> Vec<AttackerNetwork> {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(4);
        (0..n)
            .map(|_| AttackerNetwork::new(2, 10, AttackerConfig { delta: 0.9, hidden: 4, ..Default::default() }, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn optimal_ego_always_wins_naturally() {
        let ego = walker();
        let r = evaluate(&[(0, &ego), (1, &ego)], Protocol::Natural, &chain(), 2, 10, &[], 0.95).unwrap();
        assert_eq!(r.win_rate, 1.0);
        assert_eq!(r.episodes, 20);
        assert_eq!(r.per_seed.len(), 2);
        assert_eq!(r.max_attacks, 0);
    }

    #[test]
    fn zero_budget_is_natural() {
        let ego = walker();
        let atk = attackers(2);
        let nat = evaluate(&[(5, &ego)], Protocol::Natural, &chain(), 0, 6, &[], 0.95).unwrap();
        let rows = budget_sweep(&[(5, &ego)], &chain(), &atk, &[4, 0, 2, 2], 6, 0.95).unwrap();
        assert_eq!(rows.iter().map(|r| r.budget).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(rows[0].report.win_rate, nat.win_rate);
        assert_eq!(rows[0].report.mean_return, nat.mean_return);
        assert_eq!(rows[0].report.max_attacks, 0);
        assert!(rows.iter().all(|r| r.report.max_attacks <= r.budget));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("budget,win_rate,ci_half_width,mean_return,episodes\n0,"));
    }

    #[test]
    fn random_protocol_respects_budget() {
        let ego = walker();
        let r = evaluate(&[(0, &ego)], Protocol::Random, &chain(), 1, 200, &[], 0.95).unwrap();
        assert!(r.max_attacks <= 1);
    }

    #[test]
    fn ega_needs_attackers_and_leaves_them_untouched() {
        let ego = walker();
        assert!(matches!(
            evaluate(&[(0, &ego)], Protocol::Ega, &chain(), 2, 3, &[], 0.95),
            Err(EvalError::MissingAttackers)
        ));
        let atk = attackers(3);
        let before: Vec<String> = atk.iter().map(|a| a.points().digest()).collect();
        let r = evaluate(&[(0, &ego)], Protocol::Ega, &chain(), 2, 3, &atk, 0.95).unwrap();
        assert_eq!(r.episodes, 9);
        assert!(r.max_attacks <= 2);
        let after: Vec<String> = atk.iter().map(|a| a.points().digest()).collect();
        assert_eq!(before, after);
    }
}
