//! Episode collection under attack, producing the ego view and the attacker
//! view of the same ticks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{AttackContext, Adversary, AttackerTransition};
use crate::ego::{select_actions, AgentInputs, EgoError, EgoPolicy, EpisodeRecord};
use crate::lpa::{attacker_view, LpaEnv, LpaError};

#[derive(Debug, thiserror::Error)]
pub enum RolloutError {
    #[error(transparent)]
    Lpa(#[from] LpaError),
    #[error(transparent)]
    Ego(#[from] EgoError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub ego_return: f64,
    /// `Σ γᵗ·(−rₜ)`.
    pub attacker_return: f64,
    pub won: bool,
    pub steps: usize,
    /// Budget units spent.
    pub attacks: usize,
    /// Ticks whose executed joint action differed from the chosen one.
    pub perturbed: usize,
}

#[derive(Clone, Debug)]
pub struct DualTrajectory {
    pub ego: EpisodeRecord,
    pub adversary: Vec<AttackerTransition>,
    pub stats: EpisodeStats,
}

/// Runs one episode from a fresh reset. The ego acts epsilon-greedily on
/// its own Q-values; the adversary picks a victim every tick.
pub fn collect_traj<R: Rng>(
    ego: &dyn EgoPolicy,
    adversary: &mut dyn Adversary,
    lpa: &mut LpaEnv,
    epsilon: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<DualTrajectory, RolloutError> {
    let seed = rng.gen();
    let mut obs = lpa.reset(seed);
    let spec = lpa.env().spec().clone();
    let mut inputs = AgentInputs::new(&spec, ego.history_window());
    inputs.reset(&obs);

    let mut record = EpisodeRecord {
        inputs: vec![inputs.inputs()],
        states: vec![obs.state.clone()],
        masks: vec![obs.masks.clone()],
        actions: Vec::new(),
        rewards: Vec::new(),
        terminated: Vec::new(),
    };
    let mut transitions = Vec::new();
    let mut stats = EpisodeStats::default();
    let mut discount = 1.0;

    loop {
        let tabular = lpa.env().tabular_state();
        let qs = ego.q_values(record.inputs.last().expect("nonempty"), tabular);
        let chosen = select_actions(&qs, &obs.masks, epsilon, rng)?;
        let budget = lpa.budget();
        let before = attacker_view(&obs.state, budget);
        let victim = adversary.choose(
            &AttackContext {
                state: &obs.state,
                budget,
                tabular_state: tabular,
            },
            rng,
        );
        let step = lpa.lpa_step(&chosen, victim, &qs)?;
        let r = step.result.reward;
        let terminated = step.result.terminated();
        let after = attacker_view(&step.result.state, lpa.budget());

        stats.ego_return += r;
        stats.attacker_return -= discount * r;
        discount *= gamma;
        stats.steps += 1;
        stats.attacks += usize::from(step.attacked());
        stats.perturbed += usize::from(step.perturbed());
        stats.won |= step.result.info.won;

        transitions.push(AttackerTransition {
            features: before.features,
            action: victim.unwrap_or(spec.n_agents),
            reward: -r,
            next_features: after.features,
            terminated,
        });
        obs = step.result.observation();
        inputs.push(&obs.observations, &chosen);
        record.inputs.push(inputs.inputs());
        record.states.push(obs.state.clone());
        record.masks.push(obs.masks.clone());
        record.actions.push(chosen);
        record.rewards.push(r);
        record.terminated.push(terminated);
        if step.result.done {
            break;
        }
    }
    Ok(DualTrajectory {
        ego: record,
        adversary: transitions,
        stats,
    })
}

/// Greedy-ego evaluation against one adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub win_rate: f64,
    pub mean_return: f64,
    /// `1.96·sd/√n` of the per-episode win indicator.
    pub ci_half_width: f64,
    pub mean_attacks: f64,
    pub max_attacks: usize,
    pub wins: Vec<bool>,
    pub returns: Vec<f64>,
}

impl EvalSummary {
    pub fn from_episodes(stats: &[EpisodeStats]) -> Self {
        let n = stats.len().max(1) as f64;
        let wins: Vec<bool> = stats.iter().map(|s| s.won).collect();
        let returns: Vec<f64> = stats.iter().map(|s| s.ego_return).collect();
        let win_rate = wins.iter().filter(|&&w| w).count() as f64 / n;
        let var = if stats.len() > 1 {
            wins.iter().map(|&w| (f64::from(u8::from(w)) - win_rate).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            episodes: stats.len(),
            win_rate,
            mean_return: returns.iter().sum::<f64>() / n,
            ci_half_width: 1.96 * (var / n).sqrt(),
            mean_attacks: stats.iter().map(|s| s.attacks as f64).sum::<f64>() / n,
            max_attacks: stats.iter().map(|s| s.attacks).max().unwrap_or(0),
            wins,
            returns,
        }
    }
}

pub fn evaluate_policy<R: Rng>(
    ego: &dyn EgoPolicy,
    adversary: &mut dyn Adversary,
    lpa: &mut LpaEnv,
    episodes: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<EvalSummary, RolloutError> {
    let stats = (0..episodes)
        .map(|_| collect_traj(ego, adversary, lpa, 0.0, gamma, rng).map(|t| t.stats))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalSummary::from_episodes(&stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker::{NullAdversary, RandomAdversary};
    use crate::ego::{EgoConfig, EgoNetwork};
    use crate::env::{MicroBattle, MicroBattleConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(k: usize) -> (EgoNetwork, LpaEnv) {
        let env = MicroBattle::new(MicroBattleConfig::default()).unwrap();
        let ego = EgoNetwork::new(
            crate::env::Environment::spec(&env),
            EgoConfig { hidden: 8, mixer_embed: 4, ..Default::default() },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        (ego, LpaEnv::new(Box::new(env), k))
    }

    #[test]
    fn null_attacker_matches_unattacked_rollout() {
        let (ego, mut lpa) = setup(4);
        let mut null = NullAdversary { n_agents: 3 };
        let a = collect_traj(&ego, &mut null, &mut lpa, 0.3, 0.99, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut zero = LpaEnv::new(lpa.env().boxed_clone(), 0);
        let b = collect_traj(&ego, &mut null, &mut zero, 0.3, 0.99, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.ego, b.ego);
        assert_eq!(a.stats.attacks, 0);
    }

    #[test]
    fn views_are_paired_and_budgeted() {
        let (ego, mut lpa) = setup(3);
        let mut adv = RandomAdversary { n_agents: 3, rate: 0.9 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t = collect_traj(&ego, &mut adv, &mut lpa, 0.5, 0.99, &mut rng).unwrap();
            assert_eq!(t.ego.len(), t.adversary.len());
            assert_eq!(t.ego.inputs.len(), t.ego.len() + 1);
            for (r, tr) in t.ego.rewards.iter().zip(&t.adversary) {
                assert_eq!(tr.reward, -r);
            }
            assert!(t.stats.attacks <= 3);
            assert_eq!(lpa.counters().issued, t.stats.attacks);
            let discounted: f64 = t.ego.rewards.iter().enumerate().map(|(i, r)| -r * 0.99f64.powi(i as i32)).sum();
            assert!((discounted - t.stats.attacker_return).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_statistics() {
        let mk = |won, ego_return, attacks| EpisodeStats { won, ego_return, attacks, ..Default::default() };
        let s = EvalSummary::from_episodes(&[mk(true, 2.0, 1), mk(false, 0.0, 3), mk(true, 1.0, 0), mk(true, 1.0, 2)]);
        assert_eq!(s.win_rate, 0.75);
        assert_eq!(s.mean_return, 1.0);
        assert_eq!(s.max_attacks, 3);
        assert!((s.ci_half_width - 1.96 * (0.25f64 / 4.0).sqrt()).abs() < 1e-12);
    }
}
