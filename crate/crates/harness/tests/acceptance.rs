//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-8 are exact or oracle checks and take a few minutes.
//! Criteria 9-13 train every method on MicroBattle over five seeds and take
//! most of an hour on one core. `ACCEPTANCE_SCOPE=oracle` or `=desk` runs
//! one half; artifacts of the desk half land in the cargo temp dir.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use romance_autodiff::{grad_check, BoundParams, Graph, ParamSet, Tensor, Var};
use romance_core::attacker::{
    diversity_loss_graph, population_loss_graph, victim_policy, AttackerBatch, AttackerConfig,
    AttackerNetwork, AttackerTransition, ReferenceDistribution, TabularAdversary,
};
use romance_core::ego::{EgoConfig, EgoNetwork, EpisodeRecord, MixerMode};
use romance_core::env::{ChainCoop, ChainCoopConfig, EnvSpec, Environment};
use romance_core::evolution::{behavior_distance, quality, Archive, UpdateOutcome};
use romance_core::lpa::{build_attacker_mdp, AttackerObservation, LpaEnv, TabularEgo};
use romance_core::oracle::{
    augmented_index, deterministic_policy, lift_policy, policy_evaluation, soft_value_iteration, under_attack_mdps,
    JointAdversary,
};
use romance_core::rollout::collect_traj;
use romance_harness::stats::{rank_sum_exact, rank_sum_normal, wilcoxon_rank_sum};

#[path = "acceptance/desk.rs"]
mod desk;

// Tolerances, pinned.
const SOFT_FORM_TOL: f64 = 1e-10;
const SPRQ_QUALITY_REL_TOL: f64 = 0.05;
const SPRQ_MAX_TRANSITIONS: usize = 50_000;
const BISIM_STOCHASTIC_TOL: f64 = 1e-2;
const BISIM_DETERMINISTIC_TOL: f64 = 1e-9;
const BISIM_EPISODES: usize = 10_000;
const LOWER_BOUND_SLACK: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 100;
const MONOTONE_PROBES: usize = 1_000;
const MONOTONE_STEP: f64 = 1e-3;
const MONOTONE_SLACK: f64 = 1e-9;
const WILCOXON_AGREEMENT: f64 = 0.02;
const ARCHIVE_OPERATIONS: usize = 1_000;

const CHAIN_GAMMA: f64 = 0.95;
const CHAIN_BUDGET: usize = 3;
/// Long enough that the cap never binds for the egos used below.
const CHAIN_CAP: usize = 200;

pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn print(&self) {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {:>2} {}: {}", self.id, self.name, self.detail);
    }
}

fn chain() -> ChainCoop {
    ChainCoop::new(ChainCoopConfig { episode_limit: CHAIN_CAP, ..Default::default() }).unwrap()
}

/// Prefers stepping right everywhere; the two other utilities are random,
/// so the forced (argmin) action varies between left and stay.
fn rightward_ego(n_states: usize, rng: &mut impl Rng) -> TabularEgo {
    TabularEgo {
        q: (0..n_states)
            .map(|_| (0..2).map(|_| vec![rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.9), 1.0]).collect())
            .collect(),
    }
}

fn random_distribution(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn criterion_1() -> Verdict {
    let env = chain();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let ego = rightward_ego(env.n_positions() + 1, &mut rng);
    let cfg = AttackerConfig { hidden: 32, batch_size: 128, target_interval: 100, ..Default::default() };
    let p_ref = ReferenceDistribution::new(2, cfg.delta).unwrap();
    let mdp = build_attacker_mdp(&env, &ego, CHAIN_BUDGET, CHAIN_GAMMA).unwrap();
    let soft = soft_value_iteration(&mdp, p_ref.probs(), cfg.lambda, 1e-13).unwrap();

    // the solver's policy against the attacker module's own Boltzmann form
    let mut form_err = 0.0f64;
    for s in 0..mdp.n_states() {
        let mine = victim_policy(&soft.q[s], &p_ref, cfg.lambda);
        for (a, b) in mine.iter().zip(&soft.policy[s]) {
            form_err = form_err.max((a - b).abs());
        }
        let total: f64 = soft.policy[s].iter().sum();
        form_err = form_err.max((total - 1.0).abs());
    }
    let start = augmented_index(0, CHAIN_BUDGET, CHAIN_BUDGET);
    let target = policy_evaluation(&mdp, &soft.policy).unwrap().values[start];

    let mut attacker = AttackerNetwork::new(2, env.spec().state_len, cfg.clone(), &mut rng).unwrap();
    let mut lpa = LpaEnv::new(Box::new(env.clone()), CHAIN_BUDGET);
    let mut seen = 0;
    while seen < SPRQ_MAX_TRANSITIONS {
        let t = collect_traj(&ego, &mut attacker, &mut lpa, 0.0, CHAIN_GAMMA, &mut rng).unwrap();
        seen += t.adversary.len();
        attacker.replay_mut().extend(t.adversary);
        for _ in 0..2 {
            let ts = attacker.replay().sample(cfg.batch_size, &mut rng);
            let batch = attacker.prepare_batch(&ts, CHAIN_GAMMA).unwrap();
            attacker.sprq_step(&batch).unwrap();
        }
    }
    let q = quality(&mut attacker, &ego, &mut lpa, 4_000, CHAIN_GAMMA, &mut rng).unwrap();
    let rel = (q.mean - target).abs() / target.abs();
    Verdict {
        id: 1,
        name: "sprq consistency",
        passed: form_err <= SOFT_FORM_TOL && rel <= SPRQ_QUALITY_REL_TOL,
        detail: format!(
            "max |pi - p_ref*exp(Q/l)/Z| = {form_err:.1e} (tol {SOFT_FORM_TOL:.0e}); trained quality {:.4} ± {:.4} vs soft-optimal {target:.4}, rel err {rel:.4} (tol {SPRQ_QUALITY_REL_TOL}) after {seen} transitions",
            q.mean, q.std_err
        ),
    }
}

fn criterion_2() -> Verdict {
    let env = chain();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let ego = rightward_ego(env.n_positions() + 1, &mut rng);
    let mdp = build_attacker_mdp(&env, &ego, CHAIN_BUDGET, CHAIN_GAMMA).unwrap();
    let start = augmented_index(0, CHAIN_BUDGET, CHAIN_BUDGET);
    let mut lpa = LpaEnv::new(Box::new(env.clone()), CHAIN_BUDGET);
    let mut worst_det = 0.0f64;
    let mut worst_sto = 0.0f64;
    for p in 0..10 {
        let deterministic = p < 5;
        let policy: Vec<Vec<f64>> = if deterministic {
            let actions: Vec<usize> = (0..mdp.n_states()).map(|_| rng.gen_range(0..3)).collect();
            deterministic_policy(3, &actions)
        } else {
            (0..mdp.n_states()).map(|_| random_distribution(3, &mut rng)).collect()
        };
        let exact = policy_evaluation(&mdp, &policy).unwrap().values[start];
        let mut adv = TabularAdversary { n_agents: 2, capacity: CHAIN_BUDGET, policy };
        let mut total = 0.0;
        for _ in 0..BISIM_EPISODES {
            total += collect_traj(&ego, &mut adv, &mut lpa, 0.0, CHAIN_GAMMA, &mut rng).unwrap().stats.attacker_return;
        }
        let err = (total / BISIM_EPISODES as f64 - exact).abs();
        if deterministic {
            worst_det = worst_det.max(err);
        } else {
            worst_sto = worst_sto.max(err);
        }
    }
    Verdict {
        id: 2,
        name: "attacker-MDP bisimulation",
        passed: worst_det <= BISIM_DETERMINISTIC_TOL && worst_sto <= BISIM_STOCHASTIC_TOL,
        detail: format!(
            "10 victim policies x {BISIM_EPISODES} episodes: deterministic max err {worst_det:.1e} (tol {BISIM_DETERMINISTIC_TOL:.0e}), stochastic max err {worst_sto:.2e} (tol {BISIM_STOCHASTIC_TOL:.0e})"
        ),
    }
}

/// While budget remains, agent 0 is pushed right with probability 0.3 and
/// agent 1 is replaced by a uniform action with probability 0.2. Both can
/// complete the task, so attacked branches carry reward.
struct Nudge {
    chain: ChainCoop,
}

impl JointAdversary for Nudge {
    fn executed(&self, _s: usize, k: usize, chosen: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return vec![(chosen, 1.0)];
        }
        let a = self.chain.decode_joint_action(chosen);
        let mut out = vec![(chosen, 0.5)];
        let mut push = a.clone();
        push[0] = romance_core::env::chain_coop::RIGHT;
        out.push((self.chain.encode_joint_action(&push), 0.3));
        for b in 0..3 {
            let mut swap = a.clone();
            swap[1] = b;
            out.push((self.chain.encode_joint_action(&swap), 0.2 / 3.0));
        }
        // merge the branches that left the choice unchanged
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, p) in out {
            match merged.iter_mut().find(|(m, _)| *m == j) {
                Some(e) => e.1 += p,
                None => merged.push((j, p)),
            }
        }
        merged
    }
}

fn criterion_3() -> Verdict {
    let env = chain();
    let base = env.enumerate_tabular(CHAIN_GAMMA).unwrap();
    let pair = under_attack_mdps(&base, CHAIN_BUDGET, &Nudge { chain: env.clone() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = f64::NEG_INFINITY;
    let mut strict = 0usize;
    for _ in 0..20 {
        let pol: Vec<Vec<f64>> = (0..base.n_states()).map(|_| random_distribution(base.n_actions(), &mut rng)).collect();
        let lifted = lift_policy(&pol, CHAIN_BUDGET);
        let tilde = policy_evaluation(&pair.surrogate, &lifted).unwrap();
        let hat = policy_evaluation(&pair.exact, &lifted).unwrap();
        for (t, h) in tilde.values.iter().zip(&hat.values) {
            worst = worst.max(t - h);
            strict += usize::from(t < &(h - 1e-9));
        }
    }
    Verdict {
        id: 3,
        name: "under-attack lower bound",
        // without strict gaps the comparison would be vacuous
        passed: worst <= LOWER_BOUND_SLACK && strict > 0,
        detail: format!(
            "20 ego policies x {} augmented states: max (V~ - V^) = {worst:.2e} (slack {LOWER_BOUND_SLACK:.0e}); {strict} strict gaps",
            pair.exact.n_states()
        ),
    }
}

fn random_attacker(n: usize, state_len: usize, hidden: usize, rng: &mut impl Rng) -> AttackerNetwork {
    let cfg = AttackerConfig { hidden, ..Default::default() };
    let mut a = AttackerNetwork::new(n, state_len, cfg, rng).unwrap();
    let flat: Vec<f64> = (0..a.params().num_scalars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    a.params_mut().set_flat(&flat).unwrap();
    a.sync_target();
    a
}

fn random_batch(a: &AttackerNetwork, n: usize, state_len: usize, rng: &mut impl Rng) -> AttackerBatch {
    let ts: Vec<AttackerTransition> = (0..rng.gen_range(2..6))
        .map(|_| AttackerTransition {
            features: (0..=state_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: rng.gen_range(0..=n),
            reward: rng.gen_range(-1.0..1.0),
            next_features: (0..=state_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            terminated: rng.gen_bool(0.3),
        })
        .collect();
    a.prepare_batch(&ts.iter().collect::<Vec<_>>(), rng.gen_range(0.5..0.99)).unwrap()
}

fn random_points(state_len: usize, rng: &mut impl Rng) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..rng.gen_range(1..6))
        .map(|_| (0..=state_len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Tensor::from_rows(&rows).unwrap()
}

/// Finite-difference check over all members' parameters at once.
fn joint_check<F>(members: &[AttackerNetwork], build: F) -> f64
where
    F: Fn(&mut Graph, &[BoundParams], &[&AttackerNetwork]) -> Var,
{
    let mut joint = ParamSet::new();
    let per = members[0].params().len();
    for (m, member) in members.iter().enumerate() {
        for (name, t) in member.params().iter() {
            joint.add(format!("m{m}.{name}"), t.clone());
        }
    }
    let refs: Vec<&AttackerNetwork> = members.iter().collect();
    grad_check(&joint, GRAD_REL_TOL, |g, b| {
        let bounds: Vec<BoundParams> = (0..members.len())
            .map(|m| BoundParams::from_vars((0..per).map(|i| b.var(m * per + i)).collect()))
            .collect();
        build(g, &bounds, &refs)
    })
    .unwrap()
    .max_rel_error
}

fn random_episode(net: &EgoNetwork, spec: &EnvSpec, rng: &mut impl Rng) -> EpisodeRecord {
    let t = rng.gen_range(1..4);
    let n = spec.n_agents;
    EpisodeRecord {
        inputs: (0..=t)
            .map(|_| (0..n).map(|_| (0..net.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect(),
        states: (0..=t).map(|_| (0..spec.state_len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        masks: (0..=t)
            .map(|_| (0..n).map(|_| (0..spec.n_actions).map(|a| a == 0 || rng.gen_bool(0.7)).collect()).collect())
            .collect(),
        actions: (0..t).map(|_| (0..n).map(|_| rng.gen_range(0..spec.n_actions)).collect()).collect(),
        rewards: (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        terminated: (0..t).map(|i| i + 1 == t && rng.gen_bool(0.5)).collect(),
    }
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = [0.0f64; 4];
    for _ in 0..GRAD_INSTANCES {
        let n = rng.gen_range(2..4);
        let sl = rng.gen_range(2..5);
        let lambda = rng.gen_range(0.04..1.0);
        let n_p = rng.gen_range(2..4);
        let members: Vec<AttackerNetwork> = (0..n_p)
            .map(|_| {
                let mut a = random_attacker(n, sl, rng.gen_range(3..6), &mut rng);
                a.set_lambda(lambda);
                a
            })
            .collect();
        let batches: Vec<AttackerBatch> = members.iter().map(|m| random_batch(m, n, sl, &mut rng)).collect();
        let points = random_points(sl, &mut rng);
        let alpha = rng.gen_range(0.05..2.0);

        let e = joint_check(&members[..1], |g, b, m| m[0].sprq_loss(g, &b[0], &batches[0]).unwrap());
        worst[0] = worst[0].max(e);
        let e = joint_check(&members, |g, b, m| diversity_loss_graph(g, b, m, &points).unwrap());
        worst[1] = worst[1].max(e);
        let e = joint_check(&members, |g, b, m| population_loss_graph(g, b, m, &batches, Some(&points), alpha).unwrap().0);
        worst[2] = worst[2].max(e);

        let spec = EnvSpec {
            n_agents: rng.gen_range(2..4),
            n_actions: rng.gen_range(2..5),
            obs_len: rng.gen_range(2..4),
            state_len: rng.gen_range(2..5),
            episode_limit: 5,
            reward_scale: 1.0,
            default_gamma: 0.9,
        };
        let mixer = if rng.gen_bool(0.5) { MixerMode::Qmix } else { MixerMode::Vdn };
        let ego_cfg = EgoConfig { mixer, hidden: 5, mixer_embed: 4, window: 2, ..Default::default() };
        let mut net = EgoNetwork::new(&spec, ego_cfg, &mut rng);
        let flat: Vec<f64> = (0..net.params().num_scalars()).map(|_| rng.gen_range(-0.7..0.7)).collect();
        net.params_mut().set_flat(&flat).unwrap();
        let eps: Vec<EpisodeRecord> = (0..2).map(|_| random_episode(&net, &spec, &mut rng)).collect();
        let batch = net.prepare_batch(&eps.iter().collect::<Vec<_>>(), 0.9).unwrap();
        let r = grad_check(net.params(), GRAD_REL_TOL, |g, b| net.td_loss(g, b, &batch).unwrap()).unwrap();
        worst[3] = worst[3].max(r.max_rel_error);
    }
    Verdict {
        id: 4,
        name: "gradient suite",
        passed: worst.iter().all(|&w| w < GRAD_REL_TOL),
        detail: format!(
            "{GRAD_INSTANCES} instances each, max rel err: sprq {:.1e}, diversity {:.1e}, population {:.1e}, td {:.1e} (tol {GRAD_REL_TOL:.0e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let spec = EnvSpec {
        n_agents: 3,
        n_actions: 9,
        obs_len: 16,
        state_len: 18,
        episode_limit: 50,
        reward_scale: 1.0,
        default_gamma: 0.99,
    };
    let mut worst = f64::INFINITY;
    for probe in 0..MONOTONE_PROBES {
        // fresh mixer weights every 100 probes
        let mut net = EgoNetwork::new(&spec, EgoConfig { mixer: MixerMode::Qmix, ..Default::default() }, &mut rng);
        if probe % 100 != 0 {
            let flat: Vec<f64> = (0..net.params().num_scalars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            net.params_mut().set_flat(&flat).unwrap();
        }
        let state: Vec<f64> = (0..spec.state_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let qs: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = net.mix(&qs, &state);
        for i in 0..3 {
            let mut up = qs.clone();
            up[i] += MONOTONE_STEP;
            worst = worst.min(net.mix(&up, &state) - base);
        }
    }
    Verdict {
        id: 6,
        name: "qmix monotonicity",
        passed: worst >= -MONOTONE_SLACK,
        detail: format!("{MONOTONE_PROBES} probes x 3 agents: min change {worst:.3e} (slack {MONOTONE_SLACK:.0e})"),
    }
}

fn criterion_7() -> Verdict {
    let values = [0.31, 1.7, 2.2, 2.9, 3.4, 4.05, 4.6, 5.15, 6.3, 7.8];
    let mut worst = 0.0f64;
    let mut splits = 0;
    for mask in 0u32..1 << 10 {
        if mask.count_ones() != 5 {
            continue;
        }
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, &v) in values.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    a.push(v);
                } else {
                    b.push(v);
                }
            }
            (a, b)
        };
        let exact = rank_sum_exact(&a, &b).unwrap().p_value;
        let approx = rank_sum_normal(&a, &b).unwrap().p_value;
        worst = worst.max((exact - approx).abs());
        splits += 1;
    }
    let triple = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().p_value;
    Verdict {
        id: 7,
        name: "wilcoxon exactness",
        passed: worst <= WILCOXON_AGREEMENT && (triple - 0.1).abs() < 1e-12,
        detail: format!(
            "{splits} splits: max |normal - exact| = {worst:.4} (tol {WILCOXON_AGREEMENT}); (1,2,3) vs (4,5,6) exact p = {triple}"
        ),
    }
}

fn filled_attacker(rng: &mut impl Rng) -> AttackerNetwork {
    let mut a = random_attacker(3, 4, 6, rng);
    for _ in 0..rng.gen_range(5..40) {
        let k = rng.gen_range(1..=4);
        let mut features: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        features.push(k as f64 / 4.0);
        a.sample_victim(&AttackerObservation { features, remaining: k, capacity: 4 }, rng);
    }
    a
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (capacity, threshold) = (15, 0.05);
    let mut archive = Archive::new(capacity, threshold).unwrap();
    let mut max_len = 0;
    let mut threshold_admissions = 0;
    let mut recheck_err = 0.0f64;
    let mut bad = 0;
    for op in 0..ARCHIVE_OPERATIONS {
        let size = if op % 2 == 0 { 1 } else { rng.gen_range(2..=4) };
        let candidates: Vec<(AttackerNetwork, f64)> =
            (0..size).map(|_| (filled_attacker(&mut rng), rng.gen_range(-3.0..0.0))).collect();
        let before: Vec<AttackerNetwork> = archive.entries().iter().map(|e| e.attacker.clone()).collect();
        let single = candidates[0].0.clone();
        let outcomes = archive.update_archive(candidates, &mut rng);
        max_len = max_len.max(archive.len());
        if size == 1 && !before.is_empty() {
            if let UpdateOutcome::Added { .. } = outcomes[0] {
                let newest = archive.entries().iter().max_by_key(|e| e.age).unwrap();
                if newest.admitted_by_threshold {
                    let direct = before.iter().map(|b| behavior_distance(&single, b)).fold(f64::INFINITY, f64::min);
                    recheck_err = recheck_err.max((direct - newest.insert_min_distance.unwrap()).abs());
                }
            }
        }
        for e in archive.entries() {
            if e.admitted_by_threshold {
                threshold_admissions += 1;
                // the first entry of an empty archive has no neighbour to clear
                if e.insert_min_distance.is_some_and(|d| !(d >= threshold)) {
                    bad += 1;
                }
            }
        }
    }
    Verdict {
        id: 8,
        name: "archive discipline",
        passed: max_len <= capacity && bad == 0 && recheck_err < 1e-12,
        detail: format!(
            "{ARCHIVE_OPERATIONS} updates: max size {max_len} (cap {capacity}); {bad} threshold entries below {threshold} over {threshold_admissions} entry-checks; recorded vs recomputed distance max diff {recheck_err:.1e}"
        ),
    }
}

fn out_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn main() {
    let scope = std::env::var("ACCEPTANCE_SCOPE").unwrap_or_default();
    let mut verdicts: Vec<Verdict> = Vec::new();
    let mut timing = String::new();
    if scope != "desk" {
        let t = Instant::now();
        let checks: [(u32, fn() -> Verdict); 7] = [
            (1, criterion_1),
            (2, criterion_2),
            (3, criterion_3),
            (4, criterion_4),
            (6, criterion_6),
            (7, criterion_7),
            (8, criterion_8),
        ];
        for (_, f) in checks {
            let v = f();
            v.print();
            verdicts.push(v);
        }
        let _ = write!(timing, "oracle suite {:.0}s", t.elapsed().as_secs_f64());
    }
    if scope != "oracle" {
        let t = Instant::now();
        for v in desk::run(&out_dir()) {
            v.print();
            verdicts.push(v);
        }
        let _ = write!(timing, "{}desk suite {:.0}s", if timing.is_empty() { "" } else { ", " }, t.elapsed().as_secs_f64());
    }
    verdicts.sort_by_key(|v| v.id);
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!("acceptance: {} checked, {} failed {:?} ({timing})", verdicts.len(), failed.len(), failed);
    // A failing criterion is a result, not a broken build; strict mode turns it into one.
    if std::env::var_os("ACCEPTANCE_STRICT").is_some() && !failed.is_empty() {
        std::process::exit(1);
    }
}
