//! Desk-scale MicroBattle comparison: every method over five seeds, judged
//! against attackers evolved in separate runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use romance_core::attacker::{AttackerNetwork, RandomAdversary};
use romance_core::ego::{EgoConfig, EgoNetwork, EgoPolicy, MixerMode};
use romance_core::env::{EnvConfig, MicroBattleConfig};
use romance_core::evolution::quality;
use romance_core::lpa::LpaEnv;
use romance_core::metrics::{write_metrics_csv, MetricRecord};
use romance_core::trainers::{generate_attackers, generate_fixed_population, train, Method, TrainConfig};
use romance_harness::eval::{budget_sweep, evaluate, EvalReport, Protocol, SweepRow};
use romance_harness::stats::{mean_ci, wilcoxon_rank_sum};
use serde::Serialize;

use super::Verdict;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const HELD_OUT_SEEDS: [u64; 2] = [100, 101];
const BUDGET: usize = 4;
const SWEEP: [usize; 5] = [0, 2, 4, 6, 8];
const DEFAULT_GENERATIONS: usize = 500;
/// Generations of attacker-only evolution against a frozen ego.
const ATTACK_GENERATIONS: usize = 100;
const NATURAL_EPISODES: usize = 4;
const RANDOM_EPISODES: usize = 32;
const EGA_EPISODES: usize = 4;
const SWEEP_EPISODES: usize = 2;
const REMEASURE_EPISODES: usize = 32;
const TOP_ATTACKERS: usize = 5;

const SIGNIFICANCE: f64 = 0.05;
const NATURAL_MARGIN: f64 = 0.05;
const MIN_EPISODES: usize = 10_000;

fn config(method: Method, seed: u64, generations: usize, alpha: f64) -> TrainConfig {
    let mut cfg = TrainConfig {
        env: EnvConfig::MicroBattle(MicroBattleConfig::default()),
        method,
        ego: EgoConfig { mixer: MixerMode::Vdn, batch_episodes: 8, ..Default::default() },
        budget: BUDGET,
        generations,
        eval_interval: 0,
        eval_episodes: 1,
        seed,
        ..Default::default()
    };
    cfg.attacker.alpha = alpha;
    cfg
}

#[derive(Serialize)]
struct MethodSummary {
    natural: EvalReport,
    random: EvalReport,
    ega: EvalReport,
    sweep: Vec<SweepRow>,
}

#[derive(Serialize)]
struct AttackSummary {
    seed: u64,
    evolved_top: f64,
    fixed_population: f64,
    random: f64,
}

#[derive(Default)]
struct Counters {
    episodes: usize,
    violations: usize,
    purity: usize,
}

impl Counters {
    fn eval(&mut self, r: &EvalReport) {
        self.episodes += r.episodes;
        if r.max_attacks > r.budget {
            self.violations += 1;
        }
    }
}

fn per_seed(r: &EvalReport) -> Vec<f64> {
    r.per_seed.iter().map(|s| s.win_rate).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2}")).collect();
    format!("[{}]", parts.join(" "))
}

pub fn run(out: &Path) -> Vec<Verdict> {
    let generations = std::env::var("ACCEPTANCE_GENERATIONS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_GENERATIONS);
    fs::create_dir_all(out).unwrap();
    let env = EnvConfig::MicroBattle(MicroBattleConfig::default());
    let gamma = config(Method::Vanilla, 0, 1, 0.1).gamma;
    let mut counters = Counters::default();
    let mut metrics: Vec<MetricRecord> = Vec::new();

    let mut held_out: Vec<AttackerNetwork> = Vec::new();
    for seed in HELD_OUT_SEEDS {
        let o = train(&config(Method::Romance, seed, generations, 0.1), None).unwrap();
        counters.episodes += o.trace.episodes;
        counters.violations += o.trace.budget_violations;
        counters.purity += o.trace.purity_violations;
        let archive = o.archive.unwrap();
        let dir = out.join("ega").join(seed.to_string());
        archive.save(&dir).unwrap();
        archive.write_distance_csv(fs::File::create(dir.join("distances.csv")).unwrap()).unwrap();
        held_out.extend(archive.entries().iter().map(|e| e.attacker.clone()));
    }
    eprintln!("held-out set: {} attackers", held_out.len());

    let variants: [(&str, Method, f64); 6] = [
        ("vanilla", Method::Vanilla, 0.1),
        ("random", Method::Random, 0.1),
        ("rarl", Method::Rarl, 0.1),
        ("rap", Method::Rap, 0.1),
        ("romance", Method::Romance, 0.1),
        ("romance_alpha0", Method::Romance, 0.0),
    ];
    let mut summaries: BTreeMap<&str, MethodSummary> = BTreeMap::new();
    let mut vanilla_egos: Vec<(u64, EgoNetwork)> = Vec::new();
    for (name, method, alpha) in variants {
        let ego_dir = out.join("egos").join(name);
        fs::create_dir_all(&ego_dir).unwrap();
        let mut egos: Vec<(u64, EgoNetwork)> = Vec::new();
        for seed in SEEDS {
            let o = train(&config(method, seed, generations, alpha), None).unwrap();
            counters.episodes += o.trace.episodes;
            counters.violations += o.trace.budget_violations;
            counters.purity += o.trace.purity_violations;
            metrics.extend(o.metrics.into_iter().map(|m| MetricRecord { method: name.to_string(), ..m }));
            o.ego.save(ego_dir.join(format!("{seed}.ckpt"))).unwrap();
            egos.push((seed, o.ego));
        }
        let refs: Vec<(u64, &dyn EgoPolicy)> = egos.iter().map(|(s, e)| (*s, e as &dyn EgoPolicy)).collect();
        let natural = evaluate(&refs, Protocol::Natural, &env, BUDGET, NATURAL_EPISODES, &[], gamma).unwrap();
        let random = evaluate(&refs, Protocol::Random, &env, BUDGET, RANDOM_EPISODES, &[], gamma).unwrap();
        let ega = evaluate(&refs, Protocol::Ega, &env, BUDGET, EGA_EPISODES, &held_out, gamma).unwrap();
        let sweep = budget_sweep(&refs, &env, &held_out, &SWEEP, SWEEP_EPISODES, gamma).unwrap();
        for r in [&natural, &random, &ega].into_iter().chain(sweep.iter().map(|r| &r.report)) {
            counters.eval(r);
        }
        for r in [&natural, &random, &ega] {
            for s in &r.per_seed {
                metrics.push(MetricRecord {
                    schema_version: romance_core::metrics::METRICS_SCHEMA_VERSION,
                    method: name.to_string(),
                    seed: s.seed,
                    generation: generations,
                    protocol: r.protocol.name().to_string(),
                    win_rate: s.win_rate,
                    mean_return: s.mean_return,
                    ci_half_width: 0.0,
                    episodes: s.episodes,
                });
            }
        }
        eprintln!(
            "{name}: natural {} random {} ega {}",
            fmt(&per_seed(&natural)),
            fmt(&per_seed(&random)),
            fmt(&per_seed(&ega))
        );
        summaries.insert(name, MethodSummary { natural, random, ega, sweep });
        if method == Method::Vanilla {
            vanilla_egos = egos;
        }
    }

    // attacker generation against each frozen vanilla ego
    let mut attacks: Vec<AttackSummary> = Vec::new();
    for (seed, ego) in &vanilla_egos {
        let cfg = config(Method::Romance, *seed, generations, 0.1);
        let mut lpa = LpaEnv::new(env.build().unwrap(), BUDGET);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa77a_c4e5);
        let archive = generate_attackers(&cfg, ego, ATTACK_GENERATIONS).unwrap();
        let mut evolved: Vec<f64> = archive
            .entries()
            .iter()
            .map(|e| {
                let mut a = e.attacker.clone();
                quality(&mut a, ego, &mut lpa, REMEASURE_EPISODES, gamma, &mut rng).unwrap().mean
            })
            .collect();
        evolved.sort_by(|a, b| b.total_cmp(a));
        let fixed = generate_fixed_population(&cfg, ego, ATTACK_GENERATIONS).unwrap();
        let fixed_q: Vec<f64> = fixed
            .into_iter()
            .map(|mut a| quality(&mut a, ego, &mut lpa, REMEASURE_EPISODES, gamma, &mut rng).unwrap().mean)
            .collect();
        let mut rnd = RandomAdversary::for_budget(3, BUDGET, 50);
        let random_q = quality(&mut rnd, ego, &mut lpa, REMEASURE_EPISODES, gamma, &mut rng).unwrap().mean;
        counters.episodes += REMEASURE_EPISODES * (evolved.len() + fixed_q.len() + 1);
        attacks.push(AttackSummary {
            seed: *seed,
            evolved_top: mean(&evolved[..TOP_ATTACKERS.min(evolved.len())]),
            fixed_population: mean(&fixed_q),
            random: random_q,
        });
    }

    write_metrics_csv(&metrics, fs::File::create(out.join("metrics.csv")).unwrap()).unwrap();
    let summary = serde_json::json!({ "generations": generations, "methods": summaries, "attacks": attacks });
    fs::write(out.join("desk_summary.json"), serde_json::to_string_pretty(&summary).unwrap()).unwrap();

    let mut verdicts = Vec::new();
    verdicts.push(Verdict {
        id: 5,
        name: "budget accounting",
        passed: counters.episodes >= MIN_EPISODES && counters.violations == 0 && counters.purity == 0,
        detail: format!(
            "{} episodes (min {MIN_EPISODES}), {} budget violations, {} frozen-parameter changes",
            counters.episodes, counters.violations, counters.purity
        ),
    });

    let rom = &summaries["romance"];
    let van = &summaries["vanilla"];
    let (re, ve) = (per_seed(&rom.ega), per_seed(&van.ega));
    let p9 = wilcoxon_rank_sum(&re, &ve).unwrap().p_value;
    verdicts.push(Verdict {
        id: 9,
        name: "robustness under held-out attackers",
        passed: mean(&re) > mean(&ve) && p9 < SIGNIFICANCE,
        detail: format!(
            "K={BUDGET}, G={generations}: romance {} mean {:.3} vs vanilla {} mean {:.3}, rank-sum p = {p9:.3} (need < {SIGNIFICANCE})",
            fmt(&re),
            mean(&re),
            fmt(&ve),
            mean(&ve)
        ),
    });

    let (rn, vn) = (per_seed(&rom.natural), per_seed(&van.natural));
    let p10 = wilcoxon_rank_sum(&rn, &vn).unwrap().p_value;
    let close = mean(&rn) >= mean(&vn) - NATURAL_MARGIN;
    verdicts.push(Verdict {
        id: 10,
        name: "natural performance retained",
        passed: close,
        detail: format!(
            "romance {} mean {:.3} vs vanilla {} mean {:.3}; within {NATURAL_MARGIN}: {close}, rank-sum p = {p10:.3} (significant below {SIGNIFICANCE})",
            fmt(&rn),
            mean(&rn),
            fmt(&vn),
            mean(&vn)
        ),
    });

    let mut rises = Vec::new();
    for (name, s) in &summaries {
        for w in s.sweep.windows(2) {
            let (a, b) = (&w[0].report, &w[1].report);
            if b.win_rate > a.win_rate + a.ci_half_width + b.ci_half_width {
                rises.push(format!("{name} K={}→{}", w[0].budget, w[1].budget));
            }
        }
    }
    let rarl = &summaries["rarl"];
    let mut behind = Vec::new();
    let mut curve = String::new();
    for (r, q) in rom.sweep.iter().zip(&rarl.sweep) {
        curve.push_str(&format!(" K={}: {:.2}/{:.2}", r.budget, r.report.win_rate, q.report.win_rate));
        if r.budget >= BUDGET && r.report.win_rate < q.report.win_rate {
            behind.push(r.budget);
        }
    }
    verdicts.push(Verdict {
        id: 11,
        name: "budget sweep",
        passed: rises.is_empty() && behind.is_empty(),
        detail: format!(
            "rises beyond CI overlap: {rises:?}; romance/rarl{curve}; romance behind rarl at K = {behind:?}"
        ),
    });

    let ev: Vec<f64> = attacks.iter().map(|a| a.evolved_top).collect();
    let fp: Vec<f64> = attacks.iter().map(|a| a.fixed_population).collect();
    let rd: Vec<f64> = attacks.iter().map(|a| a.random).collect();
    let p_ef = wilcoxon_rank_sum(&ev, &fp).unwrap().p_value;
    let p_fr = wilcoxon_rank_sum(&fp, &rd).unwrap().p_value;
    let (me, mf, mr) = (mean_ci(&ev).0, mean_ci(&fp).0, mean_ci(&rd).0);
    verdicts.push(Verdict {
        id: 12,
        name: "attack quality ordering",
        passed: me > mf && mf > mr && p_ef < SIGNIFICANCE && p_fr < SIGNIFICANCE,
        detail: format!(
            "attacker return vs frozen vanilla egos: evolved top-{TOP_ATTACKERS} {me:.2}, fixed population {mf:.2}, random {mr:.2}; p(evolved>fixed) = {p_ef:.3}, p(fixed>random) = {p_fr:.3}"
        ),
    });

    let a0 = per_seed(&summaries["romance_alpha0"].ega);
    verdicts.push(Verdict {
        id: 13,
        name: "diversity ablation",
        passed: mean(&a0) <= mean(&re),
        detail: format!("held-out win rate alpha=0 {} mean {:.3} vs alpha=0.1 mean {:.3}", fmt(&a0), mean(&a0), mean(&re)),
    });
    verdicts
}
