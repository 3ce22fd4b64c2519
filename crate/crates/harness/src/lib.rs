//! Experiment runner: configs, evaluation protocols, budget sweeps and
//! significance tests around the core trainers.

pub mod config;
pub mod eval;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};

use romance_core::ego::{EgoNetwork, EgoPolicy};
use romance_core::metrics::{write_metrics_csv, MetricRecord, METRICS_SCHEMA_VERSION};
use romance_core::trainers::{generate_attackers, train, train_romance, Method, TrainConfig};
use serde::{Deserialize, Serialize};

use config::ExperimentConfig;
use eval::{budget_sweep, evaluate, load_attackers, write_sweep_csv, EvalReport, Protocol, SweepRow};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub method: String,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub evaluations: Vec<EvalReport>,
    pub sweep: Vec<SweepRow>,
}

impl Report {
    fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            method: cfg.train.method.name().to_string(),
            seeds: cfg.seeds.clone(),
            train: cfg.train.clone(),
            evaluations: Vec::new(),
            sweep: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn held_out(cfg: &ExperimentConfig) -> anyhow::Result<Vec<romance_core::attacker::AttackerNetwork>> {
    Ok(load_attackers(&cfg.eval.ega_dirs)?)
}

fn run_protocols(
    cfg: &ExperimentConfig,
    egos: &[(u64, &dyn EgoPolicy)],
) -> anyhow::Result<Vec<EvalReport>> {
    let attackers = held_out(cfg)?;
    cfg.eval
        .protocols
        .iter()
        .map(|&p| {
            Ok(evaluate(
                egos,
                p,
                &cfg.train.env,
                cfg.train.budget,
                cfg.eval.episodes,
                &attackers,
                cfg.train.gamma,
            )?)
        })
        .collect()
}

/// Trains one run per seed, then evaluates the final egos.
pub fn cmd_train(config_path: &Path) -> anyhow::Result<PathBuf> {
    let cfg = ExperimentConfig::load(config_path)?;
    let run_dir = cfg.output_dir.join("run");
    let mut metrics: Vec<MetricRecord> = Vec::new();
    let mut egos: Vec<(u64, EgoNetwork)> = Vec::new();
    for &seed in &cfg.seeds {
        let tc = TrainConfig { seed, ..cfg.train.clone() };
        let outcome = train(&tc, Some(&run_dir))?;
        let seed_dir = run_dir.join(seed.to_string());
        outcome.ego.save(seed_dir.join("ego.ckpt"))?;
        if let Some(archive) = &outcome.archive {
            archive.save(seed_dir.join("archive"))?;
            archive.write_distance_csv(fs::File::create(seed_dir.join("distances.csv"))?)?;
        }
        metrics.extend(outcome.metrics);
        egos.push((seed, outcome.ego));
    }
    let refs: Vec<(u64, &dyn EgoPolicy)> = egos.iter().map(|(s, e)| (*s, e as &dyn EgoPolicy)).collect();
    let mut report = Report::new("train", &cfg);
    report.evaluations = run_protocols(&cfg, &refs)?;
    for r in &report.evaluations {
        if r.protocol == Protocol::Ega {
            for s in &r.per_seed {
                metrics.push(MetricRecord {
                    schema_version: METRICS_SCHEMA_VERSION,
                    method: cfg.train.method.name().to_string(),
                    seed: s.seed,
                    generation: cfg.train.generations,
                    protocol: r.protocol.name().to_string(),
                    win_rate: s.win_rate,
                    mean_return: s.mean_return,
                    ci_half_width: 0.0,
                    episodes: s.episodes,
                });
            }
        }
    }
    write_metrics_csv(&metrics, fs::File::create(cfg.output_dir.join("metrics.csv"))?)?;
    report.write(&cfg.output_dir)?;
    Ok(cfg.output_dir)
}

fn load_ego(checkpoint: &Path) -> anyhow::Result<EgoNetwork> {
    EgoNetwork::load(checkpoint).map_err(|e| anyhow::anyhow!("loading {}: {e}", checkpoint.display()))
}

/// Evaluates one checkpoint under every configured protocol and seed.
pub fn cmd_eval(config_path: &Path, checkpoint: &Path) -> anyhow::Result<PathBuf> {
    let cfg = ExperimentConfig::load(config_path)?;
    let ego = load_ego(checkpoint)?;
    let egos: Vec<(u64, &dyn EgoPolicy)> = cfg.seeds.iter().map(|&s| (s, &ego as &dyn EgoPolicy)).collect();
    let mut report = Report::new("eval", &cfg);
    report.evaluations = run_protocols(&cfg, &egos)?;
    fs::create_dir_all(&cfg.output_dir)?;
    report.write(&cfg.output_dir)?;
    Ok(cfg.output_dir)
}

fn load_egos(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> anyhow::Result<Vec<(u64, EgoNetwork)>> {
    cfg.seeds
        .iter()
        .map(|&s| {
            let path = match checkpoint {
                Some(p) => p.to_path_buf(),
                None => cfg.output_dir.join("run").join(s.to_string()).join("ego.ckpt"),
            };
            Ok((s, load_ego(&path)?))
        })
        .collect()
}

/// Held-out-attacker win rates over the configured budget list, for one
/// checkpoint or (by default) each seed's trained ego under `output_dir`.
pub fn cmd_sweep(config_path: &Path, checkpoint: Option<&Path>) -> anyhow::Result<PathBuf> {
    let cfg = ExperimentConfig::load(config_path)?;
    let loaded = load_egos(&cfg, checkpoint)?;
    let attackers = held_out(&cfg)?;
    let egos: Vec<(u64, &dyn EgoPolicy)> = loaded.iter().map(|(s, e)| (*s, e as &dyn EgoPolicy)).collect();
    let rows = budget_sweep(
        &egos,
        &cfg.train.env,
        &attackers,
        &cfg.eval.sweep_budgets,
        cfg.eval.episodes,
        cfg.train.gamma,
    )?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_sweep_csv(&rows, fs::File::create(cfg.output_dir.join("sweep.csv"))?)?;
    let mut report = Report::new("sweep", &cfg);
    report.sweep = rows;
    report.write(&cfg.output_dir)?;
    Ok(cfg.output_dir)
}

/// Held-out attacker archives, one per seed, in `<output_dir>/ega/<seed>/`.
/// Without a checkpoint each seed is a full co-evolutionary run and its
/// final archive is kept; with one, attackers evolve against that frozen ego.
pub fn cmd_gen_attackers(config_path: &Path, checkpoint: Option<&Path>) -> anyhow::Result<PathBuf> {
    let cfg = ExperimentConfig::load(config_path)?;
    let frozen = checkpoint.map(load_ego).transpose()?;
    for &seed in &cfg.seeds {
        let tc = TrainConfig { seed, method: Method::Romance, ..cfg.train.clone() };
        let archive = match &frozen {
            Some(ego) => generate_attackers(&tc, ego, tc.generations)?,
            None => train_romance(&tc, None)?.archive.expect("romance keeps an archive"),
        };
        let dir = cfg.output_dir.join("ega").join(seed.to_string());
        archive.save(&dir)?;
        archive.write_distance_csv(fs::File::create(dir.join("distances.csv"))?)?;
    }
    Ok(cfg.output_dir)
}
