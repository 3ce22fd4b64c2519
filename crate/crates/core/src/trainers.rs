//! Alternating attacker/ego training loops: the evolutionary population
//! method, a single adversary, a fixed population, random attacks and no
//! attacks at all.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{
    points_tensor, population_step, sample_attack_points, Adversary, AttackerBatch, AttackerConfig, AttackerError,
    AttackerNetwork, NullAdversary, RandomAdversary,
};
use crate::ego::{EgoConfig, EgoError, EgoNetwork, EpsilonSchedule, ReplayBuffer};
use crate::env::{EnvConfig, EnvError};
use crate::evolution::{quality, Archive, EvolutionError, UpdateOutcome};
use crate::lpa::LpaEnv;
use crate::metrics::{write_metrics_csv, MetricRecord, MetricsError, METRICS_SCHEMA_VERSION};
use crate::rollout::{collect_traj, evaluate_policy, DualTrajectory, RolloutError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ego(#[from] EgoError),
    #[error(transparent)]
    Attacker(#[from] AttackerError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Romance,
    Rarl,
    Rap,
    Random,
    Vanilla,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Romance, Method::Rarl, Method::Rap, Method::Random, Method::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            Method::Romance => "romance",
            Method::Rarl => "rarl",
            Method::Rap => "rap",
            Method::Random => "random",
            Method::Vanilla => "vanilla",
        }
    }
}

impl FromStr for Method {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TrainError::UnknownMethod(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub method: Method,
    pub ego: EgoConfig,
    pub attacker: AttackerConfig,
    /// Attack budget per episode.
    pub budget: usize,
    pub population: usize,
    pub archive_capacity: usize,
    pub distance_threshold: f64,
    pub generations: usize,
    pub attacker_phases: usize,
    pub ego_phases: usize,
    pub ego_updates_per_phase: usize,
    pub gamma: f64,
    pub quality_episodes: usize,
    /// Generations between evaluation snapshots; 0 evaluates only at the end.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Generations between checkpoints when an output directory is given;
    /// 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::MicroBattle(Default::default()),
            method: Method::Romance,
            ego: EgoConfig::default(),
            attacker: AttackerConfig::default(),
            budget: 4,
            population: 4,
            archive_capacity: 15,
            distance_threshold: 0.05,
            generations: 800,
            attacker_phases: 4,
            ego_phases: 4,
            ego_updates_per_phase: 4,
            gamma: 0.99,
            quality_episodes: 4,
            eval_interval: 20,
            eval_episodes: 32,
            checkpoint_interval: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.generations == 0 || self.attacker_phases == 0 || self.ego_phases == 0 {
            return bad("generations, attacker_phases and ego_phases must be at least 1");
        }
        if self.population == 0 || self.population > self.archive_capacity {
            return bad("population must be in 1..=archive_capacity");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if self.quality_episodes == 0 || self.eval_episodes == 0 {
            return bad("quality_episodes and eval_episodes must be at least 1");
        }
        if self.attacker.lambda <= 0.0 || !(0.0..=1.0).contains(&self.attacker.delta) {
            return bad("attacker.lambda must be positive and attacker.delta in [0, 1]");
        }
        Ok(())
    }

    /// Ego-phase rollouts; every method sees the same number.
    pub fn episodes_per_ego_phase(&self) -> usize {
        self.population
    }

    pub fn total_ego_episodes(&self) -> usize {
        self.generations * self.ego_phases * self.episodes_per_ego_phase()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Single-attacker soft Q loss.
    Sprq,
    /// Mean member loss minus the weighted diversity term.
    Population,
}

/// Loop instrumentation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub attacker_losses: Vec<(LossKind, f64)>,
    pub diversity_evaluations: usize,
    pub ego_losses: Vec<f64>,
    pub attacker_phase_count: usize,
    pub ego_phase_count: usize,
    /// Parameters that changed while they should have been frozen.
    pub purity_violations: usize,
    pub episodes: usize,
    pub max_attacks: usize,
    pub budget_violations: usize,
    pub archive_sizes: Vec<usize>,
    pub archive_outcomes: Vec<UpdateOutcome>,
    /// Scalar parameter count of all attackers, per generation.
    pub attacker_scalars: Vec<usize>,
    /// Attacker parameter digests at the start of training.
    pub initial_attacker_digests: Vec<String>,
}

pub struct TrainOutcome {
    pub ego: EgoNetwork,
    pub archive: Option<Archive>,
    /// Final single attacker or fixed population.
    pub attackers: Vec<AttackerNetwork>,
    pub metrics: Vec<MetricRecord>,
    pub trace: TrainTrace,
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    ego: EgoNetwork,
    replay: ReplayBuffer,
    lpa: LpaEnv,
    eval_lpa: LpaEnv,
    schedule: EpsilonSchedule,
    ego_episodes: usize,
    trace: TrainTrace,
    metrics: Vec<MetricRecord>,
    out: Option<&'a Path>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a TrainConfig, out: Option<&'a Path>) -> Result<Self, TrainError> {
        cfg.validate()?;
        let env = cfg.env.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e7a1);
        let ego = EgoNetwork::new(env.spec(), cfg.ego.clone(), &mut rng);
        let capacity = if cfg.method == Method::Vanilla { 0 } else { cfg.budget };
        Ok(Self {
            cfg,
            rng,
            eval_rng,
            ego,
            replay: ReplayBuffer::new(cfg.ego.buffer_episodes),
            eval_lpa: LpaEnv::new(env.boxed_clone(), cfg.budget),
            lpa: LpaEnv::new(env, capacity),
            schedule: EpsilonSchedule::new(&cfg.ego, cfg.total_ego_episodes()),
            ego_episodes: 0,
            trace: TrainTrace::default(),
            metrics: Vec::new(),
            out,
        })
    }

    fn n_agents(&self) -> usize {
        self.lpa.env().spec().n_agents
    }

    fn new_attacker(&mut self) -> Result<AttackerNetwork, TrainError> {
        let spec = self.lpa.env().spec();
        Ok(AttackerNetwork::new(spec.n_agents, spec.state_len, self.cfg.attacker.clone(), &mut self.rng)?)
    }

    fn record(&mut self, t: &DualTrajectory) {
        self.trace.episodes += 1;
        self.trace.max_attacks = self.trace.max_attacks.max(t.stats.attacks);
        if t.stats.attacks > self.lpa.budget().capacity() {
            self.trace.budget_violations += 1;
        }
    }

    /// Greedy-ego rollouts into each member's attacker replay.
    fn attacker_rollouts(&mut self, members: &mut [AttackerNetwork]) -> Result<(), TrainError> {
        for m in members.iter_mut() {
            let t = collect_traj(&self.ego, m, &mut self.lpa, 0.0, self.cfg.gamma, &mut self.rng)?;
            self.record(&t);
            m.replay_mut().extend(t.adversary);
        }
        Ok(())
    }

    fn attacker_batch(&mut self, m: &AttackerNetwork) -> Result<AttackerBatch, TrainError> {
        let ts = m.replay().sample(self.cfg.attacker.batch_size, &mut self.rng);
        Ok(m.prepare_batch(&ts, self.cfg.gamma)?)
    }

    /// One attacker phase; the ego must come out unchanged.
    fn attacker_phase(&mut self, members: &mut [AttackerNetwork], population_loss: bool) -> Result<(), TrainError> {
        let before = self.ego.digest();
        self.attacker_rollouts(members)?;
        if population_loss {
            let batches = members
                .iter()
                .map(|m| self.attacker_batch(m))
                .collect::<Result<Vec<_>, _>>()?;
            let points = {
                let bufs: Vec<_> = members.iter().map(|m| m.points()).collect();
                let pts = sample_attack_points(&bufs, self.cfg.attacker.diversity_samples, &mut self.rng);
                points_tensor(&pts)
            };
            let step = population_step(members, &batches, points.as_ref(), self.cfg.attacker.alpha)?;
            self.trace.attacker_losses.push((LossKind::Population, step.loss));
            self.trace.diversity_evaluations += usize::from(step.diversity_evaluated);
        } else {
            for m in members.iter_mut() {
                let batch = self.attacker_batch(m)?;
                let loss = m.sprq_step(&batch)?;
                self.trace.attacker_losses.push((LossKind::Sprq, loss));
            }
        }
        if self.ego.digest() != before {
            self.trace.purity_violations += 1;
        }
        self.trace.attacker_phase_count += 1;
        Ok(())
    }

    /// `rounds` epsilon-greedy rollouts against each adversary, then TD
    /// updates; adversary parameters must come out unchanged.
    fn ego_phase(&mut self, adversaries: &mut [&mut dyn Adversary], rounds: usize) -> Result<(), TrainError> {
        let before: Vec<Option<String>> = adversaries.iter().map(|a| a.digest()).collect();
        for _ in 0..rounds {
            for adv in adversaries.iter_mut() {
                let eps = self.schedule.value(self.ego_episodes);
                let t = collect_traj(&self.ego, &mut **adv, &mut self.lpa, eps, self.cfg.gamma, &mut self.rng)?;
                self.record(&t);
                self.replay.push(t.ego);
                self.ego_episodes += 1;
            }
        }
        for _ in 0..self.cfg.ego_updates_per_phase {
            if self.replay.is_empty() {
                break;
            }
            let episodes = self.replay.sample(self.cfg.ego.batch_episodes, &mut self.rng);
            let batch = self.ego.prepare_batch(&episodes, self.cfg.gamma)?;
            let loss = self.ego.train_step(&batch)?;
            self.trace.ego_losses.push(loss);
        }
        let after: Vec<Option<String>> = adversaries.iter().map(|a| a.digest()).collect();
        if before != after {
            self.trace.purity_violations += 1;
        }
        self.trace.ego_phase_count += 1;
        Ok(())
    }

    fn should(&self, generation: usize, interval: usize) -> bool {
        let last = generation + 1 == self.cfg.generations;
        last || (interval > 0 && (generation + 1) % interval == 0)
    }

    /// Natural and random-attack snapshots on a separate random stream.
    fn evaluate(&mut self, generation: usize) -> Result<(), TrainError> {
        if !self.should(generation, self.cfg.eval_interval) {
            return Ok(());
        }
        let n = self.n_agents();
        let limit = self.eval_lpa.env().spec().episode_limit;
        let protocols: [(&str, Box<dyn Adversary>); 2] = [
            ("natural", Box::new(NullAdversary { n_agents: n })),
            ("random", Box::new(RandomAdversary::for_budget(n, self.cfg.budget, limit))),
        ];
        for (name, mut adv) in protocols {
            let s = evaluate_policy(
                &self.ego,
                adv.as_mut(),
                &mut self.eval_lpa,
                self.cfg.eval_episodes,
                self.cfg.gamma,
                &mut self.eval_rng,
            )?;
            self.metrics.push(MetricRecord {
                schema_version: METRICS_SCHEMA_VERSION,
                method: self.cfg.method.name().to_string(),
                seed: self.cfg.seed,
                generation: generation + 1,
                protocol: name.to_string(),
                win_rate: s.win_rate,
                mean_return: s.mean_return,
                ci_half_width: s.ci_half_width,
                episodes: s.episodes,
            });
        }
        Ok(())
    }

    /// `<out>/<seed>/gen<g>/{ego.ckpt, archive/ or attackers/, metrics.csv}`.
    fn checkpoint(&self, generation: usize, archive: Option<&Archive>, attackers: &[AttackerNetwork]) -> Result<(), TrainError> {
        let Some(out) = self.out else {
            return Ok(());
        };
        if !self.should(generation, self.cfg.checkpoint_interval) {
            return Ok(());
        }
        let dir = out.join(self.cfg.seed.to_string()).join(format!("gen{}", generation + 1));
        fs::create_dir_all(&dir)?;
        self.ego.save(dir.join("ego.ckpt"))?;
        if let Some(a) = archive {
            a.save(dir.join("archive"))?;
            a.write_distance_csv(fs::File::create(dir.join("distances.csv"))?)?;
        }
        if !attackers.is_empty() {
            let adir = dir.join("attackers");
            fs::create_dir_all(&adir)?;
            for (i, a) in attackers.iter().enumerate() {
                fs::write(adir.join(format!("attacker_{i:02}.json")), a.to_json()?)?;
            }
        }
        write_metrics_csv(&self.metrics, fs::File::create(dir.join("metrics.csv"))?)?;
        Ok(())
    }

    fn finish(self, archive: Option<Archive>, attackers: Vec<AttackerNetwork>) -> TrainOutcome {
        TrainOutcome {
            ego: self.ego,
            archive,
            attackers,
            metrics: self.metrics,
            trace: self.trace,
        }
    }
}

fn scalars(attackers: &[AttackerNetwork]) -> usize {
    attackers.iter().map(|a| a.params().num_scalars()).sum()
}

/// Population drawn from an evolving archive each generation.
pub fn train_romance(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    let mut run = Run::new(cfg, out)?;
    let mut archive = Archive::new(cfg.archive_capacity, cfg.distance_threshold)?;
    for _ in 0..cfg.population {
        let a = run.new_attacker()?;
        run.trace.initial_attacker_digests.push(a.digest());
        archive.seed(a, 0.0);
    }
    for generation in 0..cfg.generations {
        let selected = archive.select(cfg.population, &mut run.rng)?;
        for &i in &selected {
            let entry = &mut archive.entries_mut()[i];
            entry.quality = quality(
                &mut entry.attacker,
                &run.ego,
                &mut run.lpa,
                cfg.quality_episodes,
                cfg.gamma,
                &mut run.rng,
            )?
            .mean;
        }
        let mut population: Vec<AttackerNetwork> =
            selected.iter().map(|&i| archive.entries()[i].attacker.clone()).collect();
        run.trace.attacker_scalars.push(scalars(&population));

        for _ in 0..cfg.attacker_phases {
            run.attacker_phase(&mut population, true)?;
        }
        for _ in 0..cfg.ego_phases {
            let mut advs: Vec<&mut dyn Adversary> = population.iter_mut().map(|a| a as &mut dyn Adversary).collect();
            run.ego_phase(&mut advs, 1)?;
        }

        let mut scored = Vec::with_capacity(population.len());
        for mut a in population {
            let q = quality(&mut a, &run.ego, &mut run.lpa, cfg.quality_episodes, cfg.gamma, &mut run.rng)?.mean;
            scored.push((a, q));
        }
        let outcomes = archive.update_archive(scored, &mut run.rng);
        run.trace.archive_outcomes.extend(outcomes);
        run.trace.archive_sizes.push(archive.len());
        run.evaluate(generation)?;
        run.checkpoint(generation, Some(&archive), &[])?;
    }
    Ok(run.finish(Some(archive), Vec::new()))
}

/// One persistent attacker trained on its own soft Q loss.
pub fn train_rarl(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    let mut run = Run::new(cfg, out)?;
    let mut attackers = vec![run.new_attacker()?];
    run.trace.initial_attacker_digests.push(attackers[0].digest());
    for generation in 0..cfg.generations {
        run.trace.attacker_scalars.push(scalars(&attackers));
        for _ in 0..cfg.attacker_phases {
            run.attacker_phase(&mut attackers, false)?;
        }
        for _ in 0..cfg.ego_phases {
            let mut advs: Vec<&mut dyn Adversary> = vec![&mut attackers[0]];
            run.ego_phase(&mut advs, cfg.episodes_per_ego_phase())?;
        }
        run.evaluate(generation)?;
        run.checkpoint(generation, None, &attackers)?;
    }
    Ok(run.finish(None, attackers))
}

/// Fixed, independently initialised population; no archive, no diversity.
pub fn train_rap(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    let mut run = Run::new(cfg, out)?;
    let mut population = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        population.push(run.new_attacker()?);
    }
    run.trace.initial_attacker_digests = population.iter().map(|a| a.digest()).collect();
    for generation in 0..cfg.generations {
        run.trace.attacker_scalars.push(scalars(&population));
        for _ in 0..cfg.attacker_phases {
            run.attacker_phase(&mut population, false)?;
        }
        for _ in 0..cfg.ego_phases {
            let mut advs: Vec<&mut dyn Adversary> = population.iter_mut().map(|a| a as &mut dyn Adversary).collect();
            run.ego_phase(&mut advs, 1)?;
        }
        run.evaluate(generation)?;
        run.checkpoint(generation, None, &population)?;
    }
    Ok(run.finish(None, population))
}

fn train_without_attacker_updates(cfg: &TrainConfig, out: Option<&Path>, random: bool) -> Result<TrainOutcome, TrainError> {
    let mut run = Run::new(cfg, out)?;
    let n = run.n_agents();
    let limit = run.lpa.env().spec().episode_limit;
    let mut adv: Box<dyn Adversary> = if random {
        Box::new(RandomAdversary::for_budget(n, cfg.budget, limit))
    } else {
        Box::new(NullAdversary { n_agents: n })
    };
    for generation in 0..cfg.generations {
        for _ in 0..cfg.ego_phases {
            let mut advs: Vec<&mut dyn Adversary> = vec![adv.as_mut()];
            run.ego_phase(&mut advs, cfg.episodes_per_ego_phase())?;
        }
        run.evaluate(generation)?;
        run.checkpoint(generation, None, &[])?;
    }
    Ok(run.finish(None, Vec::new()))
}

/// Random victims at rate `K/T` during training.
pub fn train_random(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    train_without_attacker_updates(cfg, out, true)
}

/// No attacks during training.
pub fn train_vanilla(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    train_without_attacker_updates(cfg, out, false)
}

pub fn train(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    match cfg.method {
        Method::Romance => train_romance(cfg, out),
        Method::Rarl => train_rarl(cfg, out),
        Method::Rap => train_rap(cfg, out),
        Method::Random => train_random(cfg, out),
        Method::Vanilla => train_vanilla(cfg, out),
    }
}

/// One attacker phase against a frozen ego: a rollout per member, then
/// either the population loss or independent SPRQ steps.
fn frozen_attacker_phase<R: Rng>(
    cfg: &TrainConfig,
    ego: &EgoNetwork,
    population: &mut [AttackerNetwork],
    lpa: &mut LpaEnv,
    population_loss: bool,
    rng: &mut R,
) -> Result<(), TrainError> {
    for m in population.iter_mut() {
        let t = collect_traj(ego, m, lpa, 0.0, cfg.gamma, rng)?;
        m.replay_mut().extend(t.adversary);
    }
    let mut batches = Vec::with_capacity(population.len());
    for m in population.iter() {
        let ts = m.replay().sample(cfg.attacker.batch_size, rng);
        batches.push(m.prepare_batch(&ts, cfg.gamma)?);
    }
    if population_loss {
        let points = {
            let bufs: Vec<_> = population.iter().map(|m| m.points()).collect();
            points_tensor(&sample_attack_points(&bufs, cfg.attacker.diversity_samples, rng))
        };
        population_step(population, &batches, points.as_ref(), cfg.attacker.alpha)?;
    } else {
        for (m, b) in population.iter_mut().zip(&batches) {
            m.sprq_step(b)?;
        }
    }
    Ok(())
}

/// Fresh attackers trained against a frozen ego with the population loss,
/// filtered through an archive; used to build held-out evaluation sets.
pub fn generate_attackers(
    cfg: &TrainConfig,
    ego: &EgoNetwork,
    generations: usize,
) -> Result<Archive, TrainError> {
    cfg.validate()?;
    let env = cfg.env.build()?;
    let spec = env.spec().clone();
    let mut lpa = LpaEnv::new(env, cfg.budget);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut archive = Archive::new(cfg.archive_capacity, cfg.distance_threshold)?;
    for _ in 0..cfg.population {
        archive.seed(AttackerNetwork::new(spec.n_agents, spec.state_len, cfg.attacker.clone(), &mut rng)?, 0.0);
    }
    for _ in 0..generations {
        let selected = archive.select(cfg.population, &mut rng)?;
        let mut population: Vec<AttackerNetwork> =
            selected.iter().map(|&i| archive.entries()[i].attacker.clone()).collect();
        for _ in 0..cfg.attacker_phases {
            frozen_attacker_phase(cfg, ego, &mut population, &mut lpa, true, &mut rng)?;
        }
        let mut scored = Vec::with_capacity(population.len());
        for mut a in population {
            let q = quality(&mut a, ego, &mut lpa, cfg.quality_episodes, cfg.gamma, &mut rng)?.mean;
            scored.push((a, q));
        }
        archive.update_archive(scored, &mut rng);
    }
    // final scores against the frozen ego, from the same stream
    for e in archive.entries_mut() {
        e.quality = quality(&mut e.attacker, ego, &mut lpa, cfg.quality_episodes, cfg.gamma, &mut rng)?.mean;
    }
    Ok(archive)
}

/// A fixed population of `cfg.population` attackers, each trained with its
/// own SPRQ loss against a frozen ego for the same number of phases
/// `generate_attackers` would use.
pub fn generate_fixed_population(
    cfg: &TrainConfig,
    ego: &EgoNetwork,
    generations: usize,
) -> Result<Vec<AttackerNetwork>, TrainError> {
    cfg.validate()?;
    let env = cfg.env.build()?;
    let spec = env.spec().clone();
    let mut lpa = LpaEnv::new(env, cfg.budget);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population = (0..cfg.population)
        .map(|_| AttackerNetwork::new(spec.n_agents, spec.state_len, cfg.attacker.clone(), &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    for _ in 0..generations * cfg.attacker_phases {
        frozen_attacker_phase(cfg, ego, &mut population, &mut lpa, false, &mut rng)?;
    }
    Ok(population)
}
