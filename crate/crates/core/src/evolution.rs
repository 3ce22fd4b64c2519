//! Quality-diversity archive of attackers.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{jsd, points_tensor, Adversary, AttackerError, AttackerNetwork};
use crate::ego::EgoPolicy;
use crate::lpa::LpaEnv;
use crate::rollout::{collect_traj, RolloutError};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;
const INDEX_FILE: &str = "index.json";

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("cannot select from an empty archive")]
    EmptyArchive,
    #[error("archive capacity must be at least 1")]
    ZeroCapacity,
    #[error("quality needs at least one episode")]
    NoEpisodes,
    #[error("unsupported archive format version {0}")]
    UnsupportedVersion(u32),
    #[error("entry {file}: {reason}")]
    Entry { file: String, reason: String },
    #[error(transparent)]
    Attacker(#[from] AttackerError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Monte-Carlo mean of the attacker's discounted return.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub episodes: usize,
}

/// Greedy ego, sampling adversary, fresh episodes.
pub fn quality(
    adversary: &mut dyn Adversary,
    ego: &dyn EgoPolicy,
    lpa: &mut LpaEnv,
    episodes: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<QualityEstimate, EvolutionError> {
    if episodes == 0 {
        return Err(EvolutionError::NoEpisodes);
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        returns.push(collect_traj(ego, adversary, lpa, 0.0, gamma, rng)?.stats.attacker_return);
    }
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if episodes > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(QualityEstimate { mean, std_err: (var / n).sqrt(), episodes })
}

/// Mean two-policy JSD over the union of both attack-point buffers; 0 when
/// both are empty.
pub fn behavior_distance(a: &AttackerNetwork, b: &AttackerNetwork) -> f64 {
    let points: Vec<_> = a.points().iter().chain(b.points().iter()).collect();
    let Some(rows) = points_tensor(&points) else {
        return 0.0;
    };
    let smoothing = a.config().smoothing;
    let (pa, pb) = (a.policies(&rows), b.policies(&rows));
    let total: f64 = (0..rows.rows())
        .map(|r| jsd(&[pa.row(r).to_vec(), pb.row(r).to_vec()], smoothing).expect("same action count"))
        .sum();
    total / rows.rows() as f64
}

#[derive(Clone, Debug)]
pub struct ArchiveEntry {
    pub attacker: AttackerNetwork,
    pub quality: f64,
    /// Insertion counter; larger is newer.
    pub age: u64,
    /// Distance to the nearest entry when this one was inserted, `None` if
    /// the archive was empty.
    pub insert_min_distance: Option<f64>,
    /// Added through the distance threshold rather than the coin flip.
    pub admitted_by_threshold: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// Appended; `evicted` is the age of the entry dropped to stay in capacity.
    Added { evicted: Option<u64> },
    /// Won the coin flip and took the nearest entry's slot.
    Replaced { replaced: u64 },
    /// Lost the coin flip.
    Discarded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct IndexEntry {
    file: String,
    age: u64,
    quality: f64,
    param_digest: String,
    buffer_digest: String,
    insert_min_distance: Option<f64>,
    admitted_by_threshold: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArchiveIndex {
    format_version: u32,
    capacity: usize,
    threshold: f64,
    next_age: u64,
    entries: Vec<IndexEntry>,
}

#[derive(Clone, Debug)]
pub struct Archive {
    capacity: usize,
    threshold: f64,
    entries: Vec<ArchiveEntry>,
    next_age: u64,
}

impl Archive {
    pub fn new(capacity: usize, threshold: f64) -> Result<Self, EvolutionError> {
        if capacity == 0 {
            return Err(EvolutionError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            threshold,
            entries: Vec::new(),
            next_age: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ArchiveEntry] {
        &mut self.entries
    }

    fn fresh_age(&mut self) -> u64 {
        self.next_age += 1;
        self.next_age - 1
    }

    fn nearest(&self, attacker: &AttackerNetwork) -> Option<(usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, behavior_distance(attacker, &e.attacker)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Offers one attacker to the archive.
    pub fn insert(&mut self, attacker: AttackerNetwork, quality: f64, rng: &mut impl Rng) -> UpdateOutcome {
        let nearest = self.nearest(&attacker);
        match nearest {
            Some((i, d)) if d < self.threshold => {
                if rng.gen::<bool>() {
                    let age = self.fresh_age();
                    let replaced = self.entries[i].age;
                    self.entries[i] = ArchiveEntry {
                        attacker,
                        quality,
                        age,
                        insert_min_distance: Some(d),
                        admitted_by_threshold: false,
                    };
                    UpdateOutcome::Replaced { replaced }
                } else {
                    UpdateOutcome::Discarded
                }
            }
            _ => {
                let age = self.fresh_age();
                self.entries.push(ArchiveEntry {
                    attacker,
                    quality,
                    age,
                    insert_min_distance: nearest.map(|(_, d)| d),
                    admitted_by_threshold: true,
                });
                let evicted = (self.entries.len() > self.capacity).then(|| {
                    let oldest = (0..self.entries.len()).min_by_key(|&i| self.entries[i].age).expect("nonempty");
                    self.entries.remove(oldest).age
                });
                UpdateOutcome::Added { evicted }
            }
        }
    }

    /// Adds an entry without a distance check, evicting the oldest when full.
    pub fn seed(&mut self, attacker: AttackerNetwork, quality: f64) {
        let age = self.fresh_age();
        self.entries.push(ArchiveEntry {
            attacker,
            quality,
            age,
            insert_min_distance: None,
            admitted_by_threshold: false,
        });
        if self.entries.len() > self.capacity {
            let oldest = (0..self.entries.len()).min_by_key(|&i| self.entries[i].age).expect("nonempty");
            self.entries.remove(oldest);
        }
    }

    /// Offers each new attacker in turn.
    pub fn update_archive(
        &mut self,
        new_attackers: Vec<(AttackerNetwork, f64)>,
        rng: &mut impl Rng,
    ) -> Vec<UpdateOutcome> {
        new_attackers.into_iter().map(|(a, q)| self.insert(a, q, rng)).collect()
    }

    /// Rank weights `m − r + 1` by descending quality, ties sharing their
    /// average rank.
    pub fn rank_weights(&self) -> Vec<f64> {
        let m = self.entries.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.entries[b].quality.total_cmp(&self.entries[a].quality));
        let mut weights = vec![0.0; m];
        let mut start = 0;
        while start < m {
            let q = self.entries[order[start]].quality;
            let mut end = start + 1;
            while end < m && self.entries[order[end]].quality == q {
                end += 1;
            }
            let rank = (start + 1 + end) as f64 / 2.0;
            for &i in &order[start..end] {
                weights[i] = m as f64 - rank + 1.0;
            }
            start = end;
        }
        weights
    }

    /// Indices of `n_p` entries: weighted without replacement, then with
    /// replacement for any shortfall.
    pub fn select(&self, n_p: usize, rng: &mut impl Rng) -> Result<Vec<usize>, EvolutionError> {
        if n_p == 0 {
            return Err(EvolutionError::EmptyPopulation);
        }
        if self.entries.is_empty() {
            return Err(EvolutionError::EmptyArchive);
        }
        let weights = self.rank_weights();
        let m = weights.len();
        let mut chosen: Vec<usize> = rand::seq::index::sample_weighted(rng, m, |i| weights[i], n_p.min(m))
            .expect("positive weights")
            .into_vec();
        if n_p > m {
            let dist = WeightedIndex::new(&weights).expect("positive weights");
            chosen.extend((0..n_p - m).map(|_| dist.sample(rng)));
        }
        Ok(chosen)
    }

    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.entries.len();
        let mut d = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let v = behavior_distance(&self.entries[i].attacker, &self.entries[j].attacker);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    /// Square CSV labelled by entry age.
    pub fn write_distance_csv<W: Write>(&self, writer: W) -> Result<(), EvolutionError> {
        let mut w = csv::Writer::from_writer(writer);
        let labels: Vec<String> = self.entries.iter().map(|e| format!("a{}", e.age)).collect();
        let mut header = vec!["entry".to_string()];
        header.extend(labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in labels.iter().zip(self.distance_matrix()) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON checkpoint per entry plus an index.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), EvolutionError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut index = Vec::new();
        for e in &self.entries {
            let file = format!("attacker_{:06}.json", e.age);
            fs::write(dir.join(&file), e.attacker.to_json()?)?;
            index.push(IndexEntry {
                file,
                age: e.age,
                quality: e.quality,
                param_digest: e.attacker.digest(),
                buffer_digest: e.attacker.points().digest(),
                insert_min_distance: e.insert_min_distance,
                admitted_by_threshold: e.admitted_by_threshold,
            });
        }
        let index = ArchiveIndex {
            format_version: ARCHIVE_FORMAT_VERSION,
            capacity: self.capacity,
            threshold: self.threshold,
            next_age: self.next_age,
            entries: index,
        };
        fs::write(dir.join(INDEX_FILE), serde_json::to_string_pretty(&index)?)?;
        Ok(())
    }

    /// Loads and verifies the digests recorded in the index.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EvolutionError> {
        let dir = dir.as_ref();
        let index: ArchiveIndex = serde_json::from_str(&fs::read_to_string(dir.join(INDEX_FILE))?)?;
        if index.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(EvolutionError::UnsupportedVersion(index.format_version));
        }
        let mut entries = Vec::with_capacity(index.entries.len());
        for e in index.entries {
            let attacker = AttackerNetwork::from_json(&fs::read_to_string(dir.join(&e.file))?)?;
            if attacker.digest() != e.param_digest || attacker.points().digest() != e.buffer_digest {
                return Err(EvolutionError::Entry { file: e.file, reason: "digest mismatch".into() });
            }
            entries.push(ArchiveEntry {
                attacker,
                quality: e.quality,
                age: e.age,
                insert_min_distance: e.insert_min_distance,
                admitted_by_threshold: e.admitted_by_threshold,
            });
        }
        Ok(Self {
            capacity: index.capacity,
            threshold: index.threshold,
            entries,
            next_age: index.next_age,
        })
    }
}
