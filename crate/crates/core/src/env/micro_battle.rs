//! Grid combat: a team of learning allies against scripted enemies.
//!
//! Ally actions are `no-op, stay, up, down, left, right, attack-enemy-j`.
//! `up` decreases the row index. Within a tick all ally actions resolve
//! first (in agent order, deaths applied immediately), then every living
//! enemy acts according to [`MicroBattle::scripted_enemy_policy`].

use serde::{Deserialize, Serialize};

use super::{check_actions, EnvError, EnvObservation, EnvSpec, Environment, StepInfo, StepResult};

pub const NOOP: usize = 0;
pub const STAY: usize = 1;
pub const FIRST_MOVE: usize = 2;
pub const FIRST_ATTACK: usize = 6;

const KILL_BONUS: f64 = 10.0;
const WIN_BONUS: f64 = 200.0;
/// Maximum episode return after scaling.
const NORMALIZED_MAX_RETURN: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroBattleConfig {
    pub grid: usize,
    pub n_allies: usize,
    pub n_enemies: usize,
    pub hp: i32,
    pub damage: i32,
    /// Chebyshev distance within which attacks are possible.
    pub attack_range: i32,
    /// Euclidean radius within which units are visible.
    pub sight_radius: f64,
    pub episode_limit: usize,
}

impl Default for MicroBattleConfig {
    fn default() -> Self {
        Self {
            grid: 8,
            n_allies: 3,
            n_enemies: 3,
            hp: 10,
            damage: 2,
            attack_range: 1,
            sight_radius: 3.0,
            episode_limit: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub x: i32,
    pub y: i32,
    pub hp: i32,
}

impl Unit {
    pub fn alive(&self) -> bool {
        self.hp > 0
    }

    fn chebyshev(&self, other: &Unit) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    fn manhattan(&self, other: &Unit) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    /// Preference order used by the scripted enemies.
    pub const ORDER: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnemyAction {
    Stay,
    Move(Direction),
    Attack(usize),
}

#[derive(Clone, Debug)]
pub struct MicroBattle {
    config: MicroBattleConfig,
    spec: EnvSpec,
    allies: Vec<Unit>,
    enemies: Vec<Unit>,
    t: usize,
    done: bool,
}

impl MicroBattle {
    pub fn new(config: MicroBattleConfig) -> Result<Self, EnvError> {
        if config.grid < 2 || config.n_allies == 0 || config.n_enemies == 0 {
            return Err(EnvError::Config("grid ≥ 2 and at least one unit per side".into()));
        }
        if config.n_allies > config.grid || config.n_enemies > config.grid {
            return Err(EnvError::Config("each side must fit in one grid column".into()));
        }
        if config.hp <= 0 || config.damage <= 0 || config.episode_limit == 0 {
            return Err(EnvError::Config("hp, damage and episode_limit must be positive".into()));
        }
        let n_units = config.n_allies + config.n_enemies;
        let max_return = config.n_enemies as f64 * (config.hp as f64 + KILL_BONUS) + WIN_BONUS;
        let spec = EnvSpec {
            n_agents: config.n_allies,
            n_actions: FIRST_ATTACK + config.n_enemies,
            obs_len: 1 + 3 * (n_units - 1),
            state_len: 3 * n_units,
            episode_limit: config.episode_limit,
            reward_scale: max_return / NORMALIZED_MAX_RETURN,
            default_gamma: 0.99,
        };
        let mut env = Self {
            config,
            spec,
            allies: Vec::new(),
            enemies: Vec::new(),
            t: 0,
            done: false,
        };
        env.place_default_layout();
        Ok(env)
    }

    /// Builds an environment in an arbitrary mid-episode layout.
    pub fn with_layout(config: MicroBattleConfig, allies: Vec<Unit>, enemies: Vec<Unit>) -> Result<Self, EnvError> {
        if allies.len() != config.n_allies || enemies.len() != config.n_enemies {
            return Err(EnvError::Config("layout does not match unit counts".into()));
        }
        let mut env = Self::new(config)?;
        env.allies = allies;
        env.enemies = enemies;
        Ok(env)
    }

    fn place_default_layout(&mut self) {
        let g = self.config.grid as i32;
        let column = |n: usize, x: i32, hp: i32| -> Vec<Unit> {
            let y0 = (g - n as i32) / 2;
            (0..n as i32).map(|i| Unit { x, y: y0 + i, hp }).collect()
        };
        self.allies = column(self.config.n_allies, 0, self.config.hp);
        self.enemies = column(self.config.n_enemies, g - 1, self.config.hp);
        self.t = 0;
        self.done = false;
    }

    pub fn config(&self) -> &MicroBattleConfig {
        &self.config
    }

    pub fn allies(&self) -> &[Unit] {
        &self.allies
    }

    pub fn enemies(&self) -> &[Unit] {
        &self.enemies
    }

    pub fn t(&self) -> usize {
        self.t
    }

    fn in_bounds(&self, x: i32, y: i32) -> bool {
        let g = self.config.grid as i32;
        (0..g).contains(&x) && (0..g).contains(&y)
    }

    fn occupied(&self, x: i32, y: i32) -> bool {
        self.allies
            .iter()
            .chain(&self.enemies)
            .any(|u| u.alive() && u.x == x && u.y == y)
    }

    pub fn masks(&self) -> Vec<Vec<bool>> {
        let n_actions = self.spec.n_actions;
        self.allies
            .iter()
            .map(|a| {
                let mut m = vec![false; n_actions];
                if !a.alive() {
                    m[NOOP] = true;
                    return m;
                }
                m[STAY] = true;
                for (k, d) in Direction::ORDER.iter().enumerate() {
                    let (dx, dy) = d.delta();
                    m[FIRST_MOVE + k] = self.in_bounds(a.x + dx, a.y + dy);
                }
                for (j, e) in self.enemies.iter().enumerate() {
                    m[FIRST_ATTACK + j] = e.alive() && a.chebyshev(e) <= self.config.attack_range;
                }
                m
            })
            .collect()
    }

    pub fn state(&self) -> Vec<f64> {
        let span = (self.config.grid - 1) as f64;
        let hp = self.config.hp as f64;
        self.allies
            .iter()
            .chain(&self.enemies)
            .flat_map(|u| {
                if u.alive() {
                    [u.x as f64 / span, u.y as f64 / span, u.hp as f64 / hp]
                } else {
                    [0.0; 3]
                }
            })
            .collect()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        let hp = self.config.hp as f64;
        let sight = self.config.sight_radius;
        (0..self.allies.len())
            .map(|i| {
                let me = self.allies[i];
                let mut obs = Vec::with_capacity(self.spec.obs_len);
                if !me.alive() {
                    obs.resize(self.spec.obs_len, 0.0);
                    return obs;
                }
                obs.push(me.hp as f64 / hp);
                let others = self
                    .allies
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, u)| u)
                    .chain(&self.enemies);
                for u in others {
                    let (dx, dy) = ((u.x - me.x) as f64, (u.y - me.y) as f64);
                    if u.alive() && (dx * dx + dy * dy).sqrt() <= sight {
                        obs.extend([dx / sight, dy / sight, u.hp as f64 / hp]);
                    } else {
                        obs.extend([0.0; 3]);
                    }
                }
                obs
            })
            .collect()
    }

    /// Each living enemy attacks the lowest-HP adjacent ally (lower index on
    /// ties); otherwise it takes the first move in up/down/left/right order
    /// that shortens the Manhattan distance to the nearest living ally
    /// (lower index on ties) and lands on a free in-bounds cell; otherwise
    /// it stays.
    pub fn scripted_enemy_policy(&self) -> Vec<EnemyAction> {
        self.enemies
            .iter()
            .map(|e| {
                if !e.alive() || !self.allies.iter().any(Unit::alive) {
                    return EnemyAction::Stay;
                }
                let adjacent = self
                    .allies
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.alive() && e.chebyshev(a) <= self.config.attack_range)
                    .min_by_key(|&(j, a)| (a.hp, j));
                if let Some((j, _)) = adjacent {
                    return EnemyAction::Attack(j);
                }
                let target = self
                    .allies
                    .iter()
                    .filter(|a| a.alive())
                    .min_by_key(|a| e.manhattan(a))
                    .expect("some ally alive");
                let current = e.manhattan(target);
                Direction::ORDER
                    .iter()
                    .copied()
                    .find(|d| {
                        let (dx, dy) = d.delta();
                        let moved = Unit { x: e.x + dx, y: e.y + dy, hp: e.hp };
                        self.in_bounds(moved.x, moved.y)
                            && !self.occupied(moved.x, moved.y)
                            && moved.manhattan(target) < current
                    })
                    .map_or(EnemyAction::Stay, EnemyAction::Move)
            })
            .collect()
    }

    fn try_move(&mut self, ally: bool, idx: usize, d: Direction) {
        let u = if ally { self.allies[idx] } else { self.enemies[idx] };
        let (dx, dy) = d.delta();
        let (x, y) = (u.x + dx, u.y + dy);
        if self.in_bounds(x, y) && !self.occupied(x, y) {
            let unit = if ally { &mut self.allies[idx] } else { &mut self.enemies[idx] };
            unit.x = x;
            unit.y = y;
        }
    }
}

impl Environment for MicroBattle {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> EnvObservation {
        self.place_default_layout();
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        check_actions(&self.masks(), actions)?;

        let mut damage = 0;
        let mut kills = 0;
        for (i, &a) in actions.iter().enumerate() {
            if !self.allies[i].alive() {
                continue;
            }
            match a {
                NOOP | STAY => {}
                a if a < FIRST_ATTACK => self.try_move(true, i, Direction::ORDER[a - FIRST_MOVE]),
                a => {
                    let target = &mut self.enemies[a - FIRST_ATTACK];
                    let dealt = self.config.damage.min(target.hp.max(0));
                    if dealt > 0 {
                        target.hp -= dealt;
                        damage += dealt;
                        if target.hp <= 0 {
                            kills += 1;
                        }
                    }
                }
            }
        }

        let won = self.enemies.iter().all(|e| !e.alive());
        if !won {
            for (j, act) in self.scripted_enemy_policy().into_iter().enumerate() {
                if !self.enemies[j].alive() {
                    continue;
                }
                match act {
                    EnemyAction::Stay => {}
                    EnemyAction::Move(d) => self.try_move(false, j, d),
                    EnemyAction::Attack(i) => {
                        let ally = &mut self.allies[i];
                        if ally.alive() {
                            ally.hp -= self.config.damage.min(ally.hp);
                        }
                    }
                }
            }
        }

        self.t += 1;
        let lost = self.allies.iter().all(|a| !a.alive());
        let capped = self.t >= self.config.episode_limit;
        self.done = won || lost || capped;
        let raw = damage as f64 + KILL_BONUS * kills as f64 + if won { WIN_BONUS } else { 0.0 };
        let obs = self.observe();
        Ok(StepResult {
            state: obs.state,
            observations: obs.observations,
            masks: obs.masks,
            reward: raw / self.spec.reward_scale,
            done: self.done,
            info: StepInfo {
                kills,
                damage: damage as f64,
                won,
                timed_out: capped && !won && !lost,
            },
        })
    }

    fn observe(&self) -> EnvObservation {
        EnvObservation {
            state: self.state(),
            observations: self.observations(),
            masks: self.masks(),
        }
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
