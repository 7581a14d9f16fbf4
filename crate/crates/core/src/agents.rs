//! Closed-loop agents that plan, act and (optionally) learn one episode at a
//! time without ever resetting the robot.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gp::{GpConfig, GpError, Outcome, OutcomeModel};
use crate::planner::{mcts_search, ActionSet, MctsConfig, Task};
use crate::repertoire::Repertoire;
use crate::sim::{run_episode, target_reached, Arena, DamageModel, Pose, SimError, WheelCommand};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent {0} needs a non-empty repertoire")]
    MissingRepertoire(AgentKind),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Repertoire actions, GP-corrected outcomes, stochastic planning.
    Rte,
    /// GPs over raw wheel commands with a zero prior, deterministic planning.
    GpTexplore,
    /// Repertoire priors only, no learning.
    MctsOnly,
    /// Intact robot, repertoire priors, deterministic planning.
    IntactReference,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Rte,
        AgentKind::GpTexplore,
        AgentKind::MctsOnly,
        AgentKind::IntactReference,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Rte => "rte",
            AgentKind::GpTexplore => "gp-texplore",
            AgentKind::MctsOnly => "mcts",
            AgentKind::IntactReference => "intact",
        }
    }

    pub fn uses_repertoire(&self) -> bool {
        !matches!(self, AgentKind::GpTexplore)
    }

    fn learns(&self) -> bool {
        matches!(self, AgentKind::Rte | AgentKind::GpTexplore)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rte" => Ok(AgentKind::Rte),
            "gp-texplore" | "gp_texplore" => Ok(AgentKind::GpTexplore),
            "mcts" | "mcts-only" | "mcts_only" => Ok(AgentKind::MctsOnly),
            "intact" => Ok(AgentKind::IntactReference),
            other => Err(format!("unknown agent `{other}` (expected rte, gp-texplore, mcts or intact)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub mcts: MctsConfig,
    pub gp: GpConfig,
    /// Episodes allowed per target before giving up on it.
    pub target_cap: usize,
    /// Random wheel commands offered to the GP-TEXPLORE planner per episode.
    pub texplore_pool: usize,
    /// Steer GP-TEXPLORE action sampling with A* once it has data.
    pub texplore_guided: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mcts: MctsConfig::default(),
            gp: GpConfig::default(),
            target_cap: 100,
            texplore_pool: 400,
            texplore_guided: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub target: usize,
    pub before: Pose,
    pub after: Pose,
    /// Repertoire cell, when the action came from the repertoire.
    pub action: Option<usize>,
    pub command: WheelCommand,
    pub outcome: Outcome,
    pub collided: bool,
    pub planning_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetResult {
    pub target: usize,
    pub episodes: usize,
    pub reached: bool,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub kind: AgentKind,
    pub episodes: Vec<EpisodeLog>,
    pub targets: Vec<TargetResult>,
    /// Observations held by the outcome model at the end of the run.
    pub model_size: usize,
}

/// Runs `kind` through `targets` in order, starting at `start`.
#[allow(clippy::too_many_arguments)]
pub fn run_agent(
    kind: AgentKind,
    repertoire: Option<&Repertoire>,
    damage: DamageModel,
    arena: &Arena,
    start: Pose,
    targets: &[(f64, f64)],
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RunLog, AgentError> {
    cfg.mcts.validate().map_err(AgentError::Config)?;
    let repertoire = match repertoire {
        Some(r) if !r.is_empty() => Some(r),
        _ if kind.uses_repertoire() => return Err(AgentError::MissingRepertoire(kind)),
        _ => None,
    };
    let damage = if kind == AgentKind::IntactReference {
        DamageModel::INTACT
    } else {
        damage
    };
    let mut mcts = cfg.mcts;
    mcts.stochastic = matches!(kind, AgentKind::Rte | AgentKind::MctsOnly);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = OutcomeModel::new(cfg.gp)?;
    // the repertoire agents re-predict only when the model changes
    let mut cached: Option<ActionSet> = None;
    let mut pose = start;
    let mut log = RunLog {
        kind,
        episodes: Vec::new(),
        targets: Vec::with_capacity(targets.len()),
        model_size: 0,
    };

    for (ti, &target) in targets.iter().enumerate() {
        let task = Task::new(target, arena.clone());
        let mut count = 0;
        while !target_reached(&pose, target) && count < cfg.target_cap {
            let episode_seed: u64 = rng.random();
            let timer = Instant::now();
            let pool_set;
            let set = match repertoire {
                Some(rep) => &*cached.get_or_insert_with(|| ActionSet::from_repertoire(rep, &model, mcts.stochastic)),
                None => {
                    let pool: Vec<WheelCommand> = (0..cfg.texplore_pool.max(1))
                        .map(|_| WheelCommand::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                        .collect();
                    mcts.guided = cfg.texplore_guided && !model.is_empty();
                    pool_set = ActionSet::from_commands(&pool, &model, false);
                    &pool_set
                }
            };
            let choice = mcts_search(pose, set, &task, &mcts, episode_seed);
            let planning_time = timer.elapsed();
            let cand = *set.candidate(choice.action);
            let ep = run_episode(pose, cand.controller, damage, arena)?;
            if kind.learns() {
                model.update(cand.input, &cand.prior, &ep.outcome)?;
                cached = None;
            }
            log.episodes.push(EpisodeLog {
                episode: log.episodes.len(),
                target: ti,
                before: pose,
                after: ep.final_pose,
                action: repertoire.map(|_| cand.id),
                command: cand.controller,
                outcome: ep.outcome,
                collided: ep.collided,
                planning_time,
            });
            pose = ep.final_pose;
            count += 1;
        }
        log.targets.push(TargetResult {
            target: ti,
            episodes: count,
            reached: target_reached(&pose, target),
        });
    }
    log.model_size = model.len();
    Ok(log)
}

pub fn rte_run(
    repertoire: &Repertoire,
    damage: DamageModel,
    arena: &Arena,
    start: Pose,
    targets: &[(f64, f64)],
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RunLog, AgentError> {
    run_agent(AgentKind::Rte, Some(repertoire), damage, arena, start, targets, cfg, seed)
}

pub fn gp_texplore_run(
    damage: DamageModel,
    arena: &Arena,
    start: Pose,
    targets: &[(f64, f64)],
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RunLog, AgentError> {
    run_agent(AgentKind::GpTexplore, None, damage, arena, start, targets, cfg, seed)
}

pub fn mcts_only_run(
    repertoire: &Repertoire,
    damage: DamageModel,
    arena: &Arena,
    start: Pose,
    targets: &[(f64, f64)],
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RunLog, AgentError> {
    run_agent(AgentKind::MctsOnly, Some(repertoire), damage, arena, start, targets, cfg, seed)
}

pub fn intact_reference_run(
    repertoire: &Repertoire,
    arena: &Arena,
    start: Pose,
    targets: &[(f64, f64)],
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RunLog, AgentError> {
    run_agent(
        AgentKind::IntactReference,
        Some(repertoire),
        DamageModel::INTACT,
        arena,
        start,
        targets,
        cfg,
        seed,
    )
}
