//! Replicated agent runs: target generation, execution and CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::config::ExperimentConfig;
use super::stats::{RunStats, StatsError, PERCENTILE_METHOD};
use crate::agents::{run_agent, AgentError, RunLog};
use crate::repertoire::{Repertoire, RepertoireError};
use crate::sim::{check_collision, Arena};

/// Targets keep this far from the walls.
pub const WALL_MARGIN: f64 = 40.0;
/// ... and this far from obstacle centers.
pub const OBSTACLE_CLEARANCE: f64 = 60.0;
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no valid target after {MAX_REJECTIONS} draws; arena too constrained for spacing {spacing}")]
    TargetsUnplaceable { spacing: f64 },
    #[error("start pose ({x}, {y}) is outside the arena or in collision")]
    BadStart { x: f64, y: f64 },
    #[error(transparent)]
    Repertoire(#[from] RepertoireError),
    #[error("agent {0} needs a repertoire (set `repertoire` or pass --repertoire)")]
    NoRepertoire(crate::agents::AgentKind),
    #[error("replicate {replicate}: {source}")]
    Agent {
        replicate: usize,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn target_ok(arena: &Arena, p: (f64, f64)) -> bool {
    p.0 >= WALL_MARGIN
        && p.0 <= arena.width - WALL_MARGIN
        && p.1 >= WALL_MARGIN
        && p.1 <= arena.height - WALL_MARGIN
        && arena
            .obstacles
            .iter()
            .all(|o| (p.0 - o.x).hypot(p.1 - o.y) >= OBSTACLE_CLEARANCE)
}

/// Chain of `count` targets, each exactly `spacing` from the previous one
/// (the first from `start`) in a uniformly random direction.
pub fn sample_targets<R: Rng + ?Sized>(
    arena: &Arena,
    count: usize,
    spacing: f64,
    start: (f64, f64),
    rng: &mut R,
) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let mut targets = Vec::with_capacity(count);
    let mut prev = start;
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..MAX_REJECTIONS {
            let bearing = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = (prev.0 + spacing * bearing.cos(), prev.1 + spacing * bearing.sin());
            if target_ok(arena, p) {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or(ExperimentError::TargetsUnplaceable { spacing })?;
        targets.push(p);
        prev = p;
    }
    Ok(targets)
}

#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub replicate: usize,
    pub targets: Vec<(f64, f64)>,
    pub log: RunLog,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub stats: RunStats,
    pub runs: Vec<ReplicateRun>,
}

/// Loads the configured repertoire, or `None` for agents that do not use one.
pub fn load_repertoire(cfg: &ExperimentConfig) -> Result<Option<Repertoire>, ExperimentError> {
    if !cfg.agent.uses_repertoire() {
        return Ok(None);
    }
    let path = cfg.repertoire.as_ref().ok_or(ExperimentError::NoRepertoire(cfg.agent))?;
    let rep = Repertoire::load_with_resolution(path, cfg.evolve.resolution)?;
    if rep.is_empty() {
        return Err(ExperimentError::NoRepertoire(cfg.agent));
    }
    Ok(Some(rep))
}

/// One replicate: targets and agent both draw from the replicate seed.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    repertoire: Option<&Repertoire>,
    replicate: usize,
) -> Result<ReplicateRun, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(replicate as u64));
    let targets = sample_targets(
        &cfg.arena,
        cfg.targets,
        cfg.target_spacing,
        cfg.start.position(),
        &mut rng,
    )?;
    let agent_seed: u64 = rng.random();
    let log = run_agent(
        cfg.agent,
        repertoire,
        cfg.damage,
        &cfg.arena,
        cfg.start,
        &targets,
        &cfg.agent_config,
        agent_seed,
    )
    .map_err(|source| ExperimentError::Agent { replicate, source })?;
    Ok(ReplicateRun {
        replicate,
        targets,
        log,
    })
}

/// Runs every replicate (concurrently) and aggregates in replicate order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    repertoire: Option<&Repertoire>,
) -> Result<ExperimentOutput, ExperimentError> {
    let start = cfg.start.position();
    if !cfg.arena.contains(start) || check_collision(start, &cfg.arena) {
        return Err(ExperimentError::BadStart { x: start.0, y: start.1 });
    }
    if cfg.agent.uses_repertoire() && repertoire.is_none_or(|r| r.is_empty()) {
        return Err(ExperimentError::NoRepertoire(cfg.agent));
    }
    let mut runs = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, repertoire, r))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.replicate);
    let episodes = runs
        .iter()
        .map(|r| r.log.targets.iter().map(|t| t.episodes).collect())
        .collect();
    let failed = runs
        .iter()
        .map(|r| r.log.targets.iter().map(|t| !t.reached).collect())
        .collect();
    Ok(ExperimentOutput {
        stats: RunStats::new(episodes, failed)?,
        runs,
    })
}

pub const LOG_HEADER: &str = "episode,target,target_x,target_y,x0,y0,theta0,x1,y1,theta1,action,v_left,v_right,dx,dy,cos_dt,sin_dt,collided";

/// Per-episode log of one replicate. Planning wall time is left out so the
/// file is a pure function of the configuration.
pub fn log_csv(run: &ReplicateRun) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for e in &run.log.episodes {
        let (tx, ty) = run.targets[e.target];
        let action = e.action.map_or_else(|| "-".to_string(), |a| a.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.episode,
            e.target,
            tx,
            ty,
            e.before.x,
            e.before.y,
            e.before.theta,
            e.after.x,
            e.after.y,
            e.after.theta,
            action,
            e.command.v_left,
            e.command.v_right,
            e.outcome.dx,
            e.outcome.dy,
            e.outcome.cos_dt,
            e.outcome.sin_dt,
            u8::from(e.collided)
        );
    }
    out
}

pub fn summary_text(cfg: &ExperimentConfig, stats: &RunStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# percentiles: {PERCENTILE_METHOD}");
    let _ = writeln!(out, "# statistic: median over replicates of mean episodes per target");
    let _ = writeln!(out, "agent: {}", cfg.agent);
    let _ = writeln!(out, "replicates: {}", stats.replicates());
    let _ = writeln!(out, "targets: {}", stats.targets());
    let _ = writeln!(out, "median: {}", stats.median);
    let _ = writeln!(out, "percentile25: {}", stats.percentile25);
    let _ = writeln!(out, "percentile75: {}", stats.percentile75);
    let _ = writeln!(out, "failures: {}", stats.failures);
    let _ = writeln!(out, "\n[config]");
    out.push_str(&cfg.to_text());
    out
}

fn write_file(path: PathBuf, text: &str) -> Result<(), ExperimentError> {
    fs::write(&path, text).map_err(|source| ExperimentError::Io { path, source })
}

/// Writes `episodes.csv`, `log_<r>.csv` and `summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir.join("episodes.csv"), &out.stats.to_csv())?;
    for run in &out.runs {
        write_file(dir.join(format!("log_{}.csv", run.replicate)), &log_csv(run))?;
    }
    write_file(dir.join("summary.txt"), &summary_text(cfg, &out.stats))
}

/// Reads the per-target counts that accompany a `summary.txt`.
pub fn load_stats(summary: &Path) -> Result<RunStats, ExperimentError> {
    let csv = summary
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("episodes.csv");
    let text = fs::read_to_string(&csv).map_err(|source| ExperimentError::Io { path: csv, source })?;
    Ok(RunStats::from_csv(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_target_in_empty_arena_is_spacing_away() {
        let arena = Arena::empty(800.0, 800.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = sample_targets(&arena, 1, 200.0, (400.0, 400.0), &mut rng).unwrap();
        assert_eq!(t.len(), 1);
        assert!(((t[0].0 - 400.0).hypot(t[0].1 - 400.0) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn chains_clear_walls_and_obstacle() {
        let arena = Arena::standard();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = sample_targets(&arena, 30, 200.0, (100.0, 100.0), &mut rng).unwrap();
            let mut prev = (100.0, 100.0);
            for &p in &t {
                assert!(((p.0 - prev.0).hypot(p.1 - prev.1) - 200.0).abs() < 1e-9);
                assert!(p.0 >= 40.0 && p.0 <= 760.0 && p.1 >= 40.0 && p.1 <= 760.0);
                assert!((p.0 - 400.0).hypot(p.1 - 400.0) >= 60.0);
                prev = p;
            }
        }
    }

    #[test]
    fn impossible_spacing_errors() {
        let arena = Arena::empty(100.0, 100.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_targets(&arena, 1, 90.0, (50.0, 50.0), &mut rng),
            Err(ExperimentError::TargetsUnplaceable { .. })
        ));
    }
}
