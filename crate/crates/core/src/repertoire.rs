//! MAP-Elites action repertoire over a 2-D grid of final displacements.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::gp::{GpInput, Outcome};
use crate::sim::{normalize_angle, step_kinematics, DamageModel, Pose, WheelCommand, EPISODE_STEPS};

/// Half-width of the reachable space covered by the descriptor.
pub const REACH_BOUND: f64 = 100.0;

/// Wheelbase used when evolving the repertoire.
pub const AXLE_LENGTH: f64 = 40.0;

pub const CSV_HEADER: &str = "d1,d2,v_left,v_right,dx,dy,cos_dt,sin_dt,perf";
const CSV_FIELDS: [&str; 9] = ["d1", "d2", "v_left", "v_right", "dx", "dy", "cos_dt", "sin_dt", "perf"];

#[derive(Debug, Error)]
pub enum RepertoireError {
    #[error("repertoire file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: bad field `{field}`: {reason}")]
    Parse {
        line: usize,
        field: String,
        reason: String,
    },
}

/// Normalized final position, both components in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor {
    pub d1: f64,
    pub d2: f64,
}

impl Descriptor {
    pub fn new(d1: f64, d2: f64) -> Self {
        Self {
            d1: d1.clamp(0.0, 1.0),
            d2: d2.clamp(0.0, 1.0),
        }
    }

    pub fn as_input(&self) -> GpInput {
        [self.d1, self.d2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub descriptor: Descriptor,
    pub controller: WheelCommand,
    /// Outcome of `controller` on the simulated intact robot.
    pub prior_outcome: Outcome,
    /// Heading error at the end of the behaviour; lower is better.
    pub performance: f64,
}

pub fn action_descriptor(final_pose: &Pose) -> Descriptor {
    let span = 2.0 * REACH_BOUND;
    Descriptor::new((final_pose.x + REACH_BOUND) / span, (final_pose.y + REACH_BOUND) / span)
}

/// Final heading of the constant-curvature arc that leaves the origin with
/// heading 0 and ends at `(x, y)`.
pub fn desired_orientation(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    normalize_angle(2.0 * y.atan2(x))
}

pub fn performance(final_pose: &Pose) -> f64 {
    normalize_angle(final_pose.theta - desired_orientation(final_pose.x, final_pose.y)).abs()
}

/// Simulates `cmd` on the intact robot from the origin, without obstacles.
pub fn evaluate_command(cmd: WheelCommand) -> Action {
    let mut pose = Pose::origin();
    for _ in 0..EPISODE_STEPS {
        pose = step_kinematics(pose, cmd, DamageModel::INTACT, AXLE_LENGTH);
    }
    Action {
        descriptor: action_descriptor(&pose),
        controller: cmd,
        prior_outcome: crate::sim::observe_outcome(Pose::origin(), pose),
        performance: performance(&pose),
    }
}

/// Gaussian perturbation of both wheels, clamped back into range.
pub fn random_variation<R: Rng + ?Sized>(cmd: WheelCommand, sigma: f64, rng: &mut R) -> WheelCommand {
    if sigma == 0.0 {
        return cmd;
    }
    let noise = Normal::new(0.0, sigma).expect("finite mutation sigma");
    WheelCommand::new(cmd.v_left + noise.sample(rng), cmd.v_right + noise.sample(rng))
}

/// Grid of elites; at most one action per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Repertoire {
    resolution: usize,
    cells: Vec<Option<Action>>,
}

impl Repertoire {
    pub const DEFAULT_RESOLUTION: usize = 20;

    pub fn new(resolution: usize) -> Self {
        assert!(resolution > 0, "grid resolution must be positive");
        Self {
            resolution,
            cells: vec![None; resolution * resolution],
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_index(&self, d: &Descriptor) -> usize {
        let r = self.resolution;
        let ix = ((d.d1 * r as f64) as usize).min(r - 1);
        let iy = ((d.d2 * r as f64) as usize).min(r - 1);
        iy * r + ix
    }

    pub fn get(&self, cell: usize) -> Option<&Action> {
        self.cells.get(cell).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    /// Filled cells in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Action)> {
        self.cells.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|a| (i, a)))
    }

    /// Inserts `candidate` if its cell is empty or it strictly improves on
    /// the incumbent's performance.
    pub fn add(&mut self, candidate: Action) -> bool {
        let idx = self.cell_index(&candidate.descriptor);
        match &self.cells[idx] {
            Some(incumbent) if candidate.performance >= incumbent.performance => false,
            _ => {
                self.cells[idx] = Some(candidate);
                true
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (_, a) in self.iter() {
            let o = &a.prior_outcome;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                a.descriptor.d1,
                a.descriptor.d2,
                a.controller.v_left,
                a.controller.v_right,
                o.dx,
                o.dy,
                o.cos_dt,
                o.sin_dt,
                a.performance
            );
        }
        out
    }

    pub fn from_csv(text: &str, resolution: usize) -> Result<Self, RepertoireError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(RepertoireError::Parse {
                    line: 1,
                    field: "header".into(),
                    reason: format!("expected `{CSV_HEADER}`"),
                })
            }
        }
        let mut rep = Repertoire::new(resolution);
        for (i, raw) in lines.enumerate() {
            let line = i + 2;
            if raw.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = raw.split(',').collect();
            let mut v = [0.0f64; 9];
            for (k, name) in CSV_FIELDS.iter().enumerate() {
                let Some(tok) = parts.get(k) else {
                    return Err(RepertoireError::Parse {
                        line,
                        field: (*name).into(),
                        reason: "missing value".into(),
                    });
                };
                v[k] = tok.trim().parse().map_err(|e| RepertoireError::Parse {
                    line,
                    field: (*name).into(),
                    reason: format!("{e} (`{tok}`)"),
                })?;
            }
            if parts.len() > CSV_FIELDS.len() {
                return Err(RepertoireError::Parse {
                    line,
                    field: "perf".into(),
                    reason: format!("{} extra value(s)", parts.len() - CSV_FIELDS.len()),
                });
            }
            for (k, name) in CSV_FIELDS.iter().enumerate().take(4) {
                let lo = if k < 2 { 0.0 } else { -1.0 };
                if !(lo..=1.0).contains(&v[k]) {
                    return Err(RepertoireError::Parse {
                        line,
                        field: (*name).into(),
                        reason: format!("{} out of range", v[k]),
                    });
                }
            }
            let action = Action {
                descriptor: Descriptor::new(v[0], v[1]),
                controller: WheelCommand::new(v[2], v[3]),
                prior_outcome: Outcome::new(v[4], v[5], v[6], v[7]),
                performance: v[8],
            };
            let idx = rep.cell_index(&action.descriptor);
            if rep.cells[idx].is_some() {
                return Err(RepertoireError::Parse {
                    line,
                    field: "d1".into(),
                    reason: format!("cell {idx} already occupied"),
                });
            }
            rep.cells[idx] = Some(action);
        }
        Ok(rep)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RepertoireError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|source| RepertoireError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RepertoireError> {
        Self::load_with_resolution(path, Self::DEFAULT_RESOLUTION)
    }

    pub fn load_with_resolution(path: impl AsRef<Path>, resolution: usize) -> Result<Self, RepertoireError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| match source.kind() {
            io::ErrorKind::NotFound => RepertoireError::NotFound(path.to_path_buf()),
            _ => RepertoireError::Io {
                path: path.to_path_buf(),
                source,
            },
        })?;
        Self::from_csv(&text, resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapElitesConfig {
    pub resolution: usize,
    /// Number of uniformly random commands evaluated before the main loop.
    pub initial_batch: usize,
    pub mutation_sigma: f64,
}

impl Default for MapElitesConfig {
    fn default() -> Self {
        Self {
            resolution: Repertoire::DEFAULT_RESOLUTION,
            initial_batch: 2000,
            mutation_sigma: 0.1,
        }
    }
}

/// Runs MAP-Elites for `evaluations` simulated commands. The first
/// `min(evaluations, initial_batch)` are uniform random; the rest mutate a
/// uniformly chosen elite.
pub fn map_elites(evaluations: usize, seed: u64, cfg: &MapElitesConfig) -> Repertoire {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = Repertoire::new(cfg.resolution);
    let mut occupied: Vec<usize> = Vec::new();
    let insert = |rep: &mut Repertoire, occupied: &mut Vec<usize>, action: Action| {
        let idx = rep.cell_index(&action.descriptor);
        let was_empty = rep.cells[idx].is_none();
        if rep.add(action) && was_empty {
            occupied.push(idx);
        }
    };
    let initial = evaluations.min(cfg.initial_batch);
    for _ in 0..initial {
        let cmd = WheelCommand::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        insert(&mut rep, &mut occupied, evaluate_command(cmd));
    }
    for _ in initial..evaluations {
        let parent = occupied[rng.random_range(0..occupied.len())];
        let cmd = random_variation(rep.cells[parent].as_ref().unwrap().controller, cfg.mutation_sigma, &mut rng);
        insert(&mut rep, &mut occupied, evaluate_command(cmd));
    }
    rep
}

/// Angular distance between two headings, in [0, π].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}
