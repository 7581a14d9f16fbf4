//! Kinematic simulator for a differential-drive robot in a bounded arena
//! with circular obstacles.
//!
//! Time is counted in steps. Each step applies an explicit Euler update of
//! the unicycle model; an episode is a fixed number of steps with a constant
//! wheel command.

use std::f64::consts::PI;

use thiserror::Error;

use crate::gp::Outcome;

/// Number of simulator steps in one episode.
pub const EPISODE_STEPS: usize = 100;

/// Distance under which a target counts as reached.
pub const TARGET_THRESHOLD: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("start pose ({x}, {y}) is in collision")]
    StartInCollision { x: f64, y: f64 },
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar robot state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Applies a body-frame displacement `(dx, dy, dtheta)` to this pose.
    pub fn compose(&self, dx: f64, dy: f64, dtheta: f64) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose::new(
            self.x + c * dx - s * dy,
            self.y + s * dx + c * dy,
            self.theta + dtheta,
        )
    }

    /// Composes with an outcome, recovering the heading change from its
    /// cosine/sine pair.
    pub fn compose_outcome(&self, outcome: &Outcome) -> Pose {
        self.compose(outcome.dx, outcome.dy, outcome.heading_change())
    }

    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        (self.x - point.0).hypot(self.y - point.1)
    }
}

/// Wheel velocities in units per step, each clamped to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    pub v_left: f64,
    pub v_right: f64,
}

impl WheelCommand {
    pub fn new(v_left: f64, v_right: f64) -> Self {
        Self {
            v_left: v_left.clamp(-1.0, 1.0),
            v_right: v_right.clamp(-1.0, 1.0),
        }
    }

    /// The command with the wheels swapped.
    pub fn mirrored(&self) -> Self {
        Self::new(self.v_right, self.v_left)
    }

    pub fn as_input(&self) -> [f64; 2] {
        [self.v_left, self.v_right]
    }
}

/// Per-wheel multiplicative damage applied to every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageModel {
    pub scale_left: f64,
    pub scale_right: f64,
}

impl DamageModel {
    pub const INTACT: DamageModel = DamageModel {
        scale_left: 1.0,
        scale_right: 1.0,
    };

    pub fn new(scale_left: f64, scale_right: f64) -> Self {
        Self {
            scale_left: scale_left.max(0.0),
            scale_right: scale_right.max(0.0),
        }
    }

    /// Right wheel command halved.
    pub fn right_wheel_halved() -> Self {
        Self::new(1.0, 0.5)
    }

    pub fn apply(&self, cmd: WheelCommand) -> (f64, f64) {
        (cmd.v_left * self.scale_left, cmd.v_right * self.scale_right)
    }
}

impl Default for DamageModel {
    fn default() -> Self {
        Self::INTACT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Obstacle>,
    pub robot_radius: f64,
}

impl Arena {
    /// 800×800 arena with a single obstacle in the middle; robot and
    /// obstacle radii are both 20.
    pub fn standard() -> Self {
        Self {
            width: 800.0,
            height: 800.0,
            obstacles: vec![Obstacle {
                x: 400.0,
                y: 400.0,
                radius: 20.0,
            }],
            robot_radius: 20.0,
        }
    }

    pub fn empty(width: f64, height: f64, robot_radius: f64) -> Self {
        Self {
            width,
            height,
            obstacles: Vec::new(),
            robot_radius,
        }
    }

    /// Wheelbase: the distance between the two wheels.
    pub fn axle_length(&self) -> f64 {
        2.0 * self.robot_radius
    }

    pub fn contains(&self, point: (f64, f64)) -> bool {
        (0.0..=self.width).contains(&point.0) && (0.0..=self.height).contains(&point.1)
    }

    /// True when the straight segment `a → b` passes closer than the
    /// collision distance to any obstacle, or either endpoint collides.
    pub fn segment_collides(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        if check_collision(a, self) || check_collision(b, self) {
            return true;
        }
        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
        let len_sq = ex * ex + ey * ey;
        self.obstacles.iter().any(|o| {
            let t = if len_sq > 0.0 {
                (((o.x - a.0) * ex + (o.y - a.1) * ey) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.0 + t * ex, a.1 + t * ey);
            (px - o.x).hypot(py - o.y) < o.radius + self.robot_radius
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub final_pose: Pose,
    pub outcome: Outcome,
    pub collided: bool,
}

/// Advances the pose by one step. Collisions are not resolved here.
pub fn step_kinematics(pose: Pose, cmd: WheelCommand, damage: DamageModel, axle_length: f64) -> Pose {
    let (vl, vr) = damage.apply(cmd);
    let v = 0.5 * (vl + vr);
    let omega = (vr - vl) / axle_length;
    let (s, c) = pose.theta.sin_cos();
    Pose::new(pose.x + v * c, pose.y + v * s, pose.theta + omega)
}

/// True iff a robot centred at `position` overlaps an obstacle or a wall.
pub fn check_collision(position: (f64, f64), arena: &Arena) -> bool {
    let (x, y) = position;
    let r = arena.robot_radius;
    if x < r || y < r || x > arena.width - r || y > arena.height - r {
        return true;
    }
    arena
        .obstacles
        .iter()
        .any(|o| (x - o.x).hypot(y - o.y) < o.radius + r)
}

/// Runs one episode of [`EPISODE_STEPS`] steps with a fixed command.
///
/// A step whose new position collides keeps its heading change but has its
/// translation cancelled.
pub fn run_episode(
    start: Pose,
    cmd: WheelCommand,
    damage: DamageModel,
    arena: &Arena,
) -> Result<EpisodeResult, SimError> {
    if check_collision(start.position(), arena) {
        return Err(SimError::StartInCollision {
            x: start.x,
            y: start.y,
        });
    }
    let axle = arena.axle_length();
    let mut pose = start;
    let mut collided = false;
    for _ in 0..EPISODE_STEPS {
        let next = step_kinematics(pose, cmd, damage, axle);
        if check_collision(next.position(), arena) {
            collided = true;
            pose.theta = next.theta;
        } else {
            pose = next;
        }
    }
    Ok(EpisodeResult {
        final_pose: pose,
        outcome: observe_outcome(start, pose),
        collided,
    })
}

/// Displacement from `before` to `after` expressed in the body frame of
/// `before`.
pub fn observe_outcome(before: Pose, after: Pose) -> Outcome {
    let (wx, wy) = (after.x - before.x, after.y - before.y);
    let (s, c) = before.theta.sin_cos();
    let dtheta = after.theta - before.theta;
    Outcome {
        dx: c * wx + s * wy,
        dy: -s * wx + c * wy,
        cos_dt: dtheta.cos(),
        sin_dt: dtheta.sin(),
    }
}

pub fn target_reached(pose: &Pose, target: (f64, f64)) -> bool {
    pose.distance_to(target) <= TARGET_THRESHOLD
}
