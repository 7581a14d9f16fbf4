//! Flat `key = value` experiment configuration.
//!
//! Every key is optional and defaults to the standard experiment; unknown
//! keys and malformed values are rejected with the offending line number.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::agents::{AgentConfig, AgentKind};
use crate::repertoire::MapElitesConfig;
use crate::sim::{Arena, DamageModel, Obstacle, Pose};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    Value { line: usize, key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    pub repertoire: Option<PathBuf>,
    pub damage: DamageModel,
    pub arena: Arena,
    pub targets: usize,
    pub target_spacing: f64,
    pub replicates: usize,
    pub seed: u64,
    pub start: Pose,
    pub agent_config: AgentConfig,
    /// MAP-Elites settings used by `evolve`.
    pub evolve: MapElitesConfig,
    pub evaluations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Rte,
            repertoire: None,
            damage: DamageModel::right_wheel_halved(),
            arena: Arena::standard(),
            targets: 30,
            target_spacing: 200.0,
            replicates: 50,
            seed: 0,
            start: Pose::new(100.0, 100.0, 0.0),
            agent_config: AgentConfig::default(),
            evolve: MapElitesConfig::default(),
            evaluations: 100_000,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        line,
        key: key.to_string(),
        reason: format!("`{value}`: {e}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            line,
            key: key.to_string(),
            reason: format!("`{value}` is not a boolean"),
        }),
    }
}

/// `x,y,r; x,y,r; ...` or `none`.
fn parse_obstacles(line: usize, key: &str, value: &str) -> Result<Vec<Obstacle>, ConfigError> {
    if value == "none" || value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(ConfigError::Value {
                    line,
                    key: key.to_string(),
                    reason: format!("obstacle `{}` needs x,y,radius", item.trim()),
                });
            }
            Ok(Obstacle {
                x: parse_num(line, key, parts[0])?,
                y: parse_num(line, key, parts[1])?,
                radius: parse_num(line, key, parts[2])?,
            })
        })
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let m = &mut self.agent_config.mcts;
        let g = &mut self.agent_config.gp;
        match key {
            "agent" => {
                self.agent = value.parse().map_err(|reason| ConfigError::Value {
                    line,
                    key: key.to_string(),
                    reason,
                })?
            }
            "repertoire" => self.repertoire = (value != "none").then(|| PathBuf::from(value)),
            "damage_left" => self.damage.scale_left = parse_num(line, key, value)?,
            "damage_right" => self.damage.scale_right = parse_num(line, key, value)?,
            "arena_width" => self.arena.width = parse_num(line, key, value)?,
            "arena_height" => self.arena.height = parse_num(line, key, value)?,
            "robot_radius" => self.arena.robot_radius = parse_num(line, key, value)?,
            "obstacles" => self.arena.obstacles = parse_obstacles(line, key, value)?,
            "targets" => self.targets = parse_num(line, key, value)?,
            "target_spacing" => self.target_spacing = parse_num(line, key, value)?,
            "replicates" => self.replicates = parse_num(line, key, value)?,
            "seed" => self.seed = parse_num(line, key, value)?,
            "target_cap" => self.agent_config.target_cap = parse_num(line, key, value)?,
            "start_x" => self.start.x = parse_num(line, key, value)?,
            "start_y" => self.start.y = parse_num(line, key, value)?,
            "start_theta" => self.start.theta = parse_num(line, key, value)?,
            "alpha" => m.alpha = parse_num(line, key, value)?,
            "beta" => m.beta = parse_num(line, key, value)?,
            "c" => m.c = parse_num(line, key, value)?,
            "gamma" => m.gamma = parse_num(line, key, value)?,
            "iterations_per_tree" => m.iterations_per_tree = parse_num(line, key, value)?,
            "trees" => m.trees = parse_num(line, key, value)?,
            "rollout_horizon" => m.rollout_horizon = parse_num(line, key, value)?,
            "astar_samples" => m.astar_samples = parse_num(line, key, value)?,
            "astar_cell" => m.astar_cell = parse_num(line, key, value)?,
            "astar_guidance" => m.guided = parse_bool(line, key, value)?,
            "gp_noise" => g.noise_sq = parse_num(line, key, value)?,
            "gp_sigma_se_sq" => g.kernel.sigma_se_sq = parse_num(line, key, value)?,
            "gp_length_scale" => g.kernel.length_scale = parse_num(line, key, value)?,
            "gp_position_scale" => g.position_scale = parse_num(line, key, value)?,
            "texplore_pool" => self.agent_config.texplore_pool = parse_num(line, key, value)?,
            "texplore_guided" => self.agent_config.texplore_guided = parse_bool(line, key, value)?,
            "resolution" => self.evolve.resolution = parse_num(line, key, value)?,
            "initial_batch" => self.evolve.initial_batch = parse_num(line, key, value)?,
            "mutation_sigma" => self.evolve.mutation_sigma = parse_num(line, key, value)?,
            "evaluations" => self.evaluations = parse_num(line, key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |s: String| Err(ConfigError::Invalid(s));
        self.agent_config.mcts.validate().map_err(ConfigError::Invalid)?;
        self.agent_config
            .gp
            .kernel
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = self.damage;
        if !(d.scale_left >= 0.0 && d.scale_right >= 0.0) {
            return invalid(format!("damage scales must be non-negative, got {} and {}", d.scale_left, d.scale_right));
        }
        if !(self.arena.width > 0.0 && self.arena.height > 0.0 && self.arena.robot_radius > 0.0) {
            return invalid("arena dimensions and robot radius must be positive".into());
        }
        if !(self.target_spacing > 0.0 && self.target_spacing < self.arena.width) {
            return invalid(format!(
                "target_spacing must lie in (0, arena_width), got {}",
                self.target_spacing
            ));
        }
        if self.targets == 0 || self.replicates == 0 || self.agent_config.target_cap == 0 {
            return invalid("targets, replicates and target_cap must be at least 1".into());
        }
        if !(self.agent_config.gp.noise_sq >= 0.0 && self.agent_config.gp.position_scale > 0.0) {
            return invalid("gp_noise must be non-negative and gp_position_scale positive".into());
        }
        if self.agent_config.texplore_pool == 0 {
            return invalid("texplore_pool must be at least 1".into());
        }
        if self.evolve.resolution == 0 || !(self.evolve.mutation_sigma > 0.0) {
            return invalid("resolution must be at least 1 and mutation_sigma positive".into());
        }
        Ok(())
    }

    /// Canonical `key = value` form; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let m = &self.agent_config.mcts;
        let g = &self.agent_config.gp;
        let obstacles = if self.arena.obstacles.is_empty() {
            "none".to_string()
        } else {
            self.arena
                .obstacles
                .iter()
                .map(|o| format!("{},{},{}", o.x, o.y, o.radius))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let repertoire = self
            .repertoire
            .as_ref()
            .map_or_else(|| "none".to_string(), |p| p.display().to_string());
        let pairs: Vec<(&str, String)> = vec![
            ("agent", self.agent.to_string()),
            ("repertoire", repertoire),
            ("damage_left", self.damage.scale_left.to_string()),
            ("damage_right", self.damage.scale_right.to_string()),
            ("arena_width", self.arena.width.to_string()),
            ("arena_height", self.arena.height.to_string()),
            ("robot_radius", self.arena.robot_radius.to_string()),
            ("obstacles", obstacles),
            ("targets", self.targets.to_string()),
            ("target_spacing", self.target_spacing.to_string()),
            ("replicates", self.replicates.to_string()),
            ("seed", self.seed.to_string()),
            ("target_cap", self.agent_config.target_cap.to_string()),
            ("start_x", self.start.x.to_string()),
            ("start_y", self.start.y.to_string()),
            ("start_theta", self.start.theta.to_string()),
            ("alpha", m.alpha.to_string()),
            ("beta", m.beta.to_string()),
            ("c", m.c.to_string()),
            ("gamma", m.gamma.to_string()),
            ("iterations_per_tree", m.iterations_per_tree.to_string()),
            ("trees", m.trees.to_string()),
            ("rollout_horizon", m.rollout_horizon.to_string()),
            ("astar_samples", m.astar_samples.to_string()),
            ("astar_cell", m.astar_cell.to_string()),
            ("astar_guidance", m.guided.to_string()),
            ("gp_noise", g.noise_sq.to_string()),
            ("gp_sigma_se_sq", g.kernel.sigma_se_sq.to_string()),
            ("gp_length_scale", g.kernel.length_scale.to_string()),
            ("gp_position_scale", g.position_scale.to_string()),
            ("texplore_pool", self.agent_config.texplore_pool.to_string()),
            ("texplore_guided", self.agent_config.texplore_guided.to_string()),
            ("resolution", self.evolve.resolution.to_string()),
            ("initial_batch", self.evolve.initial_batch.to_string()),
            ("mutation_sigma", self.evolve.mutation_sigma.to_string()),
            ("evaluations", self.evaluations.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.set(line, key, value)?;
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg: ExperimentConfig = "".parse().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.targets, 30);
        assert_eq!(cfg.replicates, 50);
        assert_eq!(cfg.agent_config.mcts.trees, 4);
        assert_eq!(cfg.agent_config.mcts.iterations_per_tree, 5000);
    }

    #[test]
    fn round_trips_through_text() {
        let text = "agent = gp-texplore\nobstacles = 100,200,10; 300,300,25\ntrees = 2 # fewer\nseed=7\nastar_guidance = false\n";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.agent, AgentKind::GpTexplore);
        assert_eq!(cfg.arena.obstacles.len(), 2);
        assert_eq!(cfg.agent_config.mcts.trees, 2);
        assert!(!cfg.agent_config.mcts.guided);
        let again: ExperimentConfig = cfg.to_text().parse().unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            "speed = 3".parse::<ExperimentConfig>(),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            "# c\ntrees".parse::<ExperimentConfig>(),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            "trees = four".parse::<ExperimentConfig>(),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            "seed = 1\nseed = 2".parse::<ExperimentConfig>(),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            "alpha = 1.5".parse::<ExperimentConfig>(),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            "target_spacing = 900".parse::<ExperimentConfig>(),
            Err(ConfigError::Invalid(_))
        ));
    }
}
