//! Run configuration: a flat `key = value` text document covering every
//! knob of the pipeline. Lines starting with `#` are comments. Unknown
//! keys are rejected; a `version` key is required. `RunConfig::render`
//! emits the fully resolved document, defaults included, and parsing that
//! rendering reproduces the config exactly.

use crate::env::{EnvConfig, RewardMode};
use crate::error::{Error, Result};
use crate::phantoms::{default_rotation_grid, DatasetSpec, ShapeKind, DEFAULT_SHIFT_FRAC};
use crate::projector::Geometry;
use crate::recon::ReconConfig;
use crate::trainer::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // phantoms
    pub image_size: usize,
    pub shape_kinds: Vec<ShapeKind>,
    pub phantom_count: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub shift_frac: f64,
    pub data_seed: u64,
    // projector
    pub detector_count: usize,
    // recon
    pub sirt_iterations: usize,
    pub warm_start: bool,
    // env
    pub horizon: usize,
    pub noise_level: f64,
    pub mask_repeats: bool,
    // trainer
    pub gamma: f64,
    pub actor_weight: f64,
    pub critic_weight: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub episodes: usize,
    pub reward_mode: RewardMode,
    pub train_seed: u64,
    pub checkpoint_every: usize,
    // eval
    pub eval_count: usize,
    pub eval_seed: u64,
    pub eval_noise_level: f64,
    pub eval_greedy: bool,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let image_size = 128;
        RunConfig {
            image_size,
            shape_kinds: vec![ShapeKind::Ellipse],
            phantom_count: 3000,
            scale_min: crate::phantoms::DEFAULT_SCALE_RANGE.0,
            scale_max: crate::phantoms::DEFAULT_SCALE_RANGE.1,
            shift_frac: DEFAULT_SHIFT_FRAC,
            data_seed: 0,
            detector_count: Geometry::new(image_size).detector_count,
            sirt_iterations: 150,
            warm_start: false,
            horizon: 3,
            noise_level: 0.0,
            mask_repeats: false,
            gamma: 0.99,
            actor_weight: 1.0,
            critic_weight: 0.5,
            entropy_weight: 0.01,
            lr: 1e-4,
            weight_decay: 1e-5,
            episodes: 1000,
            reward_mode: RewardMode::EndToEnd,
            train_seed: 0,
            checkpoint_every: 0,
            eval_count: 100,
            eval_seed: 1,
            eval_noise_level: 0.0,
            eval_greedy: true,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::with_detector_count(self.image_size, self.detector_count)
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let shift = self.shift_frac * self.image_size as f64;
        DatasetSpec {
            shape_kinds: self.shape_kinds.clone(),
            count: self.phantom_count,
            rotation_grid: default_rotation_grid(),
            scale_range: (self.scale_min, self.scale_max),
            shift_range: (-shift, shift),
            image_size: self.image_size,
            seed: self.data_seed,
        }
    }

    pub fn recon_config(&self) -> ReconConfig {
        ReconConfig {
            iterations: self.sirt_iterations,
            warm_start: self.warm_start,
            ..Default::default()
        }
    }

    pub fn env_config(&self, noise_level: f64) -> Result<EnvConfig> {
        Ok(EnvConfig {
            geom: self.geometry()?,
            recon: self.recon_config(),
            horizon: self.horizon,
            noise_level,
            mask_repeats: self.mask_repeats,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            actor_weight: self.actor_weight,
            critic_weight: self.critic_weight,
            entropy_weight: self.entropy_weight,
            lr: self.lr,
            weight_decay: self.weight_decay,
            episodes: self.episodes,
            horizon: self.horizon,
            reward_mode: self.reward_mode,
            seed: self.train_seed,
        }
    }

    /// Render the fully resolved document. Floats use Rust's shortest
    /// round-trip formatting, so parse(render(c)) == c.
    pub fn render(&self) -> String {
        let kinds = self
            .shape_kinds
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("version", CONFIG_VERSION.to_string());
        kv("image_size", self.image_size.to_string());
        kv("shape_kinds", kinds);
        kv("phantom_count", self.phantom_count.to_string());
        kv("scale_min", self.scale_min.to_string());
        kv("scale_max", self.scale_max.to_string());
        kv("shift_frac", self.shift_frac.to_string());
        kv("data_seed", self.data_seed.to_string());
        kv("detector_count", self.detector_count.to_string());
        kv("sirt_iterations", self.sirt_iterations.to_string());
        kv("warm_start", self.warm_start.to_string());
        kv("horizon", self.horizon.to_string());
        kv("noise_level", self.noise_level.to_string());
        kv("mask_repeats", self.mask_repeats.to_string());
        kv("gamma", self.gamma.to_string());
        kv("actor_weight", self.actor_weight.to_string());
        kv("critic_weight", self.critic_weight.to_string());
        kv("entropy_weight", self.entropy_weight.to_string());
        kv("lr", self.lr.to_string());
        kv("weight_decay", self.weight_decay.to_string());
        kv("episodes", self.episodes.to_string());
        kv("reward_mode", self.reward_mode.name().to_string());
        kv("train_seed", self.train_seed.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("eval_count", self.eval_count.to_string());
        kv("eval_seed", self.eval_seed.to_string());
        kv("eval_noise_level", self.eval_noise_level.to_string());
        kv("eval_greedy", self.eval_greedy.to_string());
        kv("workers", self.workers.to_string());
        s
    }

    /// Parse a document. Every key is optional except `version`; unknown
    /// keys and duplicates are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut detector_set = false;
        let mut version_seen = false;
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("duplicate key '{key}'")));
            }
            seen.push(key.to_string());
            match key {
                "version" => {
                    let v: u32 = parse_num(key, value)?;
                    if v != CONFIG_VERSION {
                        return Err(Error::Config(format!(
                            "unsupported config version {v} (expected {CONFIG_VERSION})"
                        )));
                    }
                    version_seen = true;
                }
                "image_size" => cfg.image_size = parse_num(key, value)?,
                "shape_kinds" => {
                    cfg.shape_kinds = value
                        .split(',')
                        .map(|s| ShapeKind::from_name(s.trim()))
                        .collect::<Result<_>>()?;
                }
                "phantom_count" => cfg.phantom_count = parse_num(key, value)?,
                "scale_min" => cfg.scale_min = parse_num(key, value)?,
                "scale_max" => cfg.scale_max = parse_num(key, value)?,
                "shift_frac" => cfg.shift_frac = parse_num(key, value)?,
                "data_seed" => cfg.data_seed = parse_num(key, value)?,
                "detector_count" => {
                    cfg.detector_count = parse_num(key, value)?;
                    detector_set = true;
                }
                "sirt_iterations" => cfg.sirt_iterations = parse_num(key, value)?,
                "warm_start" => cfg.warm_start = parse_bool(key, value)?,
                "horizon" => cfg.horizon = parse_num(key, value)?,
                "noise_level" => cfg.noise_level = parse_num(key, value)?,
                "mask_repeats" => cfg.mask_repeats = parse_bool(key, value)?,
                "gamma" => cfg.gamma = parse_num(key, value)?,
                "actor_weight" => cfg.actor_weight = parse_num(key, value)?,
                "critic_weight" => cfg.critic_weight = parse_num(key, value)?,
                "entropy_weight" => cfg.entropy_weight = parse_num(key, value)?,
                "lr" => cfg.lr = parse_num(key, value)?,
                "weight_decay" => cfg.weight_decay = parse_num(key, value)?,
                "episodes" => cfg.episodes = parse_num(key, value)?,
                "reward_mode" => cfg.reward_mode = RewardMode::from_name(value)?,
                "train_seed" => cfg.train_seed = parse_num(key, value)?,
                "checkpoint_every" => cfg.checkpoint_every = parse_num(key, value)?,
                "eval_count" => cfg.eval_count = parse_num(key, value)?,
                "eval_seed" => cfg.eval_seed = parse_num(key, value)?,
                "eval_noise_level" => cfg.eval_noise_level = parse_num(key, value)?,
                "eval_greedy" => cfg.eval_greedy = parse_bool(key, value)?,
                "workers" => cfg.workers = parse_num(key, value)?,
                other => {
                    return Err(Error::Config(format!("unknown config key '{other}'")));
                }
            }
        }
        if !version_seen {
            return Err(Error::Config("missing required key 'version'".into()));
        }
        if !detector_set {
            cfg.detector_count = Geometry::new(cfg.image_size).detector_count;
        }
        cfg.geometry()?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean '{value}' for key '{key}' (use true/false)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.image_size = 64;
        cfg.detector_count = 97;
        cfg.shape_kinds = vec![ShapeKind::Circle, ShapeKind::Hexagon];
        cfg.lr = 3.5e-4;
        cfg.reward_mode = RewardMode::Incremental;
        let text = cfg.render();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let text = "version = 1\nlearning_rate = 0.1\n";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn version_is_required() {
        assert!(RunConfig::parse("episodes = 10\n").is_err());
        assert!(RunConfig::parse("version = 2\n").is_err());
        assert!(RunConfig::parse("version = 1\n").is_ok());
    }

    #[test]
    fn duplicates_and_malformed_lines_rejected() {
        assert!(RunConfig::parse("version = 1\nlr = 1e-4\nlr = 1e-3\n").is_err());
        assert!(RunConfig::parse("version = 1\nepisodes\n").is_err());
        assert!(RunConfig::parse("version = 1\ngamma = fast\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# a comment\n\nversion = 1\n  image_size = 64  \n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.image_size, 64);
        // detector count follows the default geometry rule when unset
        assert_eq!(cfg.detector_count, Geometry::new(64).detector_count);
    }
}
