//! Episode environment: a fixed hidden phantom, a discrete 180-angle action
//! space, and a belief state made of the current SIRT reconstruction plus
//! the angle-selection vector.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::projector::{
    noise_sigma_for_level, simulate_measurement_geom, Geometry, Measurement, ANGLE_COUNT,
};
use crate::recon::{psnr, sirt_reconstruct, ReconConfig};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Final PSNR at the last step, 0 otherwise.
    EndToEnd,
    /// Per-step PSNR improvement.
    Incremental,
}

impl RewardMode {
    pub fn name(&self) -> &'static str {
        match self {
            RewardMode::EndToEnd => "end_to_end",
            RewardMode::Incremental => "incremental",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "end_to_end" => RewardMode::EndToEnd,
            "incremental" => RewardMode::Incremental,
            other => return Err(Error::Config(format!("unknown reward mode '{other}'"))),
        })
    }
}

/// Environment knobs shared by every episode.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub geom: Geometry,
    pub recon: ReconConfig,
    pub horizon: usize,
    pub noise_level: f64,
    /// When set, re-selecting an already-measured angle is rejected.
    pub mask_repeats: bool,
}

/// Full episode state. `truth` is hidden from the agent; the belief state
/// is (recon, angle_vec).
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub truth: Image,
    pub recon: Image,
    pub angle_vec: Vec<f64>,
    pub measurements: Vec<Measurement>,
    pub step_index: usize,
    pub horizon: usize,
    pub noise_sigma: f64,
    pub psnr_curve: Vec<f64>,
}

impl EpisodeState {
    pub fn done(&self) -> bool {
        self.step_index >= self.horizon
    }
}

/// Start an episode: zero reconstruction, zero angle vector, per-episode
/// noise sigma fixed from the relative level.
pub fn reset(truth: &Image, cfg: &EnvConfig, _rng: &mut ChaCha8Rng) -> Result<EpisodeState> {
    if cfg.horizon < 1 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    if truth.size() != cfg.geom.image_size {
        return Err(Error::Domain("truth size does not match geometry".into()));
    }
    let sigma = noise_sigma_for_level(truth, cfg.noise_level, &cfg.geom)?;
    let recon = Image::zeros(truth.size());
    let p0 = psnr(&recon, truth)?;
    Ok(EpisodeState {
        truth: truth.clone(),
        recon,
        angle_vec: vec![0.0; ANGLE_COUNT],
        measurements: Vec::new(),
        step_index: 0,
        horizon: cfg.horizon,
        noise_sigma: sigma,
        psnr_curve: vec![p0],
    })
}

/// Take one measurement at `angle_deg`, recompute the reconstruction from
/// all measurements so far (cold start), and emit the mode's reward.
pub fn step(
    state: &mut EpisodeState,
    angle_deg: u32,
    mode: RewardMode,
    cfg: &EnvConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool)> {
    if state.done() {
        return Err(Error::State("episode already terminated".into()));
    }
    if angle_deg >= ANGLE_COUNT as u32 {
        return Err(Error::Domain(format!("angle {angle_deg} outside [0,180)")));
    }
    if cfg.mask_repeats && state.angle_vec[angle_deg as usize] != 0.0 {
        return Err(Error::State(format!(
            "angle {angle_deg} already measured and repeats are masked"
        )));
    }
    let m = simulate_measurement_geom(&state.truth, angle_deg, state.noise_sigma, &cfg.geom, rng)?;
    state.measurements.push(m);
    state.angle_vec[angle_deg as usize] = 1.0;
    let init = if cfg.recon.warm_start {
        state.recon.clone()
    } else {
        Image::zeros(state.truth.size())
    };
    state.recon = sirt_reconstruct(&state.measurements, &cfg.geom, &cfg.recon, &init)?;
    state.step_index += 1;
    let prev_psnr = *state.psnr_curve.last().unwrap();
    let new_psnr = psnr(&state.recon, &state.truth)?;
    state.psnr_curve.push(new_psnr);
    let done = state.step_index == state.horizon;
    let reward = match mode {
        RewardMode::EndToEnd => {
            if done {
                new_psnr
            } else {
                0.0
            }
        }
        RewardMode::Incremental => new_psnr - prev_psnr,
    };
    Ok((reward, done))
}
