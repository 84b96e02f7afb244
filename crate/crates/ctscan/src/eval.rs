//! Policy evaluation: baseline policies, per-phantom episode rollouts
//! without learning, aggregate statistics, and the angle-concentration
//! summary relating chosen angles to a shape's informative directions.

use crate::agent::{actor_forward, argmax_action, sample_action, AgentParams};
use crate::env::{reset, step, EnvConfig, RewardMode};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::phantoms::{ShapeKind, ShapeSpec};
use crate::projector::ANGLE_COUNT;
use crate::rngutil::derive_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// An action-selection rule evaluated without learning.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    /// Trained network; greedy takes the argmax, otherwise samples.
    Learned { params: &'a AgentParams, greedy: bool },
    /// Fixed equidistant grid, offset 0.
    Equidistant,
    /// Uniform over angles not yet measured.
    Random,
}

impl Policy<'_> {
    pub fn id(&self) -> &'static str {
        match self {
            Policy::Learned { greedy: true, .. } => "learned-greedy",
            Policy::Learned { greedy: false, .. } => "learned-sampled",
            Policy::Equidistant => "equidistant",
            Policy::Random => "random",
        }
    }
}

/// The equidistant baseline: floor(i * 180 / m) for i in 0..m.
pub fn equidistant_angles(m: usize) -> Result<Vec<u32>> {
    if m < 1 || m > ANGLE_COUNT {
        return Err(Error::Domain(format!(
            "angle count {m} outside 1..={ANGLE_COUNT}"
        )));
    }
    Ok((0..m).map(|i| (i * ANGLE_COUNT / m) as u32).collect())
}

fn pick_action(
    policy: &Policy,
    recon: &Image,
    angle_vec: &[f64],
    step_index: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<u32> {
    match policy {
        Policy::Learned { params, greedy } => {
            let mut probs = actor_forward(params, recon, angle_vec)?;
            // never propose an already-measured angle: renormalize over the rest
            for (a, p) in probs.iter_mut().enumerate() {
                if angle_vec[a] > 0.0 {
                    *p = 0.0;
                }
            }
            let remaining: f64 = probs.iter().sum();
            if remaining > 0.0 {
                for p in probs.iter_mut() {
                    *p /= remaining;
                }
            } else {
                // degenerate policy with all mass on measured angles:
                // fall back to uniform over the free ones
                let free = angle_vec.iter().filter(|&&b| b == 0.0).count();
                for (a, p) in probs.iter_mut().enumerate() {
                    *p = if angle_vec[a] == 0.0 { 1.0 / free as f64 } else { 0.0 };
                }
            }
            if *greedy {
                argmax_action(&probs)
            } else {
                sample_action(&probs, rng)
            }
        }
        Policy::Equidistant => Ok(equidistant_angles(horizon)?[step_index]),
        Policy::Random => {
            let free: Vec<u32> = (0..ANGLE_COUNT as u32)
                .filter(|&a| angle_vec[a as usize] == 0.0)
                .collect();
            Ok(free[rng.gen_range(0..free.len())])
        }
    }
}

/// One full rollout of a policy on a phantom: the chosen angle sequence
/// and the per-step PSNR curve (including the zero-image starting point).
pub fn run_episode(
    policy: &Policy,
    truth: &Image,
    cfg: &EnvConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<u32>, Vec<f64>)> {
    let mut state = reset(truth, cfg, rng)?;
    let mut angles = Vec::with_capacity(cfg.horizon);
    while !state.done() {
        let a = pick_action(
            policy,
            &state.recon,
            &state.angle_vec,
            state.step_index,
            cfg.horizon,
            rng,
        )?;
        step(&mut state, a, RewardMode::EndToEnd, cfg, rng)?;
        angles.push(a);
    }
    Ok((angles, state.psnr_curve))
}

/// Aggregate evaluation result over one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub policy_id: String,
    pub dataset_id: String,
    pub final_psnrs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// One 180-bin histogram per episode step.
    pub angle_histograms: Vec<Vec<u32>>,
    pub psnr_curves: Vec<Vec<f64>>,
    pub angle_sequences: Vec<Vec<u32>>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluate a policy with one episode per phantom. The per-phantom RNG is
/// derived from (seed, index), so results are independent of `workers`.
pub fn evaluate(
    policy: &Policy,
    dataset_id: &str,
    dataset: &[Image],
    cfg: &EnvConfig,
    seed: u64,
    workers: usize,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::Domain("evaluation dataset is empty".into()));
    }
    let workers = workers.max(1).min(dataset.len());
    let mut results: Vec<Option<(Vec<u32>, Vec<f64>)>> = vec![None; dataset.len()];
    if workers == 1 {
        for (idx, truth) in dataset.iter().enumerate() {
            let mut rng = derive_rng(seed, idx as u64);
            results[idx] = Some(run_episode(policy, truth, cfg, &mut rng)?);
        }
    } else {
        let chunks: Vec<Result<Vec<(usize, (Vec<u32>, Vec<f64>))>>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        scope.spawn(move || {
                            let mut out = Vec::new();
                            for idx in (w..dataset.len()).step_by(workers) {
                                let mut rng = derive_rng(seed, idx as u64);
                                out.push((idx, run_episode(policy, &dataset[idx], cfg, &mut rng)?));
                            }
                            Ok(out)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        for chunk in chunks {
            for (idx, r) in chunk? {
                results[idx] = Some(r);
            }
        }
    }
    let mut final_psnrs = Vec::with_capacity(dataset.len());
    let mut psnr_curves = Vec::with_capacity(dataset.len());
    let mut angle_sequences = Vec::with_capacity(dataset.len());
    let mut angle_histograms = vec![vec![0u32; ANGLE_COUNT]; cfg.horizon];
    for r in results {
        let (angles, curve) = r.unwrap();
        for (k, &a) in angles.iter().enumerate() {
            angle_histograms[k][a as usize] += 1;
        }
        final_psnrs.push(*curve.last().unwrap());
        psnr_curves.push(curve);
        angle_sequences.push(angles);
    }
    let (mean, std) = mean_std(&final_psnrs);
    Ok(EvalReport {
        policy_id: policy.id().to_string(),
        dataset_id: dataset_id.to_string(),
        final_psnrs,
        mean,
        std,
        angle_histograms,
        psnr_curves,
        angle_sequences,
    })
}

/// Fixed header of the per-phantom report CSV; `angles` holds the chosen
/// sequence joined by spaces.
pub const REPORT_HEADER: &str = "phantom,final_psnr,angles";

/// Per-phantom CSV for one policy's report.
pub fn report_csv(report: &EvalReport) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for (i, (psnr, angles)) in report
        .final_psnrs
        .iter()
        .zip(&report.angle_sequences)
        .enumerate()
    {
        let joined = angles
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        s.push_str(&format!("{i},{psnr},{joined}\n"));
    }
    s
}

pub const SUMMARY_HEADER: &str = "policy,m,mean_psnr,std_psnr";

/// One summary row in the "policy, M, mean, std" table format.
pub fn summary_line(report: &EvalReport, horizon: usize) -> String {
    format!(
        "{},{},{},{}",
        report.policy_id, horizon, report.mean, report.std
    )
}

/// Parse a summary CSV into (policy, m, mean, std) rows; errors carry
/// 1-based line numbers.
pub fn parse_summary_csv(text: &str) -> Result<Vec<(String, usize, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SUMMARY_HEADER => {}
        Some((_, h)) => return Err(Error::Format(format!("line 1: bad summary header '{h}'"))),
        None => return Err(Error::Format("line 1: empty summary file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Format(format!(
                "line {}: expected 4 fields, found {}",
                i + 1,
                f.len()
            )));
        }
        let bad = |v: &str| Error::Format(format!("line {}: bad number '{v}'", i + 1));
        rows.push((
            f[0].to_string(),
            f[1].parse().map_err(|_| bad(f[1]))?,
            f[2].parse().map_err(|_| bad(f[2]))?,
            f[3].parse().map_err(|_| bad(f[3]))?,
        ));
    }
    Ok(rows)
}

/// Distance between two angles under the 180-degree wraparound.
pub fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// The analytically informative projection directions of a shape, in
/// degrees mod 180: the major-axis angle for an ellipse, the edge-tangent
/// directions for a polygon. A circle has none.
pub fn informative_angles(spec: &ShapeSpec) -> Option<Vec<f64>> {
    let rot = spec.rotation_deg;
    match spec.kind {
        ShapeKind::Circle => None,
        ShapeKind::Ellipse => Some(vec![rot.rem_euclid(180.0)]),
        ShapeKind::Triangle => {
            // right isosceles triangle (-1,0)-(1,0)-(0,1): edge directions
            // 0, 135, 45 degrees before rotation
            Some(
                [0.0, 45.0, 135.0]
                    .iter()
                    .map(|e| (e + rot).rem_euclid(180.0))
                    .collect(),
            )
        }
        ShapeKind::Pentagon | ShapeKind::Hexagon => {
            let n = if spec.kind == ShapeKind::Pentagon { 5 } else { 6 };
            // regular n-gon, one vertex up: edge k spans vertex angles
            // 90 + k*360/n and 90 + (k+1)*360/n; its tangent direction is
            // the chord angle between those vertices
            let verts: Vec<(f64, f64)> = (0..n)
                .map(|k| {
                    let a = (90.0 + k as f64 * 360.0 / n as f64).to_radians();
                    (a.cos(), a.sin())
                })
                .collect();
            let mut angles: Vec<f64> = (0..n)
                .map(|k| {
                    let (x0, y0) = verts[k];
                    let (x1, y1) = verts[(k + 1) % n];
                    ((y1 - y0).atan2(x1 - x0).to_degrees() + rot).rem_euclid(180.0)
                })
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            Some(angles)
        }
    }
}

/// Per-phantom and median distance between chosen angles and informative
/// directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleConcentration {
    /// None marks shapes with no defined informative direction (circles).
    pub per_phantom: Vec<Option<f64>>,
    pub median: Option<f64>,
}

/// For each phantom, the minimum circular distance between the angles
/// chosen from step `skip_steps+1` onward and the shape's informative
/// angles; summarized by the median over defined phantoms. `skip_steps`
/// discards the leading (typically uninformed) choices.
pub fn angle_concentration(
    report: &EvalReport,
    specs: &[ShapeSpec],
    skip_steps: usize,
) -> Result<AngleConcentration> {
    if specs.len() != report.angle_sequences.len() {
        return Err(Error::Domain(format!(
            "spec count {} does not match report episodes {}",
            specs.len(),
            report.angle_sequences.len()
        )));
    }
    let mut per_phantom = Vec::with_capacity(specs.len());
    let mut defined = Vec::new();
    for (spec, angles) in specs.iter().zip(&report.angle_sequences) {
        let info = match informative_angles(spec) {
            None => {
                per_phantom.push(None);
                continue;
            }
            Some(v) => v,
        };
        let chosen = &angles[skip_steps.min(angles.len())..];
        let d = chosen
            .iter()
            .flat_map(|&a| info.iter().map(move |&t| circular_distance_deg(a as f64, t)))
            .fold(f64::INFINITY, f64::min);
        per_phantom.push(Some(d));
        if d.is_finite() {
            defined.push(d);
        }
    }
    let median = if defined.is_empty() {
        None
    } else {
        defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = defined.len();
        Some(if n % 2 == 1 {
            defined[n / 2]
        } else {
            0.5 * (defined[n / 2 - 1] + defined[n / 2])
        })
    };
    Ok(AngleConcentration { per_phantom, median })
}
