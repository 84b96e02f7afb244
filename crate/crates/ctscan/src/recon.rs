//! Box-constrained SIRT reconstruction and the PSNR metric.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::projector::{back_project, forward_project, Geometry, Measurement};
use std::collections::HashMap;

/// Reconstruction settings; defaults follow the 150-iteration,
/// [0, 1]-box convention used throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub iterations: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub warm_start: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            iterations: 150,
            box_lo: 0.0,
            box_hi: 1.0,
            warm_start: false,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("recon iterations must be >= 1".into()));
        }
        if self.box_lo >= self.box_hi {
            return Err(Error::Config("recon box_lo must be < box_hi".into()));
        }
        Ok(())
    }
}

/// Cached row/column normalizers for one angle multiset.
struct SirtScaling {
    /// 1/row-sum per measurement (indexed like `measurements`), 0 where the
    /// row sum is 0.
    row_inv: Vec<Vec<f64>>,
    /// 1/column-sum per pixel over the stacked system, 0 where 0.
    col_inv: Vec<f64>,
}

fn sirt_scaling(measurements: &[Measurement], geom: &Geometry) -> Result<SirtScaling> {
    let ones = Image::from_vec(
        geom.image_size,
        vec![1.0; geom.image_size * geom.image_size],
    );
    let ones_det = vec![1.0; geom.detector_count];
    // row sums and per-angle column sums depend only on the angle
    let mut per_angle: HashMap<u32, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for m in measurements {
        if !per_angle.contains_key(&m.angle_deg) {
            let row = forward_project(&ones, m.angle_deg, geom)?;
            let col = back_project(&ones_det, m.angle_deg, geom)?;
            per_angle.insert(m.angle_deg, (row, col.pixels().to_vec()));
        }
    }
    let inv = |v: f64| if v != 0.0 { 1.0 / v } else { 0.0 };
    let mut row_inv = Vec::with_capacity(measurements.len());
    let mut col_sum = vec![0.0; geom.image_size * geom.image_size];
    for m in measurements {
        let (row, col) = &per_angle[&m.angle_deg];
        row_inv.push(row.iter().map(|&v| inv(v)).collect());
        for (acc, c) in col_sum.iter_mut().zip(col) {
            *acc += c;
        }
    }
    Ok(SirtScaling {
        row_inv,
        col_inv: col_sum.into_iter().map(inv).collect(),
    })
}

/// SIRT with box constraints:
/// x <- clip(x + C A^T R (y - A x)), run for cfg.iterations sweeps.
pub fn sirt_reconstruct(
    measurements: &[Measurement],
    geom: &Geometry,
    cfg: &ReconConfig,
    init: &Image,
) -> Result<Image> {
    if measurements.is_empty() {
        return Err(Error::Domain("sirt_reconstruct: no measurements".into()));
    }
    cfg.validate()?;
    if init.size() != geom.image_size {
        return Err(Error::Domain("sirt init size mismatch".into()));
    }
    let scaling = sirt_scaling(measurements, geom)?;
    let n_pix = geom.image_size * geom.image_size;
    let mut x = init.clone();
    for _ in 0..cfg.iterations {
        let mut update = vec![0.0; n_pix];
        for (mi, m) in measurements.iter().enumerate() {
            let ax = forward_project(&x, m.angle_deg, geom)?;
            let residual: Vec<f64> = m
                .values
                .iter()
                .zip(&ax)
                .zip(&scaling.row_inv[mi])
                .map(|((y, a), r)| (y - a) * r)
                .collect();
            let bp = back_project(&residual, m.angle_deg, geom)?;
            for (u, b) in update.iter_mut().zip(bp.pixels()) {
                *u += b;
            }
        }
        for (xv, (u, c)) in x
            .pixels_mut()
            .iter_mut()
            .zip(update.iter().zip(&scaling.col_inv))
        {
            *xv = (*xv + u * c).clamp(cfg.box_lo, cfg.box_hi);
        }
    }
    Ok(x)
}

/// Peak signal-to-noise ratio in dB, MAX = 1.0, capped at 100 dB for
/// identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::Domain(format!(
            "psnr dimension mismatch: {} vs {}",
            a.size(),
            b.size()
        )));
    }
    let n = a.pixels().len() as f64;
    let mse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(100.0);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::simulate_measurement_geom;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk_image(n: usize, radius: f64) -> Image {
        let c = (n as f64 - 1.0) / 2.0;
        let mut img = Image::zeros(n);
        for r in 0..n {
            for col in 0..n {
                let (dy, dx) = (r as f64 - c, col as f64 - c);
                if dx * dx + dy * dy <= radius * radius {
                    img.set(r, col, 1.0);
                }
            }
        }
        img
    }

    fn noiseless(truth: &Image, angles: &[u32], geom: &Geometry) -> Vec<Measurement> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        angles
            .iter()
            .map(|&a| simulate_measurement_geom(truth, a, 0.0, geom, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn zero_truth_zero_init_stays_zero() {
        let n = 16;
        let geom = Geometry::new(n);
        let truth = Image::zeros(n);
        let ms = noiseless(&truth, &[0, 45, 90], &geom);
        let cfg = ReconConfig {
            iterations: 10,
            ..Default::default()
        };
        let out = sirt_reconstruct(&ms, &geom, &cfg, &Image::zeros(n)).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_measurements_rejected() {
        let geom = Geometry::new(8);
        let cfg = ReconConfig::default();
        assert!(sirt_reconstruct(&[], &geom, &cfg, &Image::zeros(8)).is_err());
    }

    #[test]
    fn full_angle_disk_residual_small() {
        let n = 32;
        let geom = Geometry::new(n);
        let truth = disk_image(n, 10.0);
        let angles: Vec<u32> = (0..180).collect();
        let ms = noiseless(&truth, &angles, &geom);
        let out = sirt_reconstruct(&ms, &geom, &ReconConfig::default(), &Image::zeros(n)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for m in &ms {
            let ax = forward_project(&out, m.angle_deg, &geom).unwrap();
            for (y, a) in m.values.iter().zip(&ax) {
                num += (y - a) * (y - a);
                den += y * y;
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative residual {rel}");
    }

    #[test]
    fn duplicated_noiseless_angle_changes_nothing() {
        let n = 24;
        let geom = Geometry::new(n);
        let truth = disk_image(n, 8.0);
        let ms = noiseless(&truth, &[70], &geom);
        let mut dup = ms.clone();
        dup.push(ms[0].clone());
        let cfg = ReconConfig {
            iterations: 60,
            ..Default::default()
        };
        let a = sirt_reconstruct(&ms, &geom, &cfg, &Image::zeros(n)).unwrap();
        let b = sirt_reconstruct(&dup, &geom, &cfg, &Image::zeros(n)).unwrap();
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn output_respects_box_and_is_deterministic() {
        let n = 24;
        let geom = Geometry::new(n);
        let truth = disk_image(n, 8.0);
        let ms = noiseless(&truth, &[5, 95], &geom);
        let cfg = ReconConfig {
            iterations: 40,
            ..Default::default()
        };
        let a = sirt_reconstruct(&ms, &geom, &cfg, &Image::zeros(n)).unwrap();
        let b = sirt_reconstruct(&ms, &geom, &cfg, &Image::zeros(n)).unwrap();
        assert_eq!(a, b);
        assert!(a.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn psnr_closed_forms() {
        let n = 8;
        let a = Image::from_vec(n, vec![0.5; n * n]);
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        let b = Image::from_vec(n, vec![0.6; n * n]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let z = Image::from_vec(n, vec![0.0; n * n]);
        let o = Image::from_vec(n, vec![1.0; n * n]);
        assert!((psnr(&z, &o).unwrap() - 0.0).abs() < 1e-12);
        assert!(psnr(&a, &Image::zeros(4)).is_err());
    }
}
