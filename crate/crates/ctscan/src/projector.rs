//! Discretized parallel-beam projector with an exact adjoint, plus the
//! Gaussian measurement simulator.
//!
//! The angle parameter is the ray direction: rays at angle theta travel
//! along (cos theta, sin theta), and the detector axis is perpendicular to
//! them. Each pixel center is projected onto the detector axis and its
//! value is split over the two nearest bins by linear interpolation.
//! Back-projection
//! reads the same two weights, so forward/backward form an exact transpose
//! pair by construction, and interior columns of the system matrix sum to
//! exactly 1 (the projector is mass preserving at every angle).

use crate::error::{Error, Result};
use crate::image::Image;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Scan geometry for a centered parallel-beam setup with 180 integer
/// angles and detector pitch equal to the image pixel pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub image_size: usize,
    pub detector_count: usize,
}

pub const ANGLE_COUNT: usize = 180;

impl Geometry {
    /// Default detector sizing: 1.5x the image side.
    pub fn new(image_size: usize) -> Self {
        Geometry {
            image_size,
            detector_count: (3 * image_size + 1) / 2,
        }
    }

    pub fn with_detector_count(image_size: usize, detector_count: usize) -> Result<Self> {
        let min = (2.0_f64.sqrt() * image_size as f64).ceil() as usize;
        if detector_count < min {
            return Err(Error::Config(format!(
                "detector_count {} below coverage minimum {}",
                detector_count, min
            )));
        }
        Ok(Geometry {
            image_size,
            detector_count,
        })
    }
}

/// One noisy detector readout at a single angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub angle_deg: u32,
    pub values: Vec<f64>,
    pub noise_sigma: f64,
}

fn check_angle(angle_deg: u32) -> Result<f64> {
    if angle_deg >= ANGLE_COUNT as u32 {
        return Err(Error::Domain(format!(
            "angle {} outside [0, 180)",
            angle_deg
        )));
    }
    Ok((angle_deg as f64).to_radians())
}

/// Projection of `image` onto the detector at `angle_deg`.
pub fn forward_project(image: &Image, angle_deg: u32, geom: &Geometry) -> Result<Vec<f64>> {
    let theta = check_angle(angle_deg)?;
    let n = geom.image_size;
    if image.size() != n {
        return Err(Error::Domain(format!(
            "image size {} does not match geometry {}",
            image.size(),
            n
        )));
    }
    // detector axis is perpendicular to the ray direction
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let c_img = (n as f64 - 1.0) / 2.0;
    let c_det = (geom.detector_count as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; geom.detector_count];
    for row in 0..n {
        let y = row as f64 - c_img;
        let base = row * n;
        for col in 0..n {
            let v = image.pixels()[base + col];
            if v == 0.0 {
                continue;
            }
            let x = col as f64 - c_img;
            let u = -x * sin_t + y * cos_t + c_det;
            let i0 = u.floor();
            let frac = u - i0;
            let i0 = i0 as isize;
            if i0 >= 0 && (i0 as usize) < geom.detector_count {
                out[i0 as usize] += v * (1.0 - frac);
            }
            let i1 = i0 + 1;
            if i1 >= 0 && (i1 as usize) < geom.detector_count {
                out[i1 as usize] += v * frac;
            }
        }
    }
    Ok(out)
}

/// Exact adjoint of [`forward_project`].
pub fn back_project(values: &[f64], angle_deg: u32, geom: &Geometry) -> Result<Image> {
    let theta = check_angle(angle_deg)?;
    if values.len() != geom.detector_count {
        return Err(Error::Domain(format!(
            "detector vector length {} does not match geometry {}",
            values.len(),
            geom.detector_count
        )));
    }
    let n = geom.image_size;
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let c_img = (n as f64 - 1.0) / 2.0;
    let c_det = (geom.detector_count as f64 - 1.0) / 2.0;
    let mut img = Image::zeros(n);
    for row in 0..n {
        let y = row as f64 - c_img;
        for col in 0..n {
            let x = col as f64 - c_img;
            let u = -x * sin_t + y * cos_t + c_det;
            let i0 = u.floor();
            let frac = u - i0;
            let i0 = i0 as isize;
            let mut acc = 0.0;
            if i0 >= 0 && (i0 as usize) < geom.detector_count {
                acc += values[i0 as usize] * (1.0 - frac);
            }
            let i1 = i0 + 1;
            if i1 >= 0 && (i1 as usize) < geom.detector_count {
                acc += values[i1 as usize] * frac;
            }
            img.set(row, col, acc);
        }
    }
    Ok(img)
}

/// Simulates y = A(theta) x + eps with eps ~ N(0, sigma^2 I).
pub fn simulate_measurement(
    truth: &Image,
    angle_deg: u32,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Measurement> {
    let mut values = forward_project(truth, angle_deg, &Geometry::new(truth.size()))?;
    if sigma > 0.0 {
        for v in values.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *v += sigma * eps;
        }
    }
    Ok(Measurement {
        angle_deg,
        values,
        noise_sigma: sigma,
    })
}

/// Same as [`simulate_measurement`] but for an explicit geometry.
pub fn simulate_measurement_geom(
    truth: &Image,
    angle_deg: u32,
    sigma: f64,
    geom: &Geometry,
    rng: &mut ChaCha8Rng,
) -> Result<Measurement> {
    let mut values = forward_project(truth, angle_deg, geom)?;
    if sigma > 0.0 {
        for v in values.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *v += sigma * eps;
        }
    }
    Ok(Measurement {
        angle_deg,
        values,
        noise_sigma: sigma,
    })
}

/// Noise sigma for a relative level: level times the mean absolute value
/// of the full clean 180-angle sinogram of `truth`.
pub fn noise_sigma_for_level(truth: &Image, level: f64, geom: &Geometry) -> Result<f64> {
    if level < 0.0 {
        return Err(Error::Domain("noise level must be >= 0".into()));
    }
    if level == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for angle in 0..ANGLE_COUNT as u32 {
        let proj = forward_project(truth, angle, geom)?;
        sum += proj.iter().map(|v| v.abs()).sum::<f64>();
        count += proj.len();
    }
    Ok(level * sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

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

    fn rand_image(n: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_vec(n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect())
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let geom = Geometry::new(16);
        for angle in [0, 45, 90, 137] {
            let p = forward_project(&Image::zeros(16), angle, &geom).unwrap();
            assert!(p.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_pixel_mass_preserved_at_every_angle() {
        let n = 32;
        let geom = Geometry::new(n);
        let mut img = Image::zeros(n);
        img.set(n / 2, n / 2, 1.0);
        for angle in 0..ANGLE_COUNT as u32 {
            let p = forward_project(&img, angle, &geom).unwrap();
            let mass: f64 = p.iter().sum();
            assert!((mass - 1.0).abs() < 1e-9, "angle {angle}: mass {mass}");
        }
    }

    #[test]
    fn disk_projection_symmetric_between_axes() {
        let geom = Geometry::new(64);
        let disk = disk_image(64, 20.0);
        let p0 = forward_project(&disk, 0, &geom).unwrap();
        let p90 = forward_project(&disk, 90, &geom).unwrap();
        for (a, b) in p0.iter().zip(&p90) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_angle_out_of_range() {
        let geom = Geometry::new(8);
        assert!(forward_project(&Image::zeros(8), 180, &geom).is_err());
        assert!(back_project(&vec![0.0; geom.detector_count], 255, &geom).is_err());
    }

    #[test]
    fn zero_vector_backprojects_to_zero() {
        let geom = Geometry::new(16);
        let img = back_project(&vec![0.0; geom.detector_count], 73, &geom).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_dot_product_identity() {
        let n = 24;
        let geom = Geometry::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let x = rand_image(n, &mut rng);
            let y: Vec<f64> = (0..geom.detector_count)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let angle = rng.gen_range(0..180u32);
            let ax = forward_project(&x, angle, &geom).unwrap();
            let aty = back_project(&y, angle, &geom).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x
                .pixels()
                .iter()
                .zip(aty.pixels())
                .map(|(a, b)| a * b)
                .sum();
            let denom = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!(
                ((lhs - rhs) / denom).abs() < 1e-10,
                "trial {trial} angle {angle}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn backprojected_one_hot_bin_supported_on_ray_band() {
        let n = 32;
        let geom = Geometry::new(n);
        let angle = 30u32;
        let bin = geom.detector_count / 2 + 5;
        let mut v = vec![0.0; geom.detector_count];
        v[bin] = 1.0;
        let img = back_project(&v, angle, &geom).unwrap();
        // oracle: pixel is on the band iff its detector coordinate is
        // within the interpolation footprint of the bin
        let theta = (angle as f64).to_radians();
        let c_img = (n as f64 - 1.0) / 2.0;
        let c_det = (geom.detector_count as f64 - 1.0) / 2.0;
        for r in 0..n {
            for col in 0..n {
                let u = -(col as f64 - c_img) * theta.sin()
                    + (r as f64 - c_img) * theta.cos()
                    + c_det;
                let inside = (u - bin as f64).abs() < 1.0;
                let val = img.get(r, col);
                if !inside {
                    assert_eq!(val, 0.0, "pixel ({r},{col}) off-band but nonzero");
                } else if (u - bin as f64).abs() < 0.9 {
                    assert!(val > 0.0, "pixel ({r},{col}) on-band but zero");
                }
            }
        }
    }

    #[test]
    fn linearity_of_forward_projection() {
        let n = 20;
        let geom = Geometry::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = rand_image(n, &mut rng);
        let z = rand_image(n, &mut rng);
        let (a, b) = (0.7, -1.3);
        let combo = Image::from_vec(
            n,
            x.pixels()
                .iter()
                .zip(z.pixels())
                .map(|(xv, zv)| a * xv + b * zv)
                .collect(),
        );
        for angle in [0u32, 17, 45, 90, 133, 179] {
            let p_combo = forward_project(&combo, angle, &geom).unwrap();
            let px = forward_project(&x, angle, &geom).unwrap();
            let pz = forward_project(&z, angle, &geom).unwrap();
            for i in 0..geom.detector_count {
                assert!((p_combo[i] - (a * px[i] + b * pz[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_equivariance_at_zero_degrees() {
        let n = 32;
        let geom = Geometry::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = rand_image(n, &mut rng);
        // translate 3 pixels down (perpendicular to the 0-degree rays,
        // which travel along the columns)
        let mut shifted = Image::zeros(n);
        for r in 3..n {
            for col in 0..n {
                shifted.set(r, col, x.get(r - 3, col));
            }
        }
        let p = forward_project(&x, 0, &geom).unwrap();
        let ps = forward_project(&shifted, 0, &geom).unwrap();
        let off = (geom.detector_count - n) / 2;
        // interior bins: original rows 0..n-3 land at bins off+3..off+n
        for r in 0..n - 3 {
            assert!((ps[off + r + 3] - p[off + r]).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_measurement_equals_projection() {
        let disk = disk_image(32, 8.0);
        let geom = Geometry::new(32);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = simulate_measurement(&disk, 25, 0.0, &mut rng).unwrap();
        assert_eq!(m.values, forward_project(&disk, 25, &geom).unwrap());
    }

    #[test]
    fn measurement_deterministic_under_rng_state() {
        let disk = disk_image(32, 8.0);
        let mut r1 = ChaCha8Rng::seed_from_u64(15);
        let mut r2 = ChaCha8Rng::seed_from_u64(15);
        let m1 = simulate_measurement(&disk, 60, 0.5, &mut r1).unwrap();
        let m2 = simulate_measurement(&disk, 60, 0.5, &mut r2).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn empirical_noise_std_matches_sigma() {
        let disk = disk_image(64, 20.0);
        let geom = Geometry::new(64);
        let sigma = 0.35;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let clean = forward_project(&disk, 40, &geom).unwrap();
        let mut sq = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let m = simulate_measurement(&disk, 40, sigma, &mut rng).unwrap();
            for (n, c) in m.values.iter().zip(&clean) {
                sq += (n - c) * (n - c);
            }
            count += clean.len();
        }
        let emp = (sq / count as f64).sqrt();
        assert!(
            (emp - sigma).abs() / sigma < 0.02,
            "empirical {emp} vs sigma {sigma}"
        );
    }

    #[test]
    fn noise_sigma_for_level_cases() {
        let geom = Geometry::new(32);
        let disk = disk_image(32, 8.0);
        assert_eq!(noise_sigma_for_level(&disk, 0.0, &geom).unwrap(), 0.0);
        assert_eq!(
            noise_sigma_for_level(&Image::zeros(32), 0.05, &geom).unwrap(),
            0.0
        );
        // independent recomputation of the sinogram mean
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for angle in 0..180u32 {
            let p = forward_project(&disk, angle, &geom).unwrap();
            sum += p.iter().map(|v| v.abs()).sum::<f64>();
            cnt += p.len();
        }
        let want = 0.05 * sum / cnt as f64;
        let got = noise_sigma_for_level(&disk, 0.05, &geom).unwrap();
        assert!((got - want).abs() < 1e-12);
    }
}
