// scratch diagnostic: score fixed angle triples on the ellipse OOD test set
use ctscan::env::{reset, step, EnvConfig, RewardMode};
use ctscan::phantoms::{generate_dataset, ood_rotation_split, DatasetSpec, ShapeKind};
use ctscan::projector::Geometry;
use ctscan::recon::ReconConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 64;
    let train_spec = DatasetSpec::new(vec![ShapeKind::Ellipse], 300, n, 100);
    let mut test_spec = DatasetSpec::new(vec![ShapeKind::Ellipse], 100, n, 200);
    test_spec.rotation_grid = ood_rotation_split(&train_spec.rotation_grid);
    let records = generate_dataset(&test_spec).unwrap();
    let env_cfg = EnvConfig {
        geom: Geometry::new(n),
        recon: ReconConfig { iterations: 50, ..Default::default() },
        horizon: 3,
        noise_level: 0.0,
        mask_repeats: false,
    };

    let mut triples: Vec<[u32; 3]> = vec![
        [0, 60, 120],
        [0, 45, 90],
        [0, 45, 135],
        [0, 90, 45],
        [45, 90, 135],
        [0, 30, 90],
        [0, 90, 135],
        [10, 70, 130],
        [20, 80, 140],
        [30, 90, 150],
        [40, 100, 160],
        [50, 110, 170],
        [0, 55, 125],
        [5, 65, 125],
        [15, 75, 135],
        [0, 50, 130],
        [0, 40, 140],
        [90, 30, 150],
    ];
    for c in 0..6 {
        triples.push([c * 10, c * 10 + 60, c * 10 + 120]);
    }

    for t in &triples {
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let mut sum = 0.0;
        for (img, _) in &records {
            let mut st = reset(img, &env_cfg, &mut rng).unwrap();
            for &a in t {
                step(&mut st, a, RewardMode::EndToEnd, &env_cfg, &mut rng).unwrap();
            }
            sum += st.psnr_curve.last().unwrap();
        }
        println!("{:?}  mean psnr {:.3}", t, sum / records.len() as f64);
    }

    // step-3-only oracle: fixed {0,60}, best third angle per phantom
    {
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let mut sum = 0.0;
        for (img, _) in &records {
            let mut base = reset(img, &env_cfg, &mut rng).unwrap();
            step(&mut base, 0, RewardMode::EndToEnd, &env_cfg, &mut rng).unwrap();
            step(&mut base, 60, RewardMode::EndToEnd, &env_cfg, &mut rng).unwrap();
            let mut best = f64::NEG_INFINITY;
            for a in (0..180).step_by(3) {
                let mut st = base.clone();
                step(&mut st, a, RewardMode::EndToEnd, &env_cfg, &mut rng).unwrap();
                best = best.max(*st.psnr_curve.last().unwrap());
            }
            sum += best;
        }
        println!("step-3 oracle (fixed 0,60)  mean psnr {:.3}", sum / records.len() as f64);
    }

    // quantized-orientation oracles: round r to K bins, use {q, q+45, q-45}
    for k in [2usize, 4, 6, 9, 18, 36, 180] {
        let binw = 180.0 / k as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let mut sum = 0.0;
        for (img, shape) in &records {
            let q = ((shape.rotation_deg / binw).round() * binw).rem_euclid(180.0) as i32;
            let angles = [
                q.rem_euclid(180) as u32,
                (q + 45).rem_euclid(180) as u32,
                (q - 45).rem_euclid(180) as u32,
            ];
            let mut st = reset(img, &env_cfg, &mut rng).unwrap();
            for &a in &angles {
                step(&mut st, a, RewardMode::EndToEnd, &env_cfg, &mut rng).unwrap();
            }
            sum += st.psnr_curve.last().unwrap();
        }
        println!("K={k:3} quantized oracle  mean psnr {:.3}", sum / records.len() as f64);
    }
}
