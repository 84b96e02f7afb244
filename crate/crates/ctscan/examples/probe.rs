// scratch diagnostic: can the agent network learn recon -> orientation
// as a supervised problem at the RL update budget (single-sample Adam)?
use ctscan::agent::{backward, forward, AgentOptimizer, AgentParams};
use ctscan::env::{reset, step, EnvConfig, RewardMode};
use ctscan::phantoms::{generate_dataset, DatasetSpec, ShapeKind};
use ctscan::projector::{Geometry, ANGLE_COUNT};
use ctscan::recon::ReconConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let updates: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(15000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let first_angle: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let n = 64;
    let spec = DatasetSpec::new(vec![ShapeKind::Ellipse], 300, n, 100);
    let records = generate_dataset(&spec).unwrap();
    let env_cfg = EnvConfig {
        geom: Geometry::new(n),
        recon: ReconConfig { iterations: 50, ..Default::default() },
        horizon: 3,
        noise_level: 0.0,
        mask_repeats: false,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = AgentParams::init(n, &mut rng).unwrap();
    let mut opt = AgentOptimizer::new(&params, lr, 1e-5);

    let mut window_err = Vec::new();
    for u in 0..updates {
        let idx = rng.gen_range(0..records.len());
        let (img, shape) = &records[idx];
        let mut st = reset(img, &env_cfg, &mut rng).unwrap();
        step(&mut st, first_angle, RewardMode::Incremental, &env_cfg, &mut rng).unwrap();
        let label = shape.rotation_deg.rem_euclid(180.0).round() as usize % ANGLE_COUNT;

        let cache = forward(&params, &st.recon, &st.angle_vec).unwrap();
        let probs = &cache.probs.data;
        let mut d_logits = vec![0.0; ANGLE_COUNT];
        for j in 0..ANGLE_COUNT {
            d_logits[j] = probs[j] - if j == label { 1.0 } else { 0.0 };
        }
        let pred = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        window_err.push(circ_dist(pred as f64, label as f64));
        let grads = backward(&params, &cache, &d_logits, 0.0);
        opt.apply(&mut params, &grads);
        if (u + 1) % 500 == 0 {
            let mean: f64 = window_err.iter().sum::<f64>() / window_err.len() as f64;
            println!("update {:5}  mean circ err (last 500) = {mean:.2} deg", u + 1);
            window_err.clear();
        }
    }
}
