// scratch: upper bound for adaptive gain — angles placed relative to the
// known major-axis orientation, vs the equidistant baseline
use ctscan::env::EnvConfig;
use ctscan::eval::{evaluate, Policy};
use ctscan::image::Image;
use ctscan::phantoms::{generate_dataset, ood_rotation_split, DatasetSpec, ShapeKind};
use ctscan::projector::Geometry;
use ctscan::recon::{psnr, sirt_reconstruct, ReconConfig};
use ctscan::rngutil::derive_rng;

fn main() {
    let n = 64;
    let train_spec = DatasetSpec::new(vec![ShapeKind::Ellipse], 300, n, 100);
    let mut test_spec = DatasetSpec::new(vec![ShapeKind::Ellipse], 100, n, 200);
    test_spec.rotation_grid = ood_rotation_split(&train_spec.rotation_grid);
    let records = generate_dataset(&test_spec).unwrap();
    let geom = Geometry::new(n);
    let rcfg = ReconConfig { iterations: 50, ..Default::default() };

    for (name, offsets) in [
        ("tangent {r, r+60, r-60}", [0.0, 60.0, -60.0]),
        ("perp {r+90, r+30, r+150}", [90.0, 30.0, 150.0]),
        ("perp {r+90, r+60, r+120}", [90.0, 60.0, 120.0]),
        ("perp {r+90, r+75, r+105}", [90.0, 75.0, 105.0]),
        ("perp {r+90, r+85, r+95}", [90.0, 85.0, 95.0]),
        ("tangent {r, r+45, r-45}", [0.0, 45.0, -45.0]),
        ("tangent {r, r+30, r-30}", [0.0, 30.0, -30.0]),
        ("tangent {r, r+15, r-15}", [0.0, 15.0, -15.0]),
        ("tangent {r, r+5, r-5}", [0.0, 5.0, -5.0]),
    ] {
        let mut psnrs = Vec::new();
        for (i, (truth, spec)) in records.iter().enumerate() {
            let mut rng = derive_rng(777, i as u64);
            let meas: Vec<_> = offsets
                .iter()
                .map(|o| {
                    let a = ((spec.rotation_deg + o).rem_euclid(180.0)).round() as u32 % 180;
                    ctscan::projector::simulate_measurement(truth, a, 0.0, &mut rng).unwrap()
                })
                .collect();
            let rec = sirt_reconstruct(&meas, &geom, &rcfg, &Image::zeros(n)).unwrap();
            psnrs.push(psnr(&rec, truth).unwrap());
        }
        let mean = psnrs.iter().sum::<f64>() / psnrs.len() as f64;
        println!("{name}: {mean:.3}");
    }

    let env = EnvConfig {
        geom,
        recon: rcfg,
        horizon: 3,
        noise_level: 0.0,
        mask_repeats: false,
    };
    let imgs: Vec<Image> = records.iter().map(|(img, _)| img.clone()).collect();
    let equi = evaluate(&Policy::Equidistant, "ood", &imgs, &env, 777, 1).unwrap();
    println!("equidistant: {:.3}", equi.mean);
}
