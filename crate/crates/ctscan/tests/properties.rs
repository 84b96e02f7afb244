//! Randomized property coverage for the serialization formats and a few
//! geometric invariants.

use ctscan::config::RunConfig;
use ctscan::dataset::Dataset;
use ctscan::env::RewardMode;
use ctscan::eval::circular_distance_deg;
use ctscan::image::Image;
use ctscan::phantoms::{ShapeKind, ShapeSpec};
use ctscan::projector::{forward_project, Geometry};
use proptest::prelude::*;

fn arb_kind() -> impl Strategy<Value = ShapeKind> {
    prop_oneof![
        Just(ShapeKind::Circle),
        Just(ShapeKind::Ellipse),
        Just(ShapeKind::Triangle),
        Just(ShapeKind::Pentagon),
        Just(ShapeKind::Hexagon),
    ]
}

proptest! {
    #[test]
    fn config_render_parse_round_trip(
        image_size in prop_oneof![Just(16usize), Just(32), Just(64), Just(128)],
        episodes in 0usize..100_000,
        lr in 1e-6f64..1.0,
        gamma in 0.01f64..1.0,
        noise in 0.0f64..0.2,
        seed in any::<u64>(),
        incremental in any::<bool>(),
        kind in arb_kind(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.image_size = image_size;
        cfg.detector_count = Geometry::new(image_size).detector_count;
        cfg.episodes = episodes;
        cfg.lr = lr;
        cfg.gamma = gamma;
        cfg.noise_level = noise;
        cfg.train_seed = seed;
        cfg.reward_mode = if incremental {
            RewardMode::Incremental
        } else {
            RewardMode::EndToEnd
        };
        cfg.shape_kinds = vec![kind];
        let parsed = RunConfig::parse(&cfg.render()).unwrap();
        prop_assert_eq!(parsed, cfg);
    }

    #[test]
    fn dataset_round_trip_with_random_masks(
        bits in proptest::collection::vec(any::<bool>(), 64),
        rotation in 0.0f64..180.0,
        scale in 0.05f64..0.9,
        kind in arb_kind(),
    ) {
        let img = Image::from_vec(8, bits.iter().map(|&b| b as u8 as f64).collect());
        let spec = ShapeSpec {
            kind,
            rotation_deg: rotation,
            scale,
            center: (3.5, 3.5),
            aspect: 0.5,
        };
        let ds = Dataset::new(8, vec![(img, spec)]).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn projection_preserves_mass_for_random_images(
        pixels in proptest::collection::vec(0.0f64..1.0, 256),
        angle in 0u32..180,
    ) {
        let img = Image::from_vec(16, pixels);
        let geom = Geometry::new(16);
        let sino = forward_project(&img, angle, &geom).unwrap();
        let mass: f64 = img.pixels().iter().sum();
        let proj: f64 = sino.iter().sum();
        prop_assert!((mass - proj).abs() <= 1e-9 * mass.max(1.0));
    }

    #[test]
    fn circular_distance_properties(a in 0.0f64..360.0, b in 0.0f64..360.0) {
        let d = circular_distance_deg(a, b);
        prop_assert!((0.0..=90.0).contains(&d));
        // symmetry and period-180 invariance
        prop_assert!((d - circular_distance_deg(b, a)).abs() < 1e-9);
        prop_assert!((d - circular_distance_deg(a + 180.0, b)).abs() < 1e-9);
        prop_assert!(circular_distance_deg(a, a) < 1e-9);
    }
}
