use coopfuse::localization::{
    correct_cpm, max_consensus_search, pivot_of, refine_alignment, ConsensusConfig, LandmarkClass, LandmarkPoint,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn lm(x: f64, y: f64, class: LandmarkClass) -> LandmarkPoint<f64> {
    LandmarkPoint::new(x, y, class)
}

fn street(rng: &mut ChaCha8Rng, poles: usize, cars: usize, walls: usize) -> Vec<LandmarkPoint<f64>> {
    let mut out = Vec::new();
    for (n, class) in [(poles, LandmarkClass::Pole), (cars, LandmarkClass::VehicleCenter), (walls, LandmarkClass::WallFence)] {
        for _ in 0..n {
            out.push(lm(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), class));
        }
    }
    out
}

/// Coop view of `ego` whose correction (about the coop centroid) is
/// exactly `(dx, dy, dyaw)`.
fn displaced(ego: &[LandmarkPoint<f64>], dx: f64, dy: f64, dyaw: f64) -> Vec<LandmarkPoint<f64>> {
    let n = ego.len() as f64;
    let (cx, cy) = (ego.iter().map(|p| p.x).sum::<f64>() / n, ego.iter().map(|p| p.y).sum::<f64>() / n);
    let (s, c) = (-dyaw).sin_cos();
    ego.iter()
        .map(|p| {
            let (u, v) = (p.x - cx, p.y - cy);
            lm(c * u - s * v + cx - dx, s * u + c * v + cy - dy, p.class)
        })
        .collect()
}

#[test]
fn consensus_monotone_in_inlier_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let jitter = Normal::new(0.0, 0.3).unwrap();
    for _ in 0..40 {
        let ego = street(&mut rng, 8, 4, 4);
        let mut coop = displaced(&ego, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.1..0.1));
        for p in &mut coop {
            p.x += jitter.sample(&mut rng);
            p.y += jitter.sample(&mut rng);
        }
        let mut last = 0;
        for d in [0.1, 0.25, 0.5, 0.75, 1.0, 2.0] {
            let cfg = ConsensusConfig { inlier_dist: d, ..ConsensusConfig::default() };
            let c = max_consensus_search(&ego, &coop, &cfg).unwrap().consensus;
            assert!(c >= last, "inlier {d}: {c} < {last}");
            last = c;
        }
    }
}

#[test]
fn search_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let ego = street(&mut rng, 10, 5, 6);
    let coop = displaced(&ego, 0.3, -0.6, 0.05);
    let cfg = ConsensusConfig::default();
    let a = correct_cpm(&ego, &coop, &cfg).unwrap();
    let b = correct_cpm(&ego, &coop, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_sets_give_identity() {
    let cfg = ConsensusConfig::default();
    let p = vec![lm(1.0, 2.0, LandmarkClass::Pole)];
    for (e, c) in [(&p[..], &[][..]), (&[][..], &p[..])] {
        let r = max_consensus_search(e, c, &cfg).unwrap();
        assert_eq!((r.dx, r.dy, r.dyaw, r.consensus, r.confident), (0.0, 0.0, 0.0, 0, false));
    }
}

#[test]
fn disjoint_fields_are_not_confident() {
    let ego: Vec<_> = (0..10).map(|i| lm(i as f64 * 5.0, 0.0, LandmarkClass::Pole)).collect();
    let coop: Vec<_> = (0..10).map(|i| lm(i as f64 * 5.0, 200.0, LandmarkClass::Pole)).collect();
    let r = correct_cpm(&ego, &coop, &ConsensusConfig::default()).unwrap();
    assert!(!r.confident);
    assert_eq!((r.dx, r.dy, r.dyaw), (0.0, 0.0, 0.0));
}

proptest! {
    #[test]
    fn procrustes_recovers_noiseless_motion(
        pts in prop::collection::vec((-40.0..40.0f64, -40.0..40.0f64), 3..20),
        dx in -5.0..5.0f64, dy in -5.0..5.0f64, dyaw in -1.5707..1.5707f64,
    ) {
        let (s, c) = dyaw.sin_cos();
        let pairs: Vec<_> = pts
            .iter()
            .map(|&(x, y)| (lm(x, y, LandmarkClass::Pole), lm(c * x - s * y + dx, s * x + c * y + dy, LandmarkClass::Pole)))
            .collect();
        let spread = pts.iter().map(|p| (p.0 - pts[0].0).abs() + (p.1 - pts[0].1).abs()).fold(0.0, f64::max);
        prop_assume!(spread > 1.0);
        let r = refine_alignment(&pairs).unwrap();
        prop_assert!((r.dx - dx).abs() <= 1e-9 && (r.dy - dy).abs() <= 1e-9 && (r.dyaw - dyaw).abs() <= 1e-9, "{r:?}");
    }

    #[test]
    fn correction_is_translation_equivariant(seed in any::<u64>(), tx in -500.0..500.0f64, ty in -500.0..500.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ego = street(&mut rng, 8, 4, 3);
        let coop = displaced(&ego, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.1..0.1));
        let cfg = ConsensusConfig::default();
        let a = correct_cpm(&ego, &coop, &cfg).unwrap();
        let shift = |v: &[LandmarkPoint<f64>]| v.iter().map(|p| lm(p.x + tx, p.y + ty, p.class)).collect::<Vec<_>>();
        let b = correct_cpm(&shift(&ego), &shift(&coop), &cfg).unwrap();
        prop_assert!((a.dx - b.dx).abs() <= 1e-9 && (a.dy - b.dy).abs() <= 1e-9 && (a.dyaw - b.dyaw).abs() <= 1e-9);
        prop_assert_eq!(a.consensus, b.consensus);
        let pa = pivot_of(&coop);
        let pb = pivot_of(&shift(&coop));
        prop_assert!((pb.x - pa.x - tx).abs() <= 1e-9 && (pb.y - pa.y - ty).abs() <= 1e-9);
    }
}
