use coopfuse::eval::{average_precision, interpolated_ap, match_to_gt, pr_curve};
use coopfuse::geometry::BBox7;
use coopfuse::matching::Detection;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i64>;

/// Independent definition: AP = Σ over each true positive k of
/// (1 / n_gt) · max precision at any rank with recall ≥ k / n_gt.
fn oracle_ap(hits: &[bool], n_gt: usize) -> Q {
    let n = Q::from_integer(n_gt as i64);
    let mut prec = Vec::new();
    let mut tp_at = Vec::new();
    let mut tp = 0;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as i64;
        prec.push(Q::new(tp, i as i64 + 1));
        tp_at.push(tp);
    }
    let mut ap = Q::from_integer(0);
    for k in 1..=tp {
        let best = prec.iter().zip(&tp_at).filter(|(_, &t)| t >= k).map(|(p, _)| *p).max().unwrap();
        ap += best / n;
    }
    ap
}

#[test]
fn hand_case_is_five_sixths() {
    let ranked = [(Q::new(9, 10), true), (Q::new(8, 10), false), (Q::new(7, 10), true)];
    let curve = pr_curve(&ranked, 2);
    assert_eq!(interpolated_ap(&curve, 2), Q::new(5, 6));
    assert_eq!(oracle_ap(&[true, false, true], 2), Q::new(5, 6));
}

#[test]
fn rational_ap_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..2000 {
        let n = rng.random_range(0..30);
        let hits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let tp = hits.iter().filter(|&&h| h).count();
        let n_gt = tp + rng.random_range(0..5);
        if n_gt == 0 {
            continue;
        }
        let ranked: Vec<(Q, bool)> = hits.iter().enumerate().map(|(i, &h)| (Q::new(100 - i as i64, 100), h)).collect();
        let curve = pr_curve(&ranked, n_gt);
        assert_eq!(interpolated_ap(&curve, n_gt), oracle_ap(&hits, n_gt));
    }
}

fn gt_row(n: usize) -> Vec<BBox7<f64>> {
    (0..n).map(|i| BBox7::new(10.0 * i as f64, 0.0, 0.8, 2.0, 4.0, 1.6, 0.0).unwrap()).collect()
}

fn noisy_preds(gt: &[BBox7<f64>], rng: &mut ChaCha8Rng) -> Vec<Detection<f64>> {
    let mut out = Vec::new();
    for g in gt {
        if rng.random_bool(0.8) {
            let b = BBox7 { x: g.x + rng.random_range(-1.2..1.2), y: g.y + rng.random_range(-0.6..0.6), ..*g };
            out.push(Detection::new(b, rng.random_range(0.05..1.0)).unwrap());
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let b = BBox7::new(rng.random_range(0.0..100.0), 20.0, 0.8, 2.0, 4.0, 1.6, 0.3).unwrap();
        out.push(Detection::new(b, rng.random_range(0.05..1.0)).unwrap());
    }
    out
}

#[test]
fn ap_edge_cases() {
    let gt = gt_row(3);
    assert_eq!(average_precision(&[], &gt, 0.5).ap, 0.0);
    assert_eq!(average_precision::<f64>(&[], &[], 0.5).ap, 1.0);
    let one = [Detection::new(gt[0], 0.5).unwrap()];
    assert_eq!(average_precision(&one, &[], 0.5).ap, 0.0);
    let perfect: Vec<_> = gt.iter().map(|g| Detection::new(*g, 0.9).unwrap()).collect();
    assert_eq!(average_precision(&perfect, &gt, 0.7).ap, 1.0);
}

proptest! {
    #[test]
    fn ap_survives_monotone_rescaling(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = gt_row(n);
        let preds = noisy_preds(&gt, &mut rng);
        let squashed: Vec<_> = preds.iter().map(|d| Detection { score: d.score.powi(3) * 0.5 + 0.1, ..*d }).collect();
        for thr in [0.3, 0.5, 0.7] {
            prop_assert_eq!(average_precision(&preds, &gt, thr).ap, average_precision(&squashed, &gt, thr).ap);
        }
    }

    #[test]
    fn ap_non_increasing_in_threshold(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = gt_row(n);
        let preds = noisy_preds(&gt, &mut rng);
        let aps: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&t| average_precision(&preds, &gt, t).ap).collect();
        for w in aps.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{aps:?}");
        }
    }

    #[test]
    fn low_score_false_positive_never_helps(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = gt_row(n);
        let mut preds = noisy_preds(&gt, &mut rng);
        let before = average_precision(&preds, &gt, 0.5).ap;
        let far = BBox7::new(-500.0, -500.0, 0.8, 2.0, 4.0, 1.6, 0.0).unwrap();
        preds.push(Detection::new(far, 0.01).unwrap());
        prop_assert!(average_precision(&preds, &gt, 0.5).ap <= before);
    }

    #[test]
    fn tp_count_bounded(seed in any::<u64>(), n in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = gt_row(n);
        let mut preds = noisy_preds(&gt, &mut rng);
        preds.extend(preds.clone());
        let tp = match_to_gt(&preds, &gt, 0.3).iter().filter(|&&h| h).count();
        prop_assert!(tp <= preds.len().min(gt.len()));
    }
}
