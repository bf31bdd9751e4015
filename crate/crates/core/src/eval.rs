//! Detection scoring: greedy one-to-one matching against ground truth,
//! precision-recall curves and all-point interpolated average precision,
//! plus the fusion pipelines compared in experiments.

use std::fmt;
use std::str::FromStr;

use num_traits::Num;

use crate::error::{Error, Result};
use crate::geometry::{bev_iou_unchecked, transform_box, BBox7};
use crate::localization::{correct_cpm, ConsensusConfig};
use crate::matching::{fuse_proposals, nms_fuse, Detection, MatchConfig};
use crate::scalar::Real;
use crate::simulator::FrameRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint<T> {
    pub recall: T,
    pub precision: T,
    pub score_threshold: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult<T> {
    pub iou_thr: T,
    pub ap: T,
    pub n_gt: usize,
    pub n_pred: usize,
    pub curve: Vec<PrPoint<T>>,
}

/// Positions of `scores` in descending order, ties by position.
fn ranking<T: PartialOrd>(scores: impl Iterator<Item = T>) -> Vec<usize> {
    let s: Vec<T> = scores.collect();
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// True-positive flags, in input order. Predictions are visited by
/// descending score; each takes the unmatched ground truth box with the
/// highest BEV IoU if that IoU reaches `iou_thr`.
pub fn match_to_gt<T: Real>(preds: &[Detection<T>], gt: &[BBox7<T>], iou_thr: T) -> Vec<bool> {
    let mut taken = vec![false; gt.len()];
    let mut flags = vec![false; preds.len()];
    for i in ranking(preds.iter().map(|p| p.score)) {
        let mut best: Option<(usize, T)> = None;
        for (j, g) in gt.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let iou = bev_iou_unchecked(&preds[i].bbox, g);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        if let Some((j, iou)) = best {
            if iou >= iou_thr {
                taken[j] = true;
                flags[i] = true;
            }
        }
    }
    flags
}

fn count<T: Num + Copy>(n: usize) -> T {
    (0..n).fold(T::zero(), |a, _| a + T::one())
}

/// Cumulative precision/recall over score-ranked `(score, is_tp)` pairs.
/// Works for any field, including exact rationals.
pub fn pr_curve<T: Num + Copy + PartialOrd>(ranked: &[(T, bool)], n_gt: usize) -> Vec<PrPoint<T>> {
    let n_gt_t: T = count(n_gt);
    let mut tp = T::zero();
    let mut seen = T::zero();
    ranked
        .iter()
        .map(|&(score, hit)| {
            seen = seen + T::one();
            if hit {
                tp = tp + T::one();
            }
            let recall = if n_gt == 0 { T::zero() } else { tp / n_gt_t };
            PrPoint { recall, precision: tp / seen, score_threshold: score }
        })
        .collect()
}

/// Area under the monotone precision envelope of a PR curve.
pub fn interpolated_ap<T: Num + Copy + PartialOrd>(curve: &[PrPoint<T>], n_gt: usize) -> T {
    if n_gt == 0 {
        return if curve.is_empty() { T::one() } else { T::zero() };
    }
    let mut envelope: Vec<T> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        if envelope[i + 1] > envelope[i] {
            envelope[i] = envelope[i + 1];
        }
    }
    let mut ap = T::zero();
    let mut prev = T::zero();
    for (p, env) in curve.iter().zip(envelope) {
        if p.recall > prev {
            ap = ap + (p.recall - prev) * env;
            prev = p.recall;
        }
    }
    ap
}

pub fn average_precision<T: Real>(preds: &[Detection<T>], gt: &[BBox7<T>], iou_thr: T) -> ApResult<T> {
    let flags = match_to_gt(preds, gt, iou_thr);
    let ranked: Vec<(T, bool)> = ranking(preds.iter().map(|p| p.score)).into_iter().map(|i| (preds[i].score, flags[i])).collect();
    let curve = pr_curve(&ranked, gt.len());
    ApResult { iou_thr, ap: interpolated_ap(&curve, gt.len()), n_gt: gt.len(), n_pred: preds.len(), curve }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pipeline {
    NoFusion,
    Nms,
    Alg1,
    Alg1WithCorrection,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [Pipeline::NoFusion, Pipeline::Nms, Pipeline::Alg1, Pipeline::Alg1WithCorrection];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::NoFusion => "no_fusion",
            Pipeline::Nms => "nms",
            Pipeline::Alg1 => "alg1",
            Pipeline::Alg1WithCorrection => "alg1_with_correction",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown pipeline `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub matching: MatchConfig<f64>,
    pub consensus: ConsensusConfig<f64>,
    /// Suppression IoU of the NMS baseline.
    pub nms_iou: f64,
    /// Fused boxes above this IoU with a participating CAV's own box are
    /// replaced by that box.
    pub cav_iou: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { matching: MatchConfig::default(), consensus: ConsensusConfig::default(), nms_iou: 0.01, cav_iou: 0.3 }
    }
}

/// Ego-frame predictions of one frame under `pipeline`, using the first
/// `n_v` cooperative messages. Participating CAVs' own boxes are added with
/// score 1.
pub fn fused_predictions(
    rec: &FrameRecord,
    pipeline: Pipeline,
    n_v: usize,
    cfg: &FusionConfig,
) -> Result<Vec<Detection<f64>>> {
    let ego = rec.cpms.first().ok_or_else(|| Error::invalid("frame holds no ego message"))?;
    let n_used = if pipeline == Pipeline::NoFusion { 0 } else { n_v.min(rec.cpms.len() - 1) };
    let coops = &rec.cpms[1..=n_used];

    let mut preds = if coops.is_empty() {
        ego.proposals.clone()
    } else {
        let mut per_cav = vec![(0usize, ego.proposals.clone())];
        for (k, m) in coops.iter().enumerate() {
            let mut boxes: Vec<Detection<f64>> = m
                .proposals
                .iter()
                .map(|d| Detection { bbox: transform_box(&d.bbox, &m.pose, &ego.pose), score: d.score })
                .collect();
            if pipeline == Pipeline::Alg1WithCorrection {
                let lms = crate::geometry::transform_points(&m.correction_points, &m.pose, &ego.pose);
                let corr = correct_cpm(&ego.correction_points, &lms, &cfg.consensus)?;
                if corr.confident {
                    boxes.iter_mut().for_each(|d| d.bbox = corr.apply_box(&d.bbox));
                }
            }
            per_cav.push((k + 1, boxes));
        }
        match pipeline {
            Pipeline::Nms => {
                let all: Vec<_> = per_cav.into_iter().flat_map(|(_, d)| d).collect();
                nms_fuse(&all, cfg.nms_iou)
            }
            _ => fuse_proposals(&per_cav, &cfg.matching),
        }
    };

    let cav_boxes: Vec<BBox7<f64>> = rec.cav_gt[..=n_used].iter().map(|&i| rec.gt[i]).collect();
    preds.retain(|d| {
        d.bbox.x.hypot(d.bbox.y) <= rec.det_range
            && cav_boxes.iter().all(|c| bev_iou_unchecked(&d.bbox, c) <= cfg.cav_iou)
    });
    preds.extend(cav_boxes.into_iter().map(|bbox| Detection { bbox, score: 1.0 }));
    Ok(preds)
}

/// AP per threshold, pooling every frame's predictions into one global
/// score ranking.
pub fn evaluate_run(
    frames: &[FrameRecord],
    pipeline: Pipeline,
    n_v: usize,
    iou_list: &[f64],
    cfg: &FusionConfig,
) -> Result<Vec<ApResult<f64>>> {
    if let Some(first) = frames.first() {
        if let Some(bad) = frames.iter().position(|f| f.config_id != first.config_id) {
            return Err(Error::invalid(format!("frame {bad} was generated from a different configuration")));
        }
    }
    let preds = frames
        .iter()
        .map(|f| fused_predictions(f, pipeline, n_v, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(score_pooled(frames, &preds, iou_list))
}

/// Pools precomputed per-frame predictions; `preds[i]` belongs to `frames[i]`.
pub fn score_pooled(frames: &[FrameRecord], preds: &[Vec<Detection<f64>>], iou_list: &[f64]) -> Vec<ApResult<f64>> {
    let n_gt: usize = frames.iter().map(|f| f.gt.len()).sum();
    let n_pred: usize = preds.iter().map(Vec::len).sum();
    iou_list
        .iter()
        .map(|&thr| {
            // (score, frame, rank within frame, tp)
            let mut pooled = Vec::with_capacity(n_pred);
            for (fi, (f, p)) in frames.iter().zip(preds).enumerate() {
                let flags = match_to_gt(p, &f.gt, thr);
                for (rank, i) in ranking(p.iter().map(|d| d.score)).into_iter().enumerate() {
                    pooled.push((p[i].score, fi, rank, flags[i]));
                }
            }
            pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let ranked: Vec<(f64, bool)> = pooled.iter().map(|p| (p.0, p.3)).collect();
            let curve = pr_curve(&ranked, n_gt);
            ApResult { iou_thr: thr, ap: interpolated_ap(&curve, n_gt), n_gt, n_pred, curve }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt_box(x: f64) -> BBox7<f64> {
        BBox7::new(x, 0.0, 0.8, 2.0, 4.0, 1.6, 0.0).unwrap()
    }

    fn det(b: BBox7<f64>, s: f64) -> Detection<f64> {
        Detection { bbox: b, score: s }
    }

    #[test]
    fn exact_predictions_are_all_tp() {
        let gt = vec![gt_box(0.0), gt_box(10.0), gt_box(20.0)];
        let preds: Vec<_> = gt.iter().map(|b| det(*b, 0.7)).collect();
        assert_eq!(match_to_gt(&preds, &gt, 0.7), vec![true; 3]);
        assert_eq!(average_precision(&preds, &gt, 0.7).ap, 1.0);
    }

    #[test]
    fn duplicate_prediction_is_fp() {
        let gt = vec![gt_box(0.0)];
        let preds = vec![det(gt_box(0.1), 0.6), det(gt_box(0.0), 0.9)];
        assert_eq!(match_to_gt(&preds, &gt, 0.5), vec![false, true]);
    }

    #[test]
    fn below_threshold_is_fp() {
        // longitudinal shift d gives IoU (4 - d) / (4 + d); d = 1 → 0.6
        let gt = vec![gt_box(0.0)];
        let preds = vec![det(gt_box(1.0), 0.9)];
        assert!((bev_iou_unchecked(&preds[0].bbox, &gt[0]) - 0.6).abs() < 1e-12);
        assert_eq!(match_to_gt(&preds, &gt, 0.7), vec![false]);
        assert_eq!(match_to_gt(&preds, &gt, 0.5), vec![true]);
    }

    #[test]
    fn empty_cases() {
        let gt = vec![gt_box(0.0)];
        assert_eq!(average_precision(&[], &gt, 0.5).ap, 0.0);
        assert_eq!(average_precision::<f64>(&[], &[], 0.5).ap, 1.0);
        assert_eq!(average_precision(&[det(gt_box(0.0), 0.5)], &[], 0.5).ap, 0.0);
    }

    #[test]
    fn hand_case_is_five_sixths() {
        let gt = vec![gt_box(0.0), gt_box(10.0)];
        let preds = vec![det(gt_box(0.0), 0.9), det(gt_box(30.0), 0.8), det(gt_box(10.0), 0.7)];
        let r = average_precision(&preds, &gt, 0.5);
        assert!((r.ap - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.curve.len(), 3);
        assert_eq!(r.curve[1].recall, 0.5);
    }

    #[test]
    fn pipeline_names_round_trip() {
        for p in Pipeline::ALL {
            assert_eq!(p.name().parse::<Pipeline>().unwrap(), p);
        }
        assert!("fusion".parse::<Pipeline>().is_err());
    }
}
