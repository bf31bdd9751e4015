//! Cooperative proposal matching.
//!
//! Proposals from all vehicles (already in the ego frame) are clustered
//! around seed boxes by BEV IoU, each cluster's headings are aligned to its
//! dominant direction, and the cluster is merged into one box by
//! confidence-weighted averaging with a circular mean for the heading.
//! [`nms_fuse`] is the greedy NMS baseline used for comparison.

use crate::error::{Error, Result};
use crate::geometry::{angle_dist, bev_iou_unchecked, wrap, BBox7};
use crate::scalar::Real;

/// A box proposal with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Detection<T> {
    pub bbox: BBox7<T>,
    pub score: T,
}

impl<T: Real> Detection<T> {
    pub fn new(bbox: BBox7<T>, score: T) -> Result<Self> {
        let d = Self { bbox, score };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(self.score >= T::zero() && self.score <= T::one()) {
            return Err(Error::invalid(format!("score must lie in [0, 1], got {}", self.score)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedOrder {
    #[default]
    DescendingScore,
    InputOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig<T> {
    /// Members must exceed this BEV IoU with the cluster seed.
    pub iou_thr: T,
    /// Flip the higher-scoring direction set, as the original pseudo-code
    /// reads, instead of the lower-scoring one.
    pub literal_flip: bool,
    pub seed_order: SeedOrder,
}

impl<T: Real> Default for MatchConfig<T> {
    fn default() -> Self {
        Self { iou_thr: T::lit(0.3), literal_flip: false, seed_order: SeedOrder::DescendingScore }
    }
}

impl<T: Real> MatchConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thr > T::zero() && self.iou_thr < T::one()) {
            return Err(Error::invalid(format!("iou_thr must lie in (0, 1), got {}", self.iou_thr)));
        }
        Ok(())
    }
}

/// Detections grouped around one seed. `members[0]` is the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T> {
    pub members: Vec<Detection<T>>,
    /// Source tag of every member (CAV id, or input position for untagged input).
    pub source_ids: Vec<usize>,
    /// Position of every member in the flattened input.
    pub indices: Vec<usize>,
}

impl<T: Real> Cluster<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn seed_sequence<T: Real>(all: &[Detection<T>], order: SeedOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..all.len()).collect();
    if order == SeedOrder::DescendingScore {
        // stable: ties keep input order
        idx.sort_by(|&a, &b| all[b].score.partial_cmp(&all[a].score).unwrap_or(std::cmp::Ordering::Equal));
    }
    idx
}

/// Clusters untagged detections; `source_ids` holds input positions.
pub fn cluster_proposals<T: Real>(all: &[Detection<T>], cfg: &MatchConfig<T>) -> Vec<Cluster<T>> {
    let tags: Vec<usize> = (0..all.len()).collect();
    cluster_tagged(all, &tags, cfg)
}

/// Clusters detections carrying a per-detection source tag.
pub fn cluster_tagged<T: Real>(all: &[Detection<T>], tags: &[usize], cfg: &MatchConfig<T>) -> Vec<Cluster<T>> {
    assert_eq!(all.len(), tags.len(), "one tag per detection");
    let order = seed_sequence(all, cfg.seed_order);
    let mut taken = vec![false; all.len()];
    let mut clusters = Vec::new();
    for (pos, &seed) in order.iter().enumerate() {
        if taken[seed] {
            continue;
        }
        taken[seed] = true;
        let mut members = vec![seed];
        for &cand in &order[pos + 1..] {
            if !taken[cand] && bev_iou_unchecked(&all[cand].bbox, &all[seed].bbox) > cfg.iou_thr {
                taken[cand] = true;
                members.push(cand);
            }
        }
        clusters.push(Cluster {
            members: members.iter().map(|&i| all[i]).collect(),
            source_ids: members.iter().map(|&i| tags[i]).collect(),
            indices: members,
        });
    }
    clusters
}

/// Flips headings so that every member points along the dominant direction
/// of the cluster.
pub fn align_cluster_directions<T: Real>(c: &Cluster<T>, cfg: &MatchConfig<T>) -> Cluster<T> {
    let mut out = c.clone();
    if c.members.len() < 2 {
        return out;
    }
    let best = argmax_score(&c.members);
    let r_max = c.members[best].bbox.r;
    let half_pi = T::FRAC_PI_2();
    let same: Vec<bool> = c.members.iter().map(|d| angle_dist(d.bbox.r, r_max) <= half_pi).collect();
    let (mut s_same, mut s_opp) = (T::zero(), T::zero());
    for (d, &s) in c.members.iter().zip(&same) {
        if s {
            s_same = s_same + d.score;
        } else {
            s_opp = s_opp + d.score;
        }
    }
    // which side gets rotated by π
    let flip_same = if cfg.literal_flip {
        // argmax over (opposite, same); ties resolve to the first entry
        s_same > s_opp
    } else {
        // the lower-mass side loses; ties keep the side holding r_max
        s_same < s_opp
    };
    for (d, &s) in out.members.iter_mut().zip(&same) {
        if s == flip_same {
            d.bbox.r = wrap(d.bbox.r + T::PI());
        }
    }
    out
}

fn argmax_score<T: Real>(ds: &[Detection<T>]) -> usize {
    let mut best = 0;
    for (i, d) in ds.iter().enumerate() {
        if d.score > ds[best].score {
            best = i;
        }
    }
    best
}

/// Confidence-weighted merge of an aligned cluster. The merged score is the
/// highest member score.
pub fn merge_cluster<T: Real>(c: &Cluster<T>) -> Detection<T> {
    assert!(!c.members.is_empty(), "cannot merge an empty cluster");
    if c.members.len() == 1 {
        return c.members[0];
    }
    let total: T = c.members.iter().map(|d| d.score).sum();
    let n = T::from_count(c.members.len());
    let weight = |d: &Detection<T>| if total > T::zero() { d.score / total } else { T::one() / n };
    let mut acc = [T::zero(); 6];
    let (mut sin_sum, mut cos_sum) = (T::zero(), T::zero());
    let mut score = T::zero();
    for d in &c.members {
        let w = weight(d);
        let f = d.bbox.fields();
        for (a, v) in acc.iter_mut().zip(&f[..6]) {
            *a = *a + *v * w;
        }
        let (s, co) = d.bbox.r.sin_cos();
        sin_sum = sin_sum + w * s;
        cos_sum = cos_sum + w * co;
        score = score.max(d.score);
    }
    let bbox = BBox7 {
        x: acc[0],
        y: acc[1],
        z: acc[2],
        w: acc[3],
        l: acc[4],
        h: acc[5],
        r: wrap(sin_sum.atan2(cos_sum)),
    };
    Detection { bbox, score }
}

/// Clusters, aligns and merges proposals from several vehicles. Input must
/// already be expressed in the ego frame.
pub fn fuse_proposals<T: Real>(per_cav: &[(usize, Vec<Detection<T>>)], cfg: &MatchConfig<T>) -> Vec<Detection<T>> {
    let mut all = Vec::new();
    let mut tags = Vec::new();
    for (cav, dets) in per_cav {
        all.extend_from_slice(dets);
        tags.extend(std::iter::repeat_n(*cav, dets.len()));
    }
    cluster_tagged(&all, &tags, cfg)
        .iter()
        .map(|c| merge_cluster(&align_cluster_directions(c, cfg)))
        .collect()
}

/// Greedy NMS: keep the best remaining detection, drop everything with
/// BEV IoU above `nms_iou` against it.
pub fn nms_fuse<T: Real>(all: &[Detection<T>], nms_iou: T) -> Vec<Detection<T>> {
    let order = seed_sequence(all, SeedOrder::DescendingScore);
    let mut suppressed = vec![false; all.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(all[i]);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && bev_iou_unchecked(&all[i].bbox, &all[j].bbox) > nms_iou {
                suppressed[j] = true;
            }
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn det(x: f64, r: f64, score: f64) -> Detection<f64> {
        Detection::new(BBox7::new(x, 0.0, 0.8, 2.0, 4.0, 1.6, r).unwrap(), score).unwrap()
    }

    /// Unit squares along x; offset 0.5 gives IoU 1/3, offset 1 gives 0.
    fn square(x: f64, score: f64) -> Detection<f64> {
        Detection::new(BBox7::new(x, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap(), score).unwrap()
    }

    #[test]
    fn identical_pair_forms_one_cluster() {
        let cfg = MatchConfig::default();
        let c = cluster_proposals(&[det(0.0, 0.0, 0.6), det(0.0, 0.0, 0.7)], &cfg);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 2);
        assert_eq!(c[0].indices, vec![1, 0]);
    }

    #[test]
    fn disjoint_pair_forms_singletons() {
        let cfg = MatchConfig::default();
        let c = cluster_proposals(&[det(0.0, 0.0, 0.6), det(10.0, 0.0, 0.7)], &cfg);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn chain_splits_at_seed() {
        // A–B and B–C overlap by 1/3 of the union; A–C are disjoint
        let a = square(0.0, 0.9);
        let b = square(0.5, 0.8);
        let c = square(1.0, 0.7);
        let cfg = MatchConfig::default();
        let cl = cluster_proposals(&[c, a, b], &cfg);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].indices, vec![1, 2]);
        assert_eq!(cl[1].indices, vec![0]);
    }

    #[test]
    fn input_order_seeding() {
        let cfg = MatchConfig { seed_order: SeedOrder::InputOrder, ..MatchConfig::default() };
        let cl = cluster_proposals(&[square(1.0, 0.7), square(0.0, 0.9), square(0.5, 0.8)], &cfg);
        assert_eq!(cl[0].indices, vec![0, 2]);
        assert_eq!(cl[1].indices, vec![1]);
    }

    #[test]
    fn empty_input() {
        let cfg = MatchConfig::<f64>::default();
        assert!(cluster_proposals(&[], &cfg).is_empty());
        assert!(fuse_proposals(&[], &cfg).is_empty());
        assert!(nms_fuse::<f64>(&[], 0.3).is_empty());
    }

    fn cluster_of(ds: Vec<Detection<f64>>) -> Cluster<f64> {
        let n = ds.len();
        Cluster { members: ds, source_ids: (0..n).collect(), indices: (0..n).collect() }
    }

    #[test]
    fn align_equal_headings_unchanged() {
        let c = cluster_of(vec![det(0.0, 0.3, 0.9), det(0.1, 0.3, 0.5)]);
        assert_eq!(align_cluster_directions(&c, &MatchConfig::default()), c);
    }

    #[test]
    fn align_flips_minority() {
        let c = cluster_of(vec![det(0.0, 0.0, 0.9), det(0.0, PI, 0.1)]);
        let a = align_cluster_directions(&c, &MatchConfig::default());
        assert_eq!(a.members[0].bbox.r, 0.0);
        assert!(angle_dist(a.members[1].bbox.r, 0.0) < 1e-12);
    }

    #[test]
    fn align_flips_best_when_outweighed() {
        let c = cluster_of(vec![det(0.0, 0.0, 0.4), det(0.0, PI - 0.05, 0.3), det(0.0, -PI + 0.05, 0.3)]);
        let a = align_cluster_directions(&c, &MatchConfig::default());
        assert!((a.members[0].bbox.r - PI).abs() < 1e-12);
        assert_eq!(a.members[1].bbox.r, PI - 0.05);
        assert_eq!(a.members[2].bbox.r, -PI + 0.05);

        let lit = align_cluster_directions(&c, &MatchConfig { literal_flip: true, ..MatchConfig::default() });
        assert_eq!(lit.members[0].bbox.r, 0.0);
        assert!(angle_dist(lit.members[1].bbox.r, -0.05) < 1e-12);
        assert!(angle_dist(lit.members[2].bbox.r, 0.05) < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let same = cluster_of(vec![det(1.0, 0.2, 0.5), det(1.0, 0.2, 0.5)]);
        let m = merge_cluster(&same);
        for (u, v) in m.bbox.fields().iter().zip(same.members[0].bbox.fields()) {
            assert!((u - v).abs() < 1e-12);
        }

        let m = merge_cluster(&cluster_of(vec![det(0.0, 0.0, 0.25), det(1.0, 0.0, 0.75)]));
        assert!((m.bbox.x - 0.75).abs() < 1e-12);
        assert_eq!(m.score, 0.75);

        let m = merge_cluster(&cluster_of(vec![det(0.0, 0.1, 0.5), det(0.0, -0.1, 0.5)]));
        assert!(m.bbox.r.abs() < 1e-15);
    }

    #[test]
    fn merge_zero_scores_uses_uniform_weights() {
        let m = merge_cluster(&cluster_of(vec![det(0.0, 0.0, 0.0), det(2.0, 0.0, 0.0)]));
        assert!((m.bbox.x - 1.0).abs() < 1e-12);
        assert_eq!(m.score, 0.0);
    }

    #[test]
    fn fuse_examples() {
        let cfg = MatchConfig::default();
        let ego = vec![det(0.0, 0.0, 0.9), det(10.0, 1.0, 0.4), det(-10.0, -1.0, 0.6)];
        let out = fuse_proposals(&[(0, ego.clone())], &cfg);
        assert_eq!(out.len(), 3);
        for d in &ego {
            assert!(out.contains(d));
        }

        let v = det(3.0, 0.7, 0.8);
        let out = fuse_proposals(&[(0, vec![v]), (2, vec![v])], &cfg);
        assert_eq!(out.len(), 1);
        for (u, w) in out[0].bbox.fields().iter().zip(v.bbox.fields()) {
            assert!((u - w).abs() < 1e-12);
        }
    }

    #[test]
    fn nms_examples() {
        let kept = nms_fuse(&[square(0.0, 0.5), square(3.0, 0.6)], 0.3);
        assert_eq!(kept.len(), 2);

        let kept = nms_fuse(&[square(0.0, 0.8), square(0.0, 0.9)], 0.01);
        assert_eq!(kept, vec![square(0.0, 0.9)]);

        // B overlaps A with IoU 1/3, C overlaps B with 1/3 and misses A
        let kept = nms_fuse(&[square(1.0, 0.7), square(0.5, 0.8), square(0.0, 0.9)], 0.3);
        assert_eq!(kept, vec![square(0.0, 0.9), square(1.0, 0.7)]);
    }

    #[test]
    fn detection_rejects_bad_score() {
        let b = BBox7::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(Detection::new(b, 1.2).is_err());
        assert!(Detection::new(b, f64::NAN).is_err());
        assert!(MatchConfig { iou_thr: 1.0, ..MatchConfig::<f64>::default() }.validate().is_err());
    }
}
