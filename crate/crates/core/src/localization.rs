//! Relative pose error correction from shared landmarks.
//!
//! A coarse exhaustive grid over `(dx, dy, dyaw)` picks the candidate with
//! the largest number of same-class landmark correspondences (maximum
//! consensus). Pole and vehicle-center correspondences of the winner are then
//! fed to a closed-form least-squares rigid alignment. Wall and fence points
//! only vote in the coarse stage.
//!
//! Corrections rotate about a pivot, the centroid of the cooperative
//! landmarks, so that they do not depend on where the ego frame origin is.

use crate::error::{Error, Result};
use crate::geometry::{wrap, BBox7, Planar, Point2};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandmarkClass {
    Pole,
    WallFence,
    VehicleCenter,
}

impl LandmarkClass {
    pub fn code(self) -> u8 {
        match self {
            LandmarkClass::Pole => 0,
            LandmarkClass::WallFence => 1,
            LandmarkClass::VehicleCenter => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(LandmarkClass::Pole),
            1 => Some(LandmarkClass::WallFence),
            2 => Some(LandmarkClass::VehicleCenter),
            _ => None,
        }
    }

    /// Classes allowed into the fine alignment.
    pub fn refinable(self) -> bool {
        self != LandmarkClass::WallFence
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPoint<T> {
    pub x: T,
    pub y: T,
    pub class: LandmarkClass,
}

impl<T: Real> LandmarkPoint<T> {
    pub fn new(x: T, y: T, class: LandmarkClass) -> Self {
        Self { x, y, class }
    }

    pub fn point(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

impl<T: Real> Planar<T> for LandmarkPoint<T> {
    fn xy(&self) -> (T, T) {
        (self.x, self.y)
    }
    fn with_xy(self, x: T, y: T) -> Self {
        Self { x, y, class: self.class }
    }
}

/// Grid search settings. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusConfig<T> {
    pub search_x: T,
    pub search_y: T,
    pub search_yaw: T,
    pub res_xy: T,
    pub res_yaw: T,
    pub inlier_dist: T,
    pub min_consensus: usize,
}

impl<T: Real> Default for ConsensusConfig<T> {
    fn default() -> Self {
        Self {
            search_x: T::one(),
            search_y: T::one(),
            search_yaw: T::lit(6.0),
            res_xy: T::one(),
            res_yaw: T::one(),
            inlier_dist: T::half(),
            min_consensus: 3,
        }
    }
}

impl<T: Real> ConsensusConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("search_x", self.search_x),
            ("search_y", self.search_y),
            ("search_yaw", self.search_yaw),
            ("res_xy", self.res_xy),
            ("res_yaw", self.res_yaw),
            ("inlier_dist", self.inlier_dist),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn axis(range: T, res: T) -> Vec<T> {
        let n = ((T::two() * range / res) + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        (0..n).map(|i| -range + T::from_count(i) * res).collect()
    }

    /// Candidate `(dx, dy, dyaw[rad])` triples in lexicographic grid order.
    pub fn candidates(&self) -> Vec<(T, T, T)> {
        let xs = Self::axis(self.search_x, self.res_xy);
        let ys = Self::axis(self.search_y, self.res_xy);
        let yaws = Self::axis(self.search_yaw, self.res_yaw);
        let mut out = Vec::with_capacity(xs.len() * ys.len() * yaws.len());
        for &x in &xs {
            for &y in &ys {
                for &a in &yaws {
                    out.push((x, y, a.to_radians()));
                }
            }
        }
        out
    }
}

/// Rigid motion about the origin: `p' = R(dyaw)·p + (dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rigid2<T> {
    pub dx: T,
    pub dy: T,
    pub dyaw: T,
}

impl<T: Real> Rigid2<T> {
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        let (s, c) = self.dyaw.sin_cos();
        (c * x - s * y + self.dx, s * x + c * y + self.dy)
    }
}

/// Estimated correction for one cooperative vehicle, applied as
/// `p' = R(dyaw)·(p − pivot) + pivot + (dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseCorrection<T> {
    pub dx: T,
    pub dy: T,
    pub dyaw: T,
    pub pivot: Point2<T>,
    pub consensus: usize,
    /// `(ego index, coop index)` correspondences of the coarse winner.
    pub inliers: Vec<(usize, usize)>,
    pub confident: bool,
    /// Whether the fine alignment replaced the coarse estimate.
    pub refined: bool,
}

impl<T: Real> PoseCorrection<T> {
    pub fn identity(pivot: Point2<T>) -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            dyaw: T::zero(),
            pivot,
            consensus: 0,
            inliers: Vec::new(),
            confident: false,
            refined: false,
        }
    }

    pub fn apply_xy(&self, x: T, y: T) -> (T, T) {
        transform_about(x, y, self.dx, self.dy, self.dyaw, self.pivot)
    }

    pub fn apply_point<P: Planar<T>>(&self, p: P) -> P {
        let (x, y) = p.xy();
        let (u, v) = self.apply_xy(x, y);
        p.with_xy(u, v)
    }

    pub fn apply_box(&self, b: &BBox7<T>) -> BBox7<T> {
        let (x, y) = self.apply_xy(b.x, b.y);
        BBox7 { x, y, r: wrap(b.r + self.dyaw), ..*b }
    }
}

fn transform_about<T: Real>(x: T, y: T, dx: T, dy: T, dyaw: T, pivot: Point2<T>) -> (T, T) {
    let (s, c) = dyaw.sin_cos();
    let px = x - pivot.x;
    let py = y - pivot.y;
    (c * px - s * py + pivot.x + dx, s * px + c * py + pivot.y + dy)
}

/// Centroid of the cooperative landmarks, the rotation pivot.
pub fn pivot_of<T: Real>(pts: &[LandmarkPoint<T>]) -> Point2<T> {
    if pts.is_empty() {
        return Point2::default();
    }
    let n = T::from_count(pts.len());
    let sx: T = pts.iter().map(|p| p.x).sum();
    let sy: T = pts.iter().map(|p| p.y).sum();
    Point2::new(sx / n, sy / n)
}

/// Meters added to the inlier radius.
pub const INLIER_SLACK: f64 = 1e-9;

/// Greedy same-class matching of moved coop points to ego points; each ego
/// point is used at most once. Returns `(ego, coop)` pairs.
fn count_consensus<T: Real>(
    ego: &[LandmarkPoint<T>],
    moved: &[LandmarkPoint<T>],
    inlier2: T,
    used: &mut [bool],
) -> Vec<(usize, usize)> {
    used.iter_mut().for_each(|u| *u = false);
    let mut pairs = Vec::new();
    for (ci, q) in moved.iter().enumerate() {
        let mut best: Option<(usize, T)> = None;
        for (ei, e) in ego.iter().enumerate() {
            if used[ei] || e.class != q.class {
                continue;
            }
            let d2 = e.point().dist2(&q.point());
            if d2 <= inlier2 && best.is_none_or(|(_, bd)| d2 < bd) {
                best = Some((ei, d2));
            }
        }
        if let Some((ei, _)) = best {
            used[ei] = true;
            pairs.push((ei, ci));
        }
    }
    pairs
}

/// Exhaustive maximum-consensus grid search. Both sets must be in the ego
/// frame (the cooperative one placed with its shared, possibly wrong, pose).
pub fn max_consensus_search<T: Real>(
    ego: &[LandmarkPoint<T>],
    coop: &[LandmarkPoint<T>],
    cfg: &ConsensusConfig<T>,
) -> Result<PoseCorrection<T>> {
    cfg.validate()?;
    let pivot = pivot_of(coop);
    if ego.is_empty() || coop.is_empty() {
        return Ok(PoseCorrection::identity(pivot));
    }
    // a hair of slack so points exactly at inlier_dist survive rounding
    let r = cfg.inlier_dist + T::lit(INLIER_SLACK);
    let inlier2 = r * r;
    let mut used = vec![false; ego.len()];
    let mut moved = coop.to_vec();
    let mut best: Option<((T, T, T), T, Vec<(usize, usize)>)> = None;
    for cand @ (dx, dy, dyaw) in cfg.candidates() {
        for (m, p) in moved.iter_mut().zip(coop) {
            let (x, y) = transform_about(p.x, p.y, dx, dy, dyaw, pivot);
            m.x = x;
            m.y = y;
        }
        let pairs = count_consensus(ego, &moved, inlier2, &mut used);
        let l1 = dx.abs() + dy.abs() + dyaw.abs();
        // strict comparisons keep the earliest grid cell on full ties
        let better = match &best {
            None => true,
            Some((_, bl1, bp)) => pairs.len() > bp.len() || (pairs.len() == bp.len() && l1 < *bl1),
        };
        if better {
            best = Some((cand, l1, pairs));
        }
    }
    let ((dx, dy, dyaw), _, inliers) = best.expect("grid is never empty");
    let consensus = inliers.len();
    Ok(PoseCorrection {
        dx,
        dy,
        dyaw,
        pivot,
        consensus,
        inliers,
        confident: consensus >= cfg.min_consensus,
        refined: false,
    })
}

/// Closed-form least-squares rigid alignment of `(coop, ego)` pairs,
/// minimizing `Σ‖R·coop + t − ego‖²`. Wall/fence pairs are ignored; returns
/// `None` when fewer than two usable pairs remain.
pub fn refine_alignment<T: Real>(pairs: &[(LandmarkPoint<T>, LandmarkPoint<T>)]) -> Option<Rigid2<T>> {
    let usable: Vec<_> = pairs.iter().filter(|(c, e)| c.class.refinable() && e.class.refinable()).collect();
    if usable.len() < 2 {
        return None;
    }
    let n = T::from_count(usable.len());
    let (mut cx, mut cy, mut ex, mut ey) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (c, e) in &usable {
        cx = cx + c.x;
        cy = cy + c.y;
        ex = ex + e.x;
        ey = ey + e.y;
    }
    let (cx, cy, ex, ey) = (cx / n, cy / n, ex / n, ey / n);
    let (mut dot, mut cross, mut spread) = (T::zero(), T::zero(), T::zero());
    for (c, e) in &usable {
        let (ax, ay) = (c.x - cx, c.y - cy);
        let (bx, by) = (e.x - ex, e.y - ey);
        dot = dot + ax * bx + ay * by;
        cross = cross + ax * by - ay * bx;
        spread = spread + ax * ax + ay * ay;
    }
    let dyaw = if spread <= T::lit(1e-12) * n || (dot == T::zero() && cross == T::zero()) {
        T::zero()
    } else {
        cross.atan2(dot)
    };
    let (s, c) = dyaw.sin_cos();
    Some(Rigid2 { dx: ex - (c * cx - s * cy), dy: ey - (s * cx + c * cy), dyaw })
}

/// Coarse search followed by fine alignment on the pole and vehicle-center
/// inliers. Unconfident searches yield the identity correction.
pub fn correct_cpm<T: Real>(
    ego: &[LandmarkPoint<T>],
    coop: &[LandmarkPoint<T>],
    cfg: &ConsensusConfig<T>,
) -> Result<PoseCorrection<T>> {
    let coarse = max_consensus_search(ego, coop, cfg)?;
    if !coarse.confident {
        return Ok(PoseCorrection {
            dx: T::zero(),
            dy: T::zero(),
            dyaw: T::zero(),
            refined: false,
            ..coarse
        });
    }
    let pairs: Vec<_> = coarse.inliers.iter().map(|&(ei, ci)| (coop[ci], ego[ei])).collect();
    match refine_alignment(&pairs) {
        Some(fine) => {
            // re-express the origin-based motion about the pivot
            let p = coarse.pivot;
            let (s, c) = fine.dyaw.sin_cos();
            let dx = fine.dx - p.x + (c * p.x - s * p.y);
            let dy = fine.dy - p.y + (s * p.x + c * p.y);
            Ok(PoseCorrection { dx, dy, dyaw: fine.dyaw, refined: true, ..coarse })
        }
        None => Ok(coarse),
    }
}
