//! Keypoint selection: furthest point sampling, in-proposal filtering and
//! correction landmark subsampling.

use crate::error::{Error, Result};
use crate::geometry::{BBox7, Point2, Point3};
use crate::localization::{LandmarkClass, LandmarkPoint};
use crate::scalar::Real;

/// Slack on box containment tests, in meters.
pub const CONTAIN_EPS: f64 = 1e-9;

/// Cartesian coordinates with `z = 0` for planar types.
pub trait Coords<T: Real> {
    fn coords(&self) -> [T; 3];
}

impl<T: Real> Coords<T> for Point3<T> {
    fn coords(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Coords<T> for Point2<T> {
    fn coords(&self) -> [T; 3] {
        [self.x, self.y, T::zero()]
    }
}

impl<T: Real> Coords<T> for LandmarkPoint<T> {
    fn coords(&self) -> [T; 3] {
        [self.x, self.y, T::zero()]
    }
}

fn dist2<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Greedy furthest point sampling of `n` indices, starting from the point
/// farthest from the centroid. Ties resolve to the lowest index.
pub fn fps_sample<T: Real, P: Coords<T>>(points: &[P], n: usize) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::invalid("cannot sample from an empty point set"));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if n >= points.len() {
        return Ok((0..points.len()).collect());
    }
    let pts: Vec<[T; 3]> = points.iter().map(Coords::coords).collect();
    let cnt = T::from_count(pts.len());
    let mut centroid = [T::zero(); 3];
    for p in &pts {
        for k in 0..3 {
            centroid[k] = centroid[k] + p[k];
        }
    }
    let centroid = centroid.map(|v| v / cnt);

    let argmax = |vals: &[T]| {
        let mut best = 0;
        for (i, v) in vals.iter().enumerate() {
            if *v > vals[best] {
                best = i;
            }
        }
        best
    };
    let from_centroid: Vec<T> = pts.iter().map(|p| dist2(p, &centroid)).collect();
    let mut chosen = vec![argmax(&from_centroid)];
    let mut min_d: Vec<T> = pts.iter().map(|p| dist2(p, &pts[chosen[0]])).collect();
    while chosen.len() < n {
        let next = argmax(&min_d);
        chosen.push(next);
        let np = pts[next];
        for (m, p) in min_d.iter_mut().zip(&pts) {
            *m = m.min(dist2(p, &np));
        }
    }
    Ok(chosen)
}

/// Indices of points inside (boundary inclusive) at least one box.
pub fn points_in_boxes<T: Real>(points: &[Point3<T>], boxes: &[BBox7<T>]) -> Vec<usize> {
    let eps = T::lit(CONTAIN_EPS);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            boxes.iter().any(|b| b.contains_xy(p.x, p.y, eps) && (p.z - b.z).abs() <= b.h * T::half() + eps)
        })
        .map(|(i, _)| i)
        .collect()
}

/// FPS-downsamples poles to `k_p` and walls/fences to `k_fw`; vehicle
/// centers pass through. Output order: poles, walls/fences, vehicle centers.
pub fn select_correction_points<T: Real>(
    landmarks: &[LandmarkPoint<T>],
    k_p: usize,
    k_fw: usize,
) -> Vec<LandmarkPoint<T>> {
    let of = |c: LandmarkClass| landmarks.iter().copied().filter(|l| l.class == c).collect::<Vec<_>>();
    let sample = |pts: Vec<LandmarkPoint<T>>, k: usize| -> Vec<LandmarkPoint<T>> {
        if pts.is_empty() || k == 0 {
            return Vec::new();
        }
        fps_sample(&pts, k).expect("non-empty input").into_iter().map(|i| pts[i]).collect()
    };
    let mut out = sample(of(LandmarkClass::Pole), k_p);
    out.extend(sample(of(LandmarkClass::WallFence), k_fw));
    out.extend(of(LandmarkClass::VehicleCenter));
    out
}

/// Keypoint coordinates with their per-point feature vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet<T> {
    pub coords: Vec<Point3<T>>,
    pub features: Vec<Vec<T>>,
    pub n_ch: usize,
}

impl<T: Real> KeypointSet<T> {
    pub fn empty(n_ch: usize) -> Self {
        Self { coords: Vec::new(), features: Vec::new(), n_ch }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.coords.len() {
            return Err(Error::invalid(format!(
                "{} feature vectors for {} keypoints",
                self.features.len(),
                self.coords.len()
            )));
        }
        if let Some(f) = self.features.iter().find(|f| f.len() != self.n_ch) {
            return Err(Error::invalid(format!("feature vector of length {} (n_ch = {})", f.len(), self.n_ch)));
        }
        Ok(())
    }

    /// Keypoints with deterministic placeholder features in `[0, 1]`.
    pub fn with_synthetic_features(coords: Vec<Point3<T>>, n_ch: usize) -> Self {
        let features = coords.iter().map(|p| synthetic_features(p, n_ch)).collect();
        Self { coords, features, n_ch }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of the centimeter-quantized position, one value per channel.
pub fn synthetic_features<T: Real>(p: &Point3<T>, n_ch: usize) -> Vec<T> {
    let q = |v: T| (v * T::lit(100.0)).round().to_i64().unwrap_or(0) as u64;
    let base = splitmix64(q(p.x) ^ splitmix64(q(p.y) ^ splitmix64(q(p.z))));
    (0..n_ch)
        .map(|c| {
            let h = splitmix64(base ^ (c as u64).wrapping_mul(0xA24B_AED4_963E_E407));
            T::lit((h >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

/// Keypoint and correction-point budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectConfig {
    pub n_kpts: usize,
    pub n_ch: usize,
    pub k_p: usize,
    pub k_fw: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { n_kpts: 2048, n_ch: 32, k_p: 16, k_fw: 32 }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kpts == 0 {
            return Err(Error::invalid("n_kpts must be at least 1"));
        }
        if self.n_ch == 0 || self.n_ch > u8::MAX as usize {
            return Err(Error::invalid(format!("n_ch must lie in 1..=255, got {}", self.n_ch)));
        }
        Ok(())
    }
}
