//! Oriented boxes, planar poses and rotated bird's-eye-view IoU.
//!
//! Boxes follow the usual LiDAR convention: `l` is measured along the heading
//! direction `r`, `w` across it, and `(x, y, z)` is the box center.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Clipping tolerance in meters for degenerate (touching) polygon edges.
pub const CLIP_EPS: f64 = 1e-9;
/// Intersections smaller than this (m²) count as empty.
pub const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, o: &Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    fn cross(&self, o: &Self) -> T {
        self.x * o.y - self.y * o.x
    }

    fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }
}

/// Anything with planar coordinates that a rigid 2D motion can move.
pub trait Planar<T: Real>: Copy {
    fn xy(&self) -> (T, T);
    fn with_xy(self, x: T, y: T) -> Self;
}

impl<T: Real> Planar<T> for Point2<T> {
    fn xy(&self) -> (T, T) {
        (self.x, self.y)
    }
    fn with_xy(self, x: T, y: T) -> Self {
        Self { x, y }
    }
}

impl<T: Real> Planar<T> for Point3<T> {
    fn xy(&self) -> (T, T) {
        (self.x, self.y)
    }
    fn with_xy(self, x: T, y: T) -> Self {
        Self { x, y, z: self.z }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle<T: Real>(a: T) -> Result<T> {
    if !a.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {a}")));
    }
    Ok(wrap(a))
}

pub(crate) fn wrap<T: Real>(a: T) -> T {
    let pi = T::PI();
    if a > -pi && a <= pi {
        return a;
    }
    let two_pi = T::TAU();
    let mut r = a % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    if r > pi {
        r = r - two_pi;
    }
    // rounding can land exactly on -π
    if r <= -pi {
        r = pi;
    }
    r
}

/// Absolute angular separation in `[0, π]`.
pub fn angle_diff_abs<T: Real>(a: T, b: T) -> Result<T> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("angles must be finite"));
    }
    Ok(angle_dist(a, b))
}

pub(crate) fn angle_dist<T: Real>(a: T, b: T) -> T {
    wrap(a - b).abs()
}

/// Oriented 3D box `(x, y, z, w, l, h, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox7<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub w: T,
    pub l: T,
    pub h: T,
    pub r: T,
}

impl<T: Real> BBox7<T> {
    /// Builds a validated box; the heading is wrapped into `(-π, π]`.
    pub fn new(x: T, y: T, z: T, w: T, l: T, h: T, r: T) -> Result<Self> {
        let b = Self { x, y, z, w, l, h, r: normalize_angle(r)? };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fields();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("box fields must be finite: {self:?}")));
        }
        if self.w <= T::zero() || self.l <= T::zero() || self.h <= T::zero() {
            return Err(Error::invalid(format!("box dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn fields(&self) -> [T; 7] {
        [self.x, self.y, self.z, self.w, self.l, self.h, self.r]
    }

    pub fn center(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    pub fn bev_area(&self) -> T {
        self.w * self.l
    }

    /// Footprint rectangle, counter-clockwise.
    pub fn footprint(&self) -> Polygon2<T> {
        let (s, c) = self.r.sin_cos();
        let hl = self.l * T::half();
        let hw = self.w * T::half();
        let corner = |u: T, v: T| Point2::new(self.x + c * u - s * v, self.y + s * u + c * v);
        Polygon2 {
            vertices: vec![corner(hl, -hw), corner(hl, hw), corner(-hl, hw), corner(-hl, -hw)],
        }
    }

    /// Box-local coordinates of a world point: `(along l, along w)`.
    pub fn to_local(&self, px: T, py: T) -> (T, T) {
        let (s, c) = self.r.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn contains_xy(&self, px: T, py: T, margin: T) -> bool {
        let (u, v) = self.to_local(px, py);
        u.abs() <= self.l * T::half() + margin && v.abs() <= self.w * T::half() + margin
    }

    fn order_key(&self, o: &Self) -> Ordering {
        self.fields()
            .iter()
            .zip(o.fields().iter())
            .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .find(|c| *c != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

/// 2D sensor pose in a common frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub yaw: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, yaw: T) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid("pose must be finite"));
        }
        Ok(Self { x, y, yaw: normalize_angle(yaw)? })
    }

    pub fn identity() -> Self {
        Self { x: T::zero(), y: T::zero(), yaw: T::zero() }
    }

    /// Local → parent frame.
    pub fn apply(&self, px: T, py: T) -> (T, T) {
        let (s, c) = self.yaw.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Parent → local frame.
    pub fn apply_inverse(&self, px: T, py: T) -> (T, T) {
        let (s, c) = self.yaw.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Convex polygon with counter-clockwise winding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon2<T> {
    pub vertices: Vec<Point2<T>>,
}

impl<T: Real> Polygon2<T> {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area (positive for CCW).
    pub fn area(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        let n = self.vertices.len();
        let twice: T = (0..n)
            .map(|i| self.vertices[i].cross(&self.vertices[(i + 1) % n]))
            .sum();
        twice * T::half()
    }

    /// Sutherland–Hodgman clip of `self` against the convex CCW `clip`.
    pub fn clip(&self, clip: &Polygon2<T>) -> Polygon2<T> {
        let eps = T::lit(CLIP_EPS);
        let mut out = self.vertices.clone();
        let m = clip.vertices.len();
        for i in 0..m {
            if out.is_empty() {
                break;
            }
            let e0 = clip.vertices[i];
            let e1 = clip.vertices[(i + 1) % m];
            let edge = e1.sub(&e0);
            let elen = edge.dist2(&Point2::new(T::zero(), T::zero())).sqrt();
            let side = |p: &Point2<T>| edge.cross(&p.sub(&e0)) / elen;
            let input = std::mem::take(&mut out);
            let n = input.len();
            for j in 0..n {
                let cur = input[j];
                let prev = input[(j + n - 1) % n];
                let sc = side(&cur);
                let sp = side(&prev);
                let cur_in = sc >= -eps;
                let prev_in = sp >= -eps;
                if cur_in {
                    if !prev_in {
                        out.push(intersect(prev, cur, sp, sc));
                    }
                    out.push(cur);
                } else if prev_in {
                    out.push(intersect(prev, cur, sp, sc));
                }
            }
        }
        Polygon2 { vertices: out }
    }
}

fn intersect<T: Real>(p: Point2<T>, q: Point2<T>, sp: T, sq: T) -> Point2<T> {
    let t = sp / (sp - sq);
    Point2::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t)
}

/// Footprint intersection area in m², zero below [`MIN_AREA`].
pub fn bev_intersection<T: Real>(a: &BBox7<T>, b: &BBox7<T>) -> T {
    // canonical argument order keeps the result bit-symmetric
    let (a, b) = if a.order_key(b) == Ordering::Greater { (b, a) } else { (a, b) };
    let rr = ((a.l * a.l + a.w * a.w).sqrt() + (b.l * b.l + b.w * b.w).sqrt()) * T::half();
    if a.center().dist2(&b.center()) > rr * rr {
        return T::zero();
    }
    let area = a.footprint().clip(&b.footprint()).area();
    if area < T::lit(MIN_AREA) {
        T::zero()
    } else {
        area
    }
}

/// Rotated bird's-eye-view IoU without validation.
pub fn bev_iou_unchecked<T: Real>(a: &BBox7<T>, b: &BBox7<T>) -> T {
    let inter = bev_intersection(a, b);
    if inter == T::zero() {
        return T::zero();
    }
    let union = a.footprint().area() + b.footprint().area() - inter;
    (inter / union).max(T::zero()).min(T::one())
}

/// Rotated bird's-eye-view IoU of two boxes.
pub fn bev_iou<T: Real>(a: &BBox7<T>, b: &BBox7<T>) -> Result<T> {
    a.validate()?;
    b.validate()?;
    Ok(bev_iou_unchecked(a, b))
}

/// 3D IoU: footprint intersection times vertical interval overlap.
pub fn iou_3d<T: Real>(a: &BBox7<T>, b: &BBox7<T>) -> Result<T> {
    a.validate()?;
    b.validate()?;
    if a.z == b.z && a.h == b.h {
        return Ok(bev_iou_unchecked(a, b));
    }
    let top = (a.z + a.h * T::half()).min(b.z + b.h * T::half());
    let bottom = (a.z - a.h * T::half()).max(b.z - b.h * T::half());
    let dz = (top - bottom).max(T::zero());
    if dz == T::zero() {
        return Ok(T::zero());
    }
    let inter = bev_intersection(a, b) * dz;
    if inter == T::zero() {
        return Ok(T::zero());
    }
    let union = a.footprint().area() * a.h + b.footprint().area() * b.h - inter;
    Ok((inter / union).max(T::zero()).min(T::one()))
}

/// Re-expresses a box given in the `from` frame in the `to` frame. Heights
/// pass through unchanged.
pub fn transform_box<T: Real>(b: &BBox7<T>, from: &Pose2<T>, to: &Pose2<T>) -> BBox7<T> {
    let (wx, wy) = from.apply(b.x, b.y);
    let (x, y) = to.apply_inverse(wx, wy);
    BBox7 { x, y, r: wrap(b.r + from.yaw - to.yaw), ..*b }
}

pub fn transform_points<T: Real, P: Planar<T>>(pts: &[P], from: &Pose2<T>, to: &Pose2<T>) -> Vec<P> {
    pts.iter()
        .map(|p| {
            let (x, y) = p.xy();
            let (wx, wy) = from.apply(x, y);
            let (lx, ly) = to.apply_inverse(wx, wy);
            p.with_xy(lx, ly)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn bx(x: f64, y: f64, w: f64, l: f64, r: f64) -> BBox7<f64> {
        BBox7::new(x, y, 0.0, w, l, 1.0, r).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert!((normalize_angle(1.5 * PI).unwrap() + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(normalize_angle(-PI).unwrap(), PI);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn angle_diff_examples() {
        assert!((angle_diff_abs(0.1f64, -0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!((angle_diff_abs(PI - 0.1, -PI + 0.1).unwrap() - 0.2).abs() < 1e-12);
        assert!((angle_diff_abs(0.0, PI).unwrap() - PI).abs() < 1e-15);
        assert!(angle_diff_abs(0.0, f64::NAN).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(bev_iou(&a, &a).unwrap(), 1.0);
        let b = bx(0.5, 0.0, 1.0, 1.0, 0.0);
        assert!((bev_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let c = bx(0.0, 0.0, 1.0, 1.0, FRAC_PI_4);
        let octagon = 2.0 * (2f64.sqrt() - 1.0);
        let expected = octagon / (2.0 - octagon);
        assert!((bev_iou(&a, &c).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn iou_disjoint_and_touching() {
        let a = bx(0.0, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(bev_iou(&a, &bx(5.0, 0.0, 1.0, 1.0, 0.3)).unwrap(), 0.0);
        // shared edge only
        assert_eq!(bev_iou(&a, &bx(1.0, 0.0, 1.0, 1.0, 0.0)).unwrap(), 0.0);
        // shared corner only
        assert_eq!(bev_iou(&a, &bx(1.0, 1.0, 1.0, 1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn iou_rejects_invalid() {
        let a = bx(0.0, 0.0, 1.0, 1.0, 0.0);
        let bad = BBox7 { w: -1.0, ..a };
        assert!(bev_iou(&a, &bad).is_err());
        assert!(iou_3d(&bad, &a).is_err());
        assert!(BBox7::new(0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(BBox7::new(f64::NAN, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn iou_3d_examples() {
        let a = BBox7::<f64>::new(1.0, 2.0, 0.5, 2.0, 4.0, 1.5, 0.3).unwrap();
        assert_eq!(iou_3d(&a, &a).unwrap(), 1.0);
        let up = BBox7 { z: a.z + a.h, ..a };
        assert_eq!(iou_3d(&a, &up).unwrap(), 0.0);
        let half = BBox7 { z: a.z + a.h / 2.0, ..a };
        assert!((iou_3d(&a, &half).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let b = BBox7 { x: 1.7, r: 0.5, ..a };
        assert_eq!(iou_3d(&a, &b).unwrap(), bev_iou(&a, &b).unwrap());
    }

    #[test]
    fn transform_examples() {
        let b = BBox7::<f64>::new(3.0, -1.0, 0.7, 2.0, 4.0, 1.5, 0.4).unwrap();
        let p = Pose2::new(5.0, 1.0, 0.3).unwrap();
        let same = transform_box(&b, &p, &p);
        for (u, v) in same.fields().iter().zip(b.fields()) {
            assert!((u - v).abs() < 1e-12);
        }

        let o = Pose2::identity();
        let c = BBox7::new(0.0, 0.0, 0.7, 2.0, 4.0, 1.5, 0.0).unwrap();
        let t = transform_box(&c, &o, &Pose2::new(1.0, 2.0, 0.0).unwrap());
        assert_eq!((t.x, t.y, t.r), (-1.0, -2.0, 0.0));

        let d = BBox7::new(1.0, 0.0, 0.7, 2.0, 4.0, 1.5, 0.0).unwrap();
        let t = transform_box(&d, &o, &Pose2::new(0.0, 0.0, FRAC_PI_2).unwrap());
        assert!(t.x.abs() < 1e-15 && (t.y + 1.0).abs() < 1e-15);
        assert!((t.r + FRAC_PI_2).abs() < 1e-15);
        assert_eq!((t.z, t.w, t.l, t.h), (d.z, d.w, d.l, d.h));
    }

    #[test]
    fn transform_points_examples() {
        let pts = vec![Point3::<f64>::new(1.0, 0.0, 2.0), Point3::new(-3.0, 4.0, 0.5)];
        let p = Pose2::new(2.0, -7.0, 1.1).unwrap();
        let same = transform_points(&pts, &p, &p);
        for (a, b) in same.iter().zip(&pts) {
            assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12 && a.z == b.z);
        }
        let shifted = transform_points(&pts, &Pose2::identity(), &Pose2::new(1.0, 2.0, 0.0).unwrap());
        for (a, b) in shifted.iter().zip(&pts) {
            assert_eq!((a.x, a.y), (b.x - 1.0, b.y - 2.0));
        }
        let rot = transform_points(
            &[Point2::new(1.0, 0.0)],
            &Pose2::identity(),
            &Pose2::new(0.0, 0.0, FRAC_PI_2).unwrap(),
        );
        assert!(rot[0].x.abs() < 1e-15 && (rot[0].y + 1.0).abs() < 1e-15);
    }

    #[test]
    fn works_in_f32() {
        let a = BBox7::<f32>::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let b = BBox7::<f32>::new(0.5, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((bev_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }
}
