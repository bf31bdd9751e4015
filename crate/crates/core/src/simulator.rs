//! Seeded multi-vehicle scene generator standing in for the neural detector.
//!
//! Vehicles are dropped onto a Manhattan lane grid, a subset is connected
//! (CAVs), and every CAV senses boxes and static landmarks through a
//! distance-dependent noise model. All randomness flows from explicit seeds;
//! nothing touches a global generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cpm::{decode_cpm, encode_cpm, Cpm};
use crate::error::{Error, Result};
use crate::geometry::{bev_intersection, transform_box, BBox7, Point3, Pose2};
use crate::keypoints::{fps_sample, points_in_boxes, select_correction_points, KeypointSet, SelectConfig};
use crate::localization::{LandmarkClass, LandmarkPoint};
use crate::matching::Detection;

/// Detector surrogate. Distances are sensor-to-box-center in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub pos_sigma_base: f64,
    pub pos_sigma_per_meter: f64,
    /// Radians.
    pub yaw_sigma: f64,
    pub dim_sigma: f64,
    pub miss_rate_base: f64,
    pub miss_rate_per_meter: f64,
    /// Expected false positives per frame and sensor.
    pub false_pos_rate: f64,
    pub score_decay: f64,
    pub score_sigma: f64,
    /// Landmark observation jitter in meters.
    pub landmark_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pos_sigma_base: 0.1,
            pos_sigma_per_meter: 0.004,
            yaw_sigma: 2f64.to_radians(),
            dim_sigma: 0.05,
            miss_rate_base: 0.05,
            miss_rate_per_meter: 0.003,
            false_pos_rate: 0.5,
            score_decay: 0.01,
            score_sigma: 0.05,
            landmark_sigma: 0.05,
        }
    }
}

impl NoiseModel {
    /// Perfect sensing: no noise, misses or false positives.
    pub fn zero() -> Self {
        Self {
            pos_sigma_base: 0.0,
            pos_sigma_per_meter: 0.0,
            yaw_sigma: 0.0,
            dim_sigma: 0.0,
            miss_rate_base: 0.0,
            miss_rate_per_meter: 0.0,
            false_pos_rate: 0.0,
            score_sigma: 0.0,
            landmark_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pos_sigma_base", self.pos_sigma_base),
            ("pos_sigma_per_meter", self.pos_sigma_per_meter),
            ("yaw_sigma", self.yaw_sigma),
            ("dim_sigma", self.dim_sigma),
            ("miss_rate_base", self.miss_rate_base),
            ("miss_rate_per_meter", self.miss_rate_per_meter),
            ("false_pos_rate", self.false_pos_rate),
            ("score_decay", self.score_decay),
            ("score_sigma", self.score_sigma),
            ("landmark_sigma", self.landmark_sigma),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("noise.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn miss_probability(&self, d: f64) -> f64 {
        (self.miss_rate_base + self.miss_rate_per_meter * d).clamp(0.0, 1.0)
    }

    pub fn pos_sigma(&self, d: f64) -> f64 {
        self.pos_sigma_base + self.pos_sigma_per_meter * d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub comm_range: f64,
    pub det_range: f64,
    pub max_coop: usize,
    pub n_vehicles: usize,
    pub n_cavs: usize,
    /// Side length of the square map centered on the origin.
    pub map_extent: f64,
    pub road_spacing: f64,
    /// Mean `(l, w, h)`.
    pub vehicle_dims_mean: (f64, f64, f64),
    /// Relative uniform jitter on each dimension.
    pub dim_jitter: f64,
    pub det_noise: NoiseModel,
    pub loc_noise_xy_sigma: f64,
    /// Degrees.
    pub loc_noise_yaw_sigma: f64,
    /// Poles per 100 m of road side.
    pub pole_density: f64,
    /// Wall/fence runs per 100 m of road side.
    pub wall_density: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            comm_range: 40.0,
            det_range: 57.6,
            max_coop: 4,
            n_vehicles: 80,
            n_cavs: 40,
            map_extent: 160.0,
            road_spacing: 40.0,
            vehicle_dims_mean: (4.41, 1.98, 1.64),
            dim_jitter: 0.05,
            det_noise: NoiseModel::default(),
            loc_noise_xy_sigma: 0.4,
            loc_noise_yaw_sigma: 4.0,
            pole_density: 3.0,
            wall_density: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("comm_range", self.comm_range),
            ("det_range", self.det_range),
            ("map_extent", self.map_extent),
            ("road_spacing", self.road_spacing),
            ("vehicle_dims_mean.l", self.vehicle_dims_mean.0),
            ("vehicle_dims_mean.w", self.vehicle_dims_mean.1),
            ("vehicle_dims_mean.h", self.vehicle_dims_mean.2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("dim_jitter", self.dim_jitter),
            ("loc_noise_xy_sigma", self.loc_noise_xy_sigma),
            ("loc_noise_yaw_sigma", self.loc_noise_yaw_sigma),
            ("pole_density", self.pole_density),
            ("wall_density", self.wall_density),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.dim_jitter >= 1.0 {
            return Err(Error::invalid("dim_jitter must be below 1"));
        }
        if self.n_vehicles == 0 || self.n_cavs == 0 {
            return Err(Error::invalid("n_vehicles and n_cavs must be at least 1"));
        }
        if self.n_cavs > self.n_vehicles {
            return Err(Error::invalid(format!(
                "n_cavs ({}) must not exceed n_vehicles ({})",
                self.n_cavs, self.n_vehicles
            )));
        }
        self.det_noise.validate()
    }

    /// Stable 64-bit digest of every field; frames from one config share it.
    pub fn fingerprint(&self) -> u64 {
        let n = &self.det_noise;
        let floats = [
            self.comm_range,
            self.det_range,
            self.map_extent,
            self.road_spacing,
            self.vehicle_dims_mean.0,
            self.vehicle_dims_mean.1,
            self.vehicle_dims_mean.2,
            self.dim_jitter,
            self.loc_noise_xy_sigma,
            self.loc_noise_yaw_sigma,
            self.pole_density,
            self.wall_density,
            n.pos_sigma_base,
            n.pos_sigma_per_meter,
            n.yaw_sigma,
            n.dim_sigma,
            n.miss_rate_base,
            n.miss_rate_per_meter,
            n.false_pos_rate,
            n.score_decay,
            n.score_sigma,
            n.landmark_sigma,
        ];
        let ints = [self.max_coop as u64, self.n_vehicles as u64, self.n_cavs as u64];
        floats
            .iter()
            .map(|f| f.to_bits())
            .chain(ints)
            .fold(0x5EED_0F_C0FF_EEu64, |h, v| mix(h ^ v))
    }
}

pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of frame `index` in a run started from `base`.
pub fn frame_seed(base: u64, index: u64) -> u64 {
    mix(mix(base) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ a.wrapping_mul(0x9E37_79B9)) ^ b))
}

const STREAM_LAYOUT: u64 = 1;
const STREAM_SENSE: u64 = 2;
const STREAM_LOC: u64 = 3;
const STREAM_POINTS: u64 = 4;

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// One simulated timestep. Index 0 of every per-CAV list is the ego;
/// the others are the selected cooperative CAVs.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// World frame.
    pub gt_boxes: Vec<BBox7<f64>>,
    /// Index into `gt_boxes` of each participating CAV.
    pub cav_gt_indices: Vec<usize>,
    pub cav_true_poses: Vec<Pose2<f64>>,
    pub cav_noisy_poses: Vec<Pose2<f64>>,
    /// Sensor-local frame of each CAV.
    pub detections: Vec<Vec<Detection<f64>>>,
    /// Static landmarks seen by each CAV, sensor-local.
    pub landmarks: Vec<Vec<LandmarkPoint<f64>>>,
    /// World frame.
    pub static_landmarks: Vec<LandmarkPoint<f64>>,
    pub seed: u64,
    pub config_id: u64,
    pub det_range: f64,
}

impl Frame {
    pub fn n_coop(&self) -> usize {
        self.cav_gt_indices.len() - 1
    }
}

struct Lane {
    horizontal: bool,
    /// Road center coordinate across the road.
    road: f64,
    offset: f64,
    heading: f64,
}

fn lanes(cfg: &SimConfig) -> Vec<Lane> {
    let half = cfg.map_extent / 2.0;
    let k = (half / cfg.road_spacing).floor() as i64;
    let mut out = Vec::new();
    for horizontal in [true, false] {
        for i in -k..=k {
            let road = i as f64 * cfg.road_spacing;
            for offset in [-5.25, -1.75, 1.75, 5.25] {
                // right-hand traffic
                let heading = match (horizontal, offset < 0.0) {
                    (true, true) => 0.0,
                    (true, false) => std::f64::consts::PI,
                    (false, true) => -std::f64::consts::FRAC_PI_2,
                    (false, false) => std::f64::consts::FRAC_PI_2,
                };
                out.push(Lane { horizontal, road, offset, heading });
            }
        }
    }
    out
}

fn place_on(lane: &Lane, along: f64, dims: (f64, f64, f64)) -> BBox7<f64> {
    let across = lane.road + lane.offset;
    let (x, y) = if lane.horizontal { (along, across) } else { (across, along) };
    BBox7 { x, y, z: dims.2 / 2.0, w: dims.1, l: dims.0, h: dims.2, r: lane.heading }
}

fn overlaps_any(b: &BBox7<f64>, placed: &[BBox7<f64>]) -> bool {
    // one meter of bumper clearance
    let padded = BBox7 { l: b.l + 1.0, w: b.w + 0.2, ..*b };
    placed.iter().any(|p| bev_intersection(&padded, p) > 0.0)
}

fn static_landmarks(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<LandmarkPoint<f64>> {
    let half = cfg.map_extent / 2.0;
    let k = (half / cfg.road_spacing).floor() as i64;
    let mut out = Vec::new();
    let length = cfg.map_extent;
    for horizontal in [true, false] {
        for i in -k..=k {
            let road = i as f64 * cfg.road_spacing;
            for side in [-1.0, 1.0] {
                let put = |along: f64, across: f64, class| {
                    let (x, y) = if horizontal { (along, across) } else { (across, along) };
                    LandmarkPoint::new(x, y, class)
                };
                let n_poles = (cfg.pole_density * length / 100.0).round() as usize;
                for _ in 0..n_poles {
                    let along = rng.random_range(-half..half);
                    let across = road + side * (9.0 + rng.random_range(0.0..1.0));
                    out.push(put(along, across, LandmarkClass::Pole));
                }
                let n_walls = (cfg.wall_density * length / 100.0).round() as usize;
                for _ in 0..n_walls {
                    let start = rng.random_range(-half..half);
                    let len = rng.random_range(5.0..15.0);
                    let across = road + side * (11.0 + rng.random_range(0.0..2.0));
                    let n = (len / 0.5) as usize;
                    for j in 0..=n {
                        let along = start + j as f64 * 0.5;
                        if along.abs() <= half {
                            out.push(put(along, across, LandmarkClass::WallFence));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Builds a frame with true poses only; see [`inject_loc_noise`].
pub fn generate_frame(cfg: &SimConfig, seed: u64) -> Result<Frame> {
    cfg.validate()?;
    let mut rng = stream(seed, STREAM_LAYOUT, 0);
    let lanes = lanes(cfg);
    let half = cfg.map_extent / 2.0;
    let (ml, mw, mh) = cfg.vehicle_dims_mean;
    let j = cfg.dim_jitter;

    let mut gt: Vec<BBox7<f64>> = Vec::with_capacity(cfg.n_vehicles);
    for v in 0..cfg.n_vehicles {
        let mut ok = false;
        for _ in 0..1000 {
            let jit = |rng: &mut ChaCha8Rng, m: f64| if j > 0.0 { m * (1.0 + rng.random_range(-j..j)) } else { m };
            let dims = (jit(&mut rng, ml), jit(&mut rng, mw), jit(&mut rng, mh));
            // the ego sits on one of the two roads through the origin
            let (lane, along) = if v == 0 {
                let central: Vec<&Lane> = lanes.iter().filter(|l| l.road == 0.0).collect();
                (central[rng.random_range(0..central.len())], rng.random_range(-15.0..15.0))
            } else {
                (&lanes[rng.random_range(0..lanes.len())], rng.random_range(-half..half))
            };
            let b = place_on(lane, along, dims);
            if !overlaps_any(&b, &gt) {
                gt.push(b);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Generation(format!("could not place vehicle {v} without overlap after 1000 tries")));
        }
    }

    // CAVs are the first n_cavs vehicles; the ego is vehicle 0
    let pose_of = |b: &BBox7<f64>| Pose2 { x: b.x, y: b.y, yaw: b.r };
    let ego = gt[0];
    let mut candidates: Vec<usize> = (1..cfg.n_cavs)
        .filter(|&i| {
            let d = ((gt[i].x - ego.x).powi(2) + (gt[i].y - ego.y).powi(2)).sqrt();
            d <= cfg.comm_range
        })
        .collect();
    // partial Fisher–Yates: a random subset in random order
    let take = candidates.len().min(cfg.max_coop);
    for i in 0..take {
        let k = rng.random_range(i..candidates.len());
        candidates.swap(i, k);
    }
    candidates.truncate(take);

    let mut cav_gt_indices = vec![0];
    cav_gt_indices.extend(candidates);
    let poses: Vec<Pose2<f64>> = cav_gt_indices.iter().map(|&i| pose_of(&gt[i])).collect();
    let landmarks = static_landmarks(cfg, &mut rng);

    let mut frame = Frame {
        gt_boxes: gt,
        cav_gt_indices,
        cav_true_poses: poses.clone(),
        cav_noisy_poses: poses,
        detections: Vec::new(),
        landmarks: Vec::new(),
        static_landmarks: landmarks,
        seed,
        config_id: cfg.fingerprint(),
        det_range: cfg.det_range,
    };
    for cav in 0..frame.cav_gt_indices.len() {
        let (d, l) = sense(&frame, cav, &cfg.det_noise, seed)?;
        frame.detections.push(d);
        frame.landmarks.push(l);
    }
    Ok(frame)
}

/// Detections and landmark observations of one CAV, in its local frame.
pub fn sense(
    frame: &Frame,
    cav_index: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<(Vec<Detection<f64>>, Vec<LandmarkPoint<f64>>)> {
    noise.validate()?;
    let pose = *frame
        .cav_true_poses
        .get(cav_index)
        .ok_or_else(|| Error::invalid(format!("no CAV with index {cav_index}")))?;
    let own = frame.cav_gt_indices[cav_index];
    let mut rng = stream(seed, STREAM_SENSE, cav_index as u64);
    let world = Pose2::identity();
    let range = frame.det_range;

    let mut dets = Vec::new();
    for (i, g) in frame.gt_boxes.iter().enumerate() {
        if i == own {
            continue;
        }
        let local = transform_box(g, &world, &pose);
        let d = local.x.hypot(local.y);
        if d > range {
            continue;
        }
        // draw every variate so the stream does not depend on the outcome
        let missed = rng.random::<f64>() < noise.miss_probability(d);
        let s = noise.pos_sigma(d);
        let (ex, ey) = (gauss(&mut rng, s), gauss(&mut rng, s));
        let er = gauss(&mut rng, noise.yaw_sigma);
        let (ew, el, eh) = (
            gauss(&mut rng, noise.dim_sigma),
            gauss(&mut rng, noise.dim_sigma),
            gauss(&mut rng, noise.dim_sigma),
        );
        let es = gauss(&mut rng, noise.score_sigma);
        if missed {
            continue;
        }
        let bbox = BBox7 {
            x: local.x + ex,
            y: local.y + ey,
            z: local.z,
            w: (local.w + ew).max(0.1),
            l: (local.l + el).max(0.1),
            h: (local.h + eh).max(0.1),
            r: crate::geometry::wrap(local.r + er),
        };
        if bbox.x.hypot(bbox.y) > range {
            continue;
        }
        let score = ((-noise.score_decay * d).exp() + es).clamp(0.0, 1.0);
        dets.push(Detection { bbox, score });
    }

    if noise.false_pos_rate > 0.0 {
        let n_fp = Poisson::new(noise.false_pos_rate).expect("positive rate").sample(&mut rng) as usize;
        let (ml, mw, mh) = frame_dims(frame);
        for _ in 0..n_fp {
            let rad = range * rng.random::<f64>().sqrt();
            let ang = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let bbox = BBox7 { x: rad * ang.cos(), y: rad * ang.sin(), z: mh / 2.0, w: mw, l: ml, h: mh, r: crate::geometry::wrap(yaw) };
            let score = (0.5 * (-noise.score_decay * rad).exp() + gauss(&mut rng, noise.score_sigma)).clamp(0.0, 1.0);
            dets.push(Detection { bbox, score });
        }
    }

    let mut marks = Vec::new();
    for lm in &frame.static_landmarks {
        let (x, y) = pose.apply_inverse(lm.x, lm.y);
        if x.hypot(y) > range {
            continue;
        }
        let (jx, jy) = (gauss(&mut rng, noise.landmark_sigma), gauss(&mut rng, noise.landmark_sigma));
        marks.push(LandmarkPoint::new(x + jx, y + jy, lm.class));
    }
    Ok((dets, marks))
}

fn frame_dims(frame: &Frame) -> (f64, f64, f64) {
    let n = frame.gt_boxes.len().max(1) as f64;
    let s = frame.gt_boxes.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.l, a.1 + b.w, a.2 + b.h));
    (s.0 / n, s.1 / n, s.2 / n)
}

/// Perturbs every participating CAV's reported pose, ego included.
pub fn inject_loc_noise(frame: &Frame, cfg: &SimConfig, seed: u64) -> Frame {
    let mut out = frame.clone();
    let yaw_sigma = cfg.loc_noise_yaw_sigma.to_radians();
    for (i, (noisy, truth)) in out.cav_noisy_poses.iter_mut().zip(&frame.cav_true_poses).enumerate() {
        let mut rng = stream(seed, STREAM_LOC, i as u64);
        let dx = gauss(&mut rng, cfg.loc_noise_xy_sigma);
        let dy = gauss(&mut rng, cfg.loc_noise_xy_sigma);
        let dyaw = gauss(&mut rng, yaw_sigma);
        *noisy = Pose2 { x: truth.x + dx, y: truth.y + dy, yaw: crate::geometry::wrap(truth.yaw + dyaw) };
    }
    out
}

/// Synthetic LiDAR-like returns on the sides of every vehicle in range plus
/// ground clutter, in the CAV's local frame.
fn surface_points(frame: &Frame, cav_index: usize) -> Vec<Point3<f64>> {
    let pose = frame.cav_true_poses[cav_index];
    let own = frame.cav_gt_indices[cav_index];
    let mut rng = stream(frame.seed, STREAM_POINTS, cav_index as u64);
    let world = Pose2::identity();
    let mut pts = Vec::new();
    for (i, g) in frame.gt_boxes.iter().enumerate() {
        if i == own {
            continue;
        }
        let b = transform_box(g, &world, &pose);
        let d = b.x.hypot(b.y);
        if d > frame.det_range {
            continue;
        }
        let n = (400.0 / d.max(5.0)).round().clamp(3.0, 80.0) as usize;
        let (s, c) = b.r.sin_cos();
        let perim = 2.0 * (b.l + b.w);
        for _ in 0..n {
            // uniform along the footprint perimeter, random height
            let t = rng.random_range(0.0..perim);
            let (u, v) = if t < b.l {
                (t - b.l / 2.0, -b.w / 2.0)
            } else if t < b.l + b.w {
                (b.l / 2.0, t - b.l - b.w / 2.0)
            } else if t < 2.0 * b.l + b.w {
                (b.l / 2.0 - (t - b.l - b.w), b.w / 2.0)
            } else {
                (-b.l / 2.0, b.w / 2.0 - (t - 2.0 * b.l - b.w))
            };
            let z = b.z + rng.random_range(-0.45..0.45) * b.h;
            pts.push(Point3::new(b.x + c * u - s * v, b.y + s * u + c * v, z));
        }
    }
    for _ in 0..200 {
        let rad = frame.det_range * rng.random::<f64>().sqrt();
        let ang = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        pts.push(Point3::new(rad * ang.cos(), rad * ang.sin(), 0.05));
    }
    pts
}

/// The message CAV `cav_index` shares: its detections, in-proposal keypoints
/// and correction landmarks, all in its own frame, with its reported pose.
pub fn build_cpm(frame: &Frame, cav_index: usize, select: &SelectConfig) -> Result<Cpm> {
    select.validate()?;
    let pose = *frame
        .cav_noisy_poses
        .get(cav_index)
        .ok_or_else(|| Error::invalid(format!("no CAV with index {cav_index}")))?;
    let proposals = frame.detections[cav_index].clone();
    let boxes: Vec<BBox7<f64>> = proposals.iter().map(|d| d.bbox).collect();

    let cloud = surface_points(frame, cav_index);
    let inside: Vec<Point3<f64>> = points_in_boxes(&cloud, &boxes).into_iter().map(|i| cloud[i]).collect();
    let coords = if inside.is_empty() {
        inside
    } else {
        fps_sample(&inside, select.n_kpts)?.into_iter().map(|i| inside[i]).collect()
    };

    let mut marks = frame.landmarks[cav_index].clone();
    marks.extend(proposals.iter().map(|d| LandmarkPoint::new(d.bbox.x, d.bbox.y, LandmarkClass::VehicleCenter)));
    let correction_points = select_correction_points(&marks, select.k_p, select.k_fw);

    Ok(Cpm {
        sender_id: frame.cav_gt_indices[cav_index] as u32,
        pose,
        proposals,
        keypoints: KeypointSet::with_synthetic_features(coords, select.n_ch),
        correction_points,
    })
}

/// What the ego ends up holding for one frame: every participant's message
/// after a trip through the wire format, plus ground truth for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub config_id: u64,
    /// Ground-truth boxes within detection range, in the ego's true frame.
    pub gt: Vec<BBox7<f64>>,
    /// Positions in `gt` of the ego and each cooperative CAV, in message order.
    pub cav_gt: Vec<usize>,
    /// Ego message first.
    pub cpms: Vec<Cpm>,
    pub det_range: f64,
}

impl FrameRecord {
    pub fn from_frame(frame: &Frame, select: &SelectConfig) -> Result<Self> {
        let ego_pose = frame.cav_true_poses[0];
        let world = Pose2::identity();
        let mut gt = Vec::new();
        let mut cav_gt = vec![usize::MAX; frame.cav_gt_indices.len()];
        for (i, g) in frame.gt_boxes.iter().enumerate() {
            let local = transform_box(g, &world, &ego_pose);
            if local.x.hypot(local.y) > frame.det_range {
                continue;
            }
            if let Some(k) = frame.cav_gt_indices.iter().position(|&c| c == i) {
                cav_gt[k] = gt.len();
            }
            gt.push(local);
        }
        debug_assert!(cav_gt.iter().all(|&i| i != usize::MAX), "CAVs lie within detection range");
        let cpms = (0..frame.cav_gt_indices.len())
            .map(|k| build_cpm(frame, k, select).and_then(|m| decode_cpm(&encode_cpm(&m)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config_id: frame.config_id, gt, cav_gt, cpms, det_range: frame.det_range })
    }
}
