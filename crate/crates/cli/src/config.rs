//! TOML run configuration. Every table and key is optional; missing keys
//! take the defaults below. Unknown keys are rejected.
//!
//! ```toml
//! [run]
//! frames = 200
//! seed = 0
//! noise = false            # inject localization noise into reported poses
//! pipelines = ["no_fusion", "nms", "alg1", "alg1_with_correction"]
//! n_v = [0, 2, 4]
//! iou = [0.3, 0.5, 0.7]
//!
//! [scene]
//! comm_range = 40.0
//! det_range = 57.6
//! max_coop = 4
//! n_vehicles = 80
//! n_cavs = 40
//! map_extent = 160.0
//! road_spacing = 40.0
//! vehicle_dims = [4.41, 1.98, 1.64]   # l, w, h
//! dim_jitter = 0.05
//! loc_noise_xy_sigma = 0.4
//! loc_noise_yaw_sigma_deg = 4.0
//! pole_density = 3.0
//! wall_density = 1.0
//!
//! [detector]
//! pos_sigma_base = 0.1
//! pos_sigma_per_meter = 0.004
//! yaw_sigma_deg = 2.0
//! dim_sigma = 0.05
//! miss_rate_base = 0.05
//! miss_rate_per_meter = 0.003
//! false_pos_rate = 0.5
//! score_decay = 0.01
//! score_sigma = 0.05
//! landmark_sigma = 0.05
//!
//! [keypoints]
//! n_kpts = 2048
//! n_ch = 32
//! k_p = 16
//! k_fw = 32
//!
//! [consensus]
//! search_x = 1.0
//! search_y = 1.0
//! search_yaw_deg = 6.0
//! res_xy = 1.0
//! res_yaw_deg = 1.0
//! inlier_dist = 0.5
//! min_consensus = 3
//!
//! [fusion]
//! iou_thr = 0.3
//! literal_flip = false
//! nms_iou = 0.01
//! cav_iou = 0.3
//!
//! [gridmap]
//! cell = 0.8
//! ```

use std::path::Path;

use coopfuse::eval::{FusionConfig, Pipeline};
use coopfuse::keypoints::SelectConfig;
use coopfuse::localization::ConsensusConfig;
use coopfuse::matching::{MatchConfig, SeedOrder};
use coopfuse::simulator::{NoiseModel, SimConfig};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub frames: usize,
    pub seed: u64,
    pub noise: bool,
    pub pipelines: Vec<String>,
    pub n_v: Vec<usize>,
    pub iou: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            frames: 200,
            seed: 0,
            noise: false,
            pipelines: Pipeline::ALL.iter().map(|p| p.name().to_string()).collect(),
            n_v: vec![0, 2, 4],
            iou: vec![0.3, 0.5, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub comm_range: f64,
    pub det_range: f64,
    pub max_coop: usize,
    pub n_vehicles: usize,
    pub n_cavs: usize,
    pub map_extent: f64,
    pub road_spacing: f64,
    pub vehicle_dims: [f64; 3],
    pub dim_jitter: f64,
    pub loc_noise_xy_sigma: f64,
    pub loc_noise_yaw_sigma_deg: f64,
    pub pole_density: f64,
    pub wall_density: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            comm_range: d.comm_range,
            det_range: d.det_range,
            max_coop: d.max_coop,
            n_vehicles: d.n_vehicles,
            n_cavs: d.n_cavs,
            map_extent: d.map_extent,
            road_spacing: d.road_spacing,
            vehicle_dims: [d.vehicle_dims_mean.0, d.vehicle_dims_mean.1, d.vehicle_dims_mean.2],
            dim_jitter: d.dim_jitter,
            loc_noise_xy_sigma: d.loc_noise_xy_sigma,
            loc_noise_yaw_sigma_deg: d.loc_noise_yaw_sigma,
            pole_density: d.pole_density,
            wall_density: d.wall_density,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub pos_sigma_base: f64,
    pub pos_sigma_per_meter: f64,
    pub yaw_sigma_deg: f64,
    pub dim_sigma: f64,
    pub miss_rate_base: f64,
    pub miss_rate_per_meter: f64,
    pub false_pos_rate: f64,
    pub score_decay: f64,
    pub score_sigma: f64,
    pub landmark_sigma: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = NoiseModel::default();
        Self {
            pos_sigma_base: d.pos_sigma_base,
            pos_sigma_per_meter: d.pos_sigma_per_meter,
            yaw_sigma_deg: d.yaw_sigma.to_degrees(),
            dim_sigma: d.dim_sigma,
            miss_rate_base: d.miss_rate_base,
            miss_rate_per_meter: d.miss_rate_per_meter,
            false_pos_rate: d.false_pos_rate,
            score_decay: d.score_decay,
            score_sigma: d.score_sigma,
            landmark_sigma: d.landmark_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeypointSection {
    pub n_kpts: usize,
    pub n_ch: usize,
    pub k_p: usize,
    pub k_fw: usize,
}

impl Default for KeypointSection {
    fn default() -> Self {
        let d = SelectConfig::default();
        Self { n_kpts: d.n_kpts, n_ch: d.n_ch, k_p: d.k_p, k_fw: d.k_fw }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    pub search_x: f64,
    pub search_y: f64,
    pub search_yaw_deg: f64,
    pub res_xy: f64,
    pub res_yaw_deg: f64,
    pub inlier_dist: f64,
    pub min_consensus: usize,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        let d = ConsensusConfig::<f64>::default();
        Self {
            search_x: d.search_x,
            search_y: d.search_y,
            search_yaw_deg: d.search_yaw,
            res_xy: d.res_xy,
            res_yaw_deg: d.res_yaw,
            inlier_dist: d.inlier_dist,
            min_consensus: d.min_consensus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub iou_thr: f64,
    pub literal_flip: bool,
    pub nms_iou: f64,
    pub cav_iou: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = FusionConfig::default();
        Self { iou_thr: d.matching.iou_thr, literal_flip: d.matching.literal_flip, nms_iou: d.nms_iou, cav_iou: d.cav_iou }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub cell: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cell: 0.8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub scene: SceneSection,
    pub detector: DetectorSection,
    pub keypoints: KeypointSection,
    pub consensus: ConsensusSection,
    pub fusion: FusionSection,
    pub gridmap: GridSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn sim(&self) -> SimConfig {
        let s = &self.scene;
        let d = &self.detector;
        SimConfig {
            comm_range: s.comm_range,
            det_range: s.det_range,
            max_coop: s.max_coop,
            n_vehicles: s.n_vehicles,
            n_cavs: s.n_cavs,
            map_extent: s.map_extent,
            road_spacing: s.road_spacing,
            vehicle_dims_mean: (s.vehicle_dims[0], s.vehicle_dims[1], s.vehicle_dims[2]),
            dim_jitter: s.dim_jitter,
            det_noise: NoiseModel {
                pos_sigma_base: d.pos_sigma_base,
                pos_sigma_per_meter: d.pos_sigma_per_meter,
                yaw_sigma: d.yaw_sigma_deg.to_radians(),
                dim_sigma: d.dim_sigma,
                miss_rate_base: d.miss_rate_base,
                miss_rate_per_meter: d.miss_rate_per_meter,
                false_pos_rate: d.false_pos_rate,
                score_decay: d.score_decay,
                score_sigma: d.score_sigma,
                landmark_sigma: d.landmark_sigma,
            },
            loc_noise_xy_sigma: s.loc_noise_xy_sigma,
            loc_noise_yaw_sigma: s.loc_noise_yaw_sigma_deg,
            pole_density: s.pole_density,
            wall_density: s.wall_density,
            seed: self.run.seed,
        }
    }

    pub fn select(&self) -> SelectConfig {
        let k = &self.keypoints;
        SelectConfig { n_kpts: k.n_kpts, n_ch: k.n_ch, k_p: k.k_p, k_fw: k.k_fw }
    }

    pub fn fusion(&self) -> FusionConfig {
        let c = &self.consensus;
        let f = &self.fusion;
        FusionConfig {
            matching: MatchConfig { iou_thr: f.iou_thr, literal_flip: f.literal_flip, seed_order: SeedOrder::DescendingScore },
            consensus: ConsensusConfig {
                search_x: c.search_x,
                search_y: c.search_y,
                search_yaw: c.search_yaw_deg,
                res_xy: c.res_xy,
                res_yaw: c.res_yaw_deg,
                inlier_dist: c.inlier_dist,
                min_consensus: c.min_consensus,
            },
            nms_iou: f.nms_iou,
            cav_iou: f.cav_iou,
        }
    }

    pub fn pipelines(&self) -> Result<Vec<Pipeline>, String> {
        self.run.pipelines.iter().map(|s| s.parse::<Pipeline>().map_err(|e| format!("run.pipelines: {e}"))).collect()
    }

    /// Checks every value; messages name the offending key.
    pub fn validate(&self) -> Result<(), String> {
        if self.run.frames == 0 {
            return Err("run.frames must be at least 1".into());
        }
        if self.run.n_v.is_empty() {
            return Err("run.n_v must not be empty".into());
        }
        if self.run.iou.is_empty() {
            return Err("run.iou must not be empty".into());
        }
        if let Some(t) = self.run.iou.iter().find(|t| !(t.is_finite() && **t > 0.0 && **t <= 1.0)) {
            return Err(format!("run.iou values must lie in (0, 1], got {t}"));
        }
        if self.pipelines()?.is_empty() {
            return Err("run.pipelines must not be empty".into());
        }
        if !(self.gridmap.cell.is_finite() && self.gridmap.cell > 0.0) {
            return Err(format!("gridmap.cell must be positive, got {}", self.gridmap.cell));
        }
        self.sim().validate().map_err(|e| format!("scene/detector: {e}"))?;
        self.select().validate().map_err(|e| format!("keypoints: {e}"))?;
        let f = self.fusion();
        f.matching.validate().map_err(|e| format!("fusion: {e}"))?;
        f.consensus.validate().map_err(|e| format!("consensus: {e}"))?;
        for (name, v) in [("fusion.nms_iou", f.nms_iou), ("fusion.cav_iou", f.cav_iou)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}
