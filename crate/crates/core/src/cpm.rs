//! Collective Perception Message: data model, fixed-point binary codec and
//! size accounting.
//!
//! Wire layout (all little-endian):
//!
//! ```text
//! header (36 B)  "CPM1" | version u8 | sender_id u32 | x,y,yaw f32
//!                n_prop u16 | n_kpts u16 | n_corr u16 | n_ch u8
//!                feat_offset f32 | feat_scale f32
//! proposal (15 B) x,y,z,w,l,h i16 @ 0.01 m | r i16 @ 1e-4 rad | score u8
//! keypoint        x,y,z i16 @ 0.01 m | n_ch feature bytes
//! correction (5 B) class u8 | x,y i16 @ 0.01 m
//! ```
//!
//! Coordinates are in the sender's local frame. Features share one affine
//! u8 quantizer per message. Rounding is half away from zero.

use crate::error::{Error, Result};
use crate::geometry::{BBox7, Point3, Pose2};
use crate::keypoints::KeypointSet;
use crate::localization::{LandmarkClass, LandmarkPoint};
use crate::matching::Detection;

pub const MAGIC: &[u8; 4] = b"CPM1";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 36;
pub const PROPOSAL_BYTES: usize = 15;
pub const KEYPOINT_COORD_BYTES: usize = 6;
pub const CORRECTION_BYTES: usize = 5;
/// Position quantum in meters.
pub const POS_QUANTUM: f64 = 0.01;
/// Heading quantum in radians.
pub const YAW_QUANTUM: f64 = 1e-4;
pub const GRID_HEADER_BYTES: usize = 16;

/// One vehicle's shared message. Everything is in the sender's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpm {
    pub sender_id: u32,
    /// Sender pose as reported, possibly erroneous.
    pub pose: Pose2<f64>,
    pub proposals: Vec<Detection<f64>>,
    pub keypoints: KeypointSet<f64>,
    pub correction_points: Vec<LandmarkPoint<f64>>,
}

impl Cpm {
    pub fn empty(sender_id: u32, pose: Pose2<f64>, n_ch: usize) -> Self {
        Self {
            sender_id,
            pose,
            proposals: Vec::new(),
            keypoints: KeypointSet::empty(n_ch),
            correction_points: Vec::new(),
        }
    }
}

fn enc_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Encode { field: field.into(), reason: reason.into() }
}

fn count_u16(field: &str, n: usize) -> Result<u16> {
    u16::try_from(n).map_err(|_| enc_err(field, format!("count {n} exceeds 65535")))
}

fn quantize_i16(field: impl Fn() -> String, v: f64, quantum: f64) -> Result<i16> {
    if !v.is_finite() {
        return Err(enc_err(field(), format!("non-finite value {v}")));
    }
    let q = (v / quantum).round();
    if q < i16::MIN as f64 || q > i16::MAX as f64 {
        return Err(enc_err(field(), format!("value {v} outside the i16 range at quantum {quantum}")));
    }
    Ok(q as i16)
}

fn quantize_score(field: impl Fn() -> String, s: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&s) {
        return Err(enc_err(field(), format!("score {s} outside [0, 1]")));
    }
    Ok((s * 255.0).round() as u8)
}

/// Per-message affine feature quantizer: `value ≈ offset + byte · scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureQuantizer {
    pub offset: f32,
    pub scale: f32,
}

impl FeatureQuantizer {
    pub fn fit(kp: &KeypointSet<f64>) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, f) in kp.features.iter().enumerate() {
            for &v in f {
                if !v.is_finite() {
                    return Err(enc_err(format!("keypoints[{i}].features"), "non-finite feature"));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            return Ok(Self { offset: 0.0, scale: 0.0 });
        }
        let offset = lo as f32;
        let scale = ((hi - offset as f64) / 255.0) as f32;
        if !offset.is_finite() || !scale.is_finite() {
            return Err(enc_err("keypoints.features", "feature range overflows f32"));
        }
        Ok(Self { offset, scale })
    }

    pub fn quantize(&self, v: f64) -> u8 {
        if self.scale <= 0.0 {
            return 0;
        }
        ((v - self.offset as f64) / self.scale as f64).round().clamp(0.0, 255.0) as u8
    }

    pub fn dequantize(&self, b: u8) -> f64 {
        self.offset as f64 + b as f64 * self.scale as f64
    }
}

/// Encoded size from the closed formula, without encoding.
pub fn cpm_size(m: &Cpm) -> Result<usize> {
    let n_prop = count_u16("proposals", m.proposals.len())? as usize;
    let n_kpts = count_u16("keypoints", m.keypoints.len())? as usize;
    let n_corr = count_u16("correction_points", m.correction_points.len())? as usize;
    let n_ch = u8::try_from(m.keypoints.n_ch)
        .map_err(|_| enc_err("n_ch", format!("{} exceeds 255", m.keypoints.n_ch)))? as usize;
    Ok(size_formula(n_prop, n_kpts, n_ch, n_corr))
}

pub fn size_formula(n_prop: usize, n_kpts: usize, n_ch: usize, n_corr: usize) -> usize {
    HEADER_BYTES + PROPOSAL_BYTES * n_prop + (KEYPOINT_COORD_BYTES + n_ch) * n_kpts + CORRECTION_BYTES * n_corr
}

pub fn encode_cpm(m: &Cpm) -> Result<Vec<u8>> {
    let size = cpm_size(m)?;
    m.keypoints.validate().map_err(|e| enc_err("keypoints", e.to_string()))?;
    let pose = [m.pose.x, m.pose.y, m.pose.yaw];
    if pose.iter().any(|v| !v.is_finite()) {
        return Err(enc_err("pose", "non-finite pose"));
    }
    let quant = FeatureQuantizer::fit(&m.keypoints)?;

    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&m.sender_id.to_le_bytes());
    for v in pose {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.extend_from_slice(&(m.proposals.len() as u16).to_le_bytes());
    out.extend_from_slice(&(m.keypoints.len() as u16).to_le_bytes());
    out.extend_from_slice(&(m.correction_points.len() as u16).to_le_bytes());
    out.push(m.keypoints.n_ch as u8);
    out.extend_from_slice(&quant.offset.to_le_bytes());
    out.extend_from_slice(&quant.scale.to_le_bytes());

    for (i, d) in m.proposals.iter().enumerate() {
        let b = &d.bbox;
        let names = ["x", "y", "z", "w", "l", "h"];
        for (name, v) in names.iter().zip([b.x, b.y, b.z, b.w, b.l, b.h]) {
            let q = quantize_i16(|| format!("proposals[{i}].{name}"), v, POS_QUANTUM)?;
            if matches!(*name, "w" | "l" | "h") && q <= 0 {
                return Err(enc_err(format!("proposals[{i}].{name}"), format!("dimension {v} quantizes to zero")));
            }
            out.extend_from_slice(&q.to_le_bytes());
        }
        out.extend_from_slice(&quantize_i16(|| format!("proposals[{i}].r"), b.r, YAW_QUANTUM)?.to_le_bytes());
        out.push(quantize_score(|| format!("proposals[{i}].score"), d.score)?);
    }

    for (i, (p, f)) in m.keypoints.coords.iter().zip(&m.keypoints.features).enumerate() {
        for (name, v) in [("x", p.x), ("y", p.y), ("z", p.z)] {
            let q = quantize_i16(|| format!("keypoints[{i}].{name}"), v, POS_QUANTUM)?;
            out.extend_from_slice(&q.to_le_bytes());
        }
        out.extend(f.iter().map(|&v| quant.quantize(v)));
    }

    for (i, c) in m.correction_points.iter().enumerate() {
        out.push(c.class.code());
        for (name, v) in [("x", c.x), ("y", c.y)] {
            let q = quantize_i16(|| format!("correction_points[{i}].{name}"), v, POS_QUANTUM)?;
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Decode {
                offset: self.base + self.pos,
                reason: format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn i16(&mut self, what: &str) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn pos_m(&mut self, what: &str) -> Result<f64> {
        Ok(self.i16(what)? as f64 * POS_QUANTUM)
    }
}

pub fn decode_cpm(bytes: &[u8]) -> Result<Cpm> {
    decode_at(bytes, 0)
}

/// Decodes a message whose first byte sits at `base` in a larger buffer;
/// error offsets are reported relative to that buffer.
fn decode_at(bytes: &[u8], base: usize) -> Result<Cpm> {
    let mut r = Reader { buf: bytes, pos: 0, base };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Decode { offset: base, reason: "bad magic".into() });
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Decode { offset: base + 4, reason: format!("unsupported version {version}") });
    }
    let sender_id = r.u32("sender_id")?;
    let (px, py, pyaw) = (r.f32("pose")?, r.f32("pose")?, r.f32("pose")?);
    let n_prop = r.u16("n_prop")? as usize;
    let n_kpts = r.u16("n_kpts")? as usize;
    let n_corr = r.u16("n_corr")? as usize;
    let n_ch = r.u8("n_ch")? as usize;
    let quant = FeatureQuantizer { offset: r.f32("feat_offset")?, scale: r.f32("feat_scale")? };
    if ![px, py, pyaw, quant.offset, quant.scale].iter().all(|v| v.is_finite()) {
        return Err(Error::Decode { offset: base + 9, reason: "non-finite header float".into() });
    }

    let mut proposals = Vec::with_capacity(n_prop);
    for _ in 0..n_prop {
        let mut f = [0.0; 6];
        for v in f.iter_mut() {
            *v = r.pos_m("proposal")?;
        }
        let yaw = r.i16("proposal")? as f64 * YAW_QUANTUM;
        let score = r.u8("proposal")? as f64 / 255.0;
        let bbox = BBox7 { x: f[0], y: f[1], z: f[2], w: f[3], l: f[4], h: f[5], r: yaw };
        proposals.push(Detection { bbox, score });
    }

    let mut coords = Vec::with_capacity(n_kpts);
    let mut features = Vec::with_capacity(n_kpts);
    for _ in 0..n_kpts {
        coords.push(Point3::new(r.pos_m("keypoint")?, r.pos_m("keypoint")?, r.pos_m("keypoint")?));
        features.push(r.take(n_ch, "keypoint features")?.iter().map(|&b| quant.dequantize(b)).collect());
    }

    let mut correction_points = Vec::with_capacity(n_corr);
    for _ in 0..n_corr {
        let at = base + r.pos;
        let code = r.u8("correction point")?;
        let class = LandmarkClass::from_code(code)
            .ok_or_else(|| Error::Decode { offset: at, reason: format!("unknown landmark class {code}") })?;
        correction_points.push(LandmarkPoint::new(r.pos_m("correction point")?, r.pos_m("correction point")?, class));
    }

    if r.pos != bytes.len() {
        return Err(Error::Decode { offset: base + r.pos, reason: format!("{} trailing bytes", bytes.len() - r.pos) });
    }
    Ok(Cpm {
        sender_id,
        pose: Pose2 { x: px as f64, y: py as f64, yaw: pyaw as f64 },
        proposals,
        keypoints: KeypointSet { coords, features, n_ch },
        correction_points,
    })
}

/// Concatenates `u32` length-prefixed encoded messages.
pub fn write_container(msgs: &[Cpm]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for m in msgs {
        let bytes = encode_cpm(m)?;
        let len = u32::try_from(bytes.len()).map_err(|_| enc_err("container", "record too large"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

/// Splits a container into raw records, returning `(offset, bytes)` pairs.
pub fn container_records(bytes: &[u8]) -> Result<Vec<(usize, &[u8])>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::Decode { offset: pos, reason: "truncated record length".into() });
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let start = pos + 4;
        if bytes.len() - start < len {
            return Err(Error::Decode {
                offset: start,
                reason: format!("record of {len} bytes truncated to {}", bytes.len() - start),
            });
        }
        out.push((start, &bytes[start..start + len]));
        pos = start + len;
    }
    Ok(out)
}

pub fn read_container(bytes: &[u8]) -> Result<Vec<Cpm>> {
    container_records(bytes)?.into_iter().map(|(off, rec)| decode_at(rec, off)).collect()
}

/// Dense BEV feature map shared by the map-sharing baseline; only used for
/// size comparison.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridMapPayload {
    pub width_cells: usize,
    pub height_cells: usize,
    pub n_ch: usize,
    pub values: Vec<f32>,
}

impl GridMapPayload {
    pub fn zeros(width_cells: usize, height_cells: usize, n_ch: usize) -> Self {
        Self { width_cells, height_cells, n_ch, values: vec![0.0; width_cells * height_cells * n_ch] }
    }

    /// Square map covering `±range` meters at `cell` meters per cell.
    pub fn for_range(range: f64, cell: f64, n_ch: usize) -> Self {
        let side = (2.0 * range / cell).round() as usize;
        Self::zeros(side, side, n_ch)
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.width_cells * self.height_cells * self.n_ch;
        if self.values.len() != want {
            return Err(Error::invalid(format!("grid map has {} values, expected {want}", self.values.len())));
        }
        Ok(())
    }

    /// Cells with at least one nonzero channel.
    pub fn nonzero_cells(&self) -> usize {
        if self.n_ch == 0 {
            return 0;
        }
        self.values.chunks(self.n_ch).filter(|c| c.iter().any(|&v| v != 0.0)).count()
    }
}

/// Grid map of `±range` meters whose nonzero cells are those with a center
/// inside one of the message's proposals; the sparse counterpart of sharing
/// the same detections as a feature map.
pub fn proposal_gridmap(m: &Cpm, range: f64, cell: f64, n_ch: usize) -> GridMapPayload {
    let mut g = GridMapPayload::for_range(range, cell, n_ch);
    let side = g.width_cells;
    let boxes: Vec<BBox7<f64>> = m.proposals.iter().map(|d| d.bbox).collect();
    for row in 0..g.height_cells {
        let y = -range + (row as f64 + 0.5) * cell;
        for col in 0..side {
            let x = -range + (col as f64 + 0.5) * cell;
            if boxes.iter().any(|b| b.contains_xy(x, y, 0.0)) {
                let at = (row * side + col) * n_ch;
                g.values[at..at + n_ch].iter_mut().for_each(|v| *v = 1.0);
            }
        }
    }
    g
}

pub fn dense_gridmap_bytes(width: usize, height: usize, n_ch: usize) -> usize {
    GRID_HEADER_BYTES + width * height * n_ch
}

pub fn sparse_gridmap_bytes(nonzero_cells: usize, n_ch: usize) -> usize {
    GRID_HEADER_BYTES + nonzero_cells * (4 + n_ch)
}

/// Dense size: 16-byte header plus one byte per cell and channel.
pub fn gridmap_size(g: &GridMapPayload) -> usize {
    dense_gridmap_bytes(g.width_cells, g.height_cells, g.n_ch)
}

/// Sparse size: header plus `(4 + n_ch)` bytes per nonzero cell.
pub fn gridmap_sparse_size(g: &GridMapPayload) -> usize {
    sparse_gridmap_bytes(g.nonzero_cells(), g.n_ch)
}
