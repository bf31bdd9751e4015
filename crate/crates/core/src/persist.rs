//! On-disk frame layout: a CPM container (`.cpmc`) next to a plain-text
//! ground-truth sidecar (`.gt.txt`).
//!
//! Sidecar lines are `x y z w l h r` in the ego's true frame. Lines starting
//! with `#` carry metadata:
//!
//! ```text
//! # config <16 hex digits>
//! # det_range <meters>
//! # cav <gt line index of the ego> <... of each cooperative CAV>
//! ```

use std::fmt::Write as _;

use crate::cpm::{read_container, write_container};
use crate::error::{Error, Result};
use crate::geometry::BBox7;
use crate::simulator::FrameRecord;

pub const CONTAINER_EXT: &str = "cpmc";
pub const SIDECAR_EXT: &str = "gt.txt";

pub fn write_sidecar(rec: &FrameRecord) -> String {
    let mut s = String::new();
    writeln!(s, "# config {:016x}", rec.config_id).unwrap();
    writeln!(s, "# det_range {}", rec.det_range).unwrap();
    let cav: Vec<String> = rec.cav_gt.iter().map(|i| i.to_string()).collect();
    writeln!(s, "# cav {}", cav.join(" ")).unwrap();
    for b in &rec.gt {
        // + 0.0 turns -0 into 0
        let f = b.fields().map(|v| v + 0.0);
        writeln!(s, "{} {} {} {} {} {} {}", f[0], f[1], f[2], f[3], f[4], f[5], f[6]).unwrap();
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::invalid(format!("sidecar line {}: {}", line + 1, msg.into()))
}

/// Parsed sidecar: `(config_id, det_range, cav_gt, gt)`.
pub type Sidecar = (u64, f64, Vec<usize>, Vec<BBox7<f64>>);

pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let mut config = None;
    let mut det_range = None;
    let mut cav = None;
    let mut gt = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut it = meta.split_whitespace();
            match it.next() {
                Some("config") => {
                    let v = it.next().ok_or_else(|| parse_err(n, "missing config id"))?;
                    config = Some(u64::from_str_radix(v, 16).map_err(|e| parse_err(n, e.to_string()))?);
                }
                Some("det_range") => {
                    let v = it.next().ok_or_else(|| parse_err(n, "missing det_range"))?;
                    det_range = Some(v.parse::<f64>().map_err(|e| parse_err(n, e.to_string()))?);
                }
                Some("cav") => {
                    cav = Some(
                        it.map(|v| v.parse::<usize>().map_err(|e| parse_err(n, e.to_string())))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                _ => {}
            }
            continue;
        }
        let f = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(n, format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if f.len() != 7 {
            return Err(parse_err(n, format!("expected 7 fields, found {}", f.len())));
        }
        let b = BBox7 { x: f[0], y: f[1], z: f[2], w: f[3], l: f[4], h: f[5], r: f[6] };
        b.validate().map_err(|e| parse_err(n, e.to_string()))?;
        gt.push(b);
    }
    let config = config.ok_or_else(|| Error::invalid("sidecar lacks `# config`"))?;
    let det_range = det_range.ok_or_else(|| Error::invalid("sidecar lacks `# det_range`"))?;
    let cav = cav.ok_or_else(|| Error::invalid("sidecar lacks `# cav`"))?;
    if let Some(bad) = cav.iter().find(|&&i| i >= gt.len()) {
        return Err(Error::invalid(format!("CAV index {bad} beyond {} ground-truth boxes", gt.len())));
    }
    Ok((config, det_range, cav, gt))
}

/// `(container bytes, sidecar text)` for one frame.
pub fn encode_frame(rec: &FrameRecord) -> Result<(Vec<u8>, String)> {
    Ok((write_container(&rec.cpms)?, write_sidecar(rec)))
}

pub fn decode_frame(container: &[u8], sidecar: &str) -> Result<FrameRecord> {
    let cpms = read_container(container)?;
    let (config_id, det_range, cav_gt, gt) = parse_sidecar(sidecar)?;
    if cpms.is_empty() {
        return Err(Error::invalid("container holds no messages"));
    }
    if cpms.len() != cav_gt.len() {
        return Err(Error::invalid(format!(
            "{} messages but {} CAV entries in the sidecar",
            cpms.len(),
            cav_gt.len()
        )));
    }
    Ok(FrameRecord { config_id, gt, cav_gt, cpms, det_range })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoints::SelectConfig;
    use crate::simulator::{generate_frame, SimConfig};

    #[test]
    fn frame_files_round_trip() {
        let f = generate_frame(&SimConfig::default(), 31).unwrap();
        let rec = FrameRecord::from_frame(&f, &SelectConfig::default()).unwrap();
        let (bytes, text) = encode_frame(&rec).unwrap();
        let back = decode_frame(&bytes, &text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(encode_frame(&back).unwrap(), (bytes, text));
    }

    #[test]
    fn sidecar_errors() {
        assert!(parse_sidecar("1 2 3 4 5 6 7\n").is_err());
        let text = "# config 00000000000000ff\n# det_range 57.6\n# cav 0\n1 2 3\n";
        assert!(parse_sidecar(text).unwrap_err().to_string().contains("line 4"));
        let text = "# config 00000000000000ff\n# det_range 57.6\n# cav 2\n0 0 0 1 1 1 0\n";
        assert!(parse_sidecar(text).is_err());
    }
}
