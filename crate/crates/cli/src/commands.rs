use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use coopfuse::cpm::{container_records, read_container, gridmap_size, gridmap_sparse_size, proposal_gridmap, Cpm};
use coopfuse::eval::{fused_predictions, score_pooled, ApResult, FusionConfig, Pipeline};
use coopfuse::keypoints::SelectConfig;
use coopfuse::persist::{decode_frame, encode_frame, CONTAINER_EXT, SIDECAR_EXT};
use coopfuse::simulator::{frame_seed, generate_frame, inject_loc_noise, FrameRecord, SimConfig};
use rayon::prelude::*;

use crate::config::Config;

/// Sub-stream of a frame seed used for localization noise.
const LOC_NOISE_STREAM: u64 = 0x4c4f43;

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}")
}

/// Simulates frame `index` of a run and packs what the ego receives.
pub fn make_record(sim: &SimConfig, select: &SelectConfig, noise: bool, index: usize) -> anyhow::Result<FrameRecord> {
    let seed = frame_seed(sim.seed, index as u64);
    let mut frame = generate_frame(sim, seed).with_context(|| format!("generating frame {index}"))?;
    if noise {
        frame = inject_loc_noise(&frame, sim, frame_seed(seed, LOC_NOISE_STREAM));
    }
    FrameRecord::from_frame(&frame, select).with_context(|| format!("packing frame {index}"))
}

/// Frames `0..n`, generated in parallel and returned in index order.
pub fn make_records(sim: &SimConfig, select: &SelectConfig, noise: bool, n: usize) -> anyhow::Result<Vec<FrameRecord>> {
    (0..n).into_par_iter().map(|i| make_record(sim, select, noise, i)).collect()
}

pub fn simulate(cfg: &Config, out: &Path) -> anyhow::Result<String> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let sim = cfg.sim();
    let select = cfg.select();
    let files: Vec<(String, u64, usize, usize)> = (0..cfg.run.frames)
        .into_par_iter()
        .map(|i| {
            let rec = make_record(&sim, &select, cfg.run.noise, i)?;
            let (bytes, text) = encode_frame(&rec)?;
            let name = frame_name(i);
            let container = out.join(format!("{name}.{CONTAINER_EXT}"));
            fs::write(&container, &bytes).with_context(|| format!("writing {}", container.display()))?;
            let sidecar = out.join(format!("{name}.{SIDECAR_EXT}"));
            fs::write(&sidecar, text).with_context(|| format!("writing {}", sidecar.display()))?;
            Ok((name, frame_seed(sim.seed, i as u64), rec.cpms.len(), bytes.len()))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut manifest = String::from("index,seed,container,sidecar,n_cpm,container_bytes\n");
    for (i, (name, seed, n_cpm, bytes)) in files.iter().enumerate() {
        writeln!(manifest, "{i},{seed},{name}.{CONTAINER_EXT},{name}.{SIDECAR_EXT},{n_cpm},{bytes}")?;
    }
    fs::write(out.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}

/// Loads every `frame_*.cpmc` in `dir` (sorted by name) with its sidecar.
pub fn load_frames(dir: &Path) -> anyhow::Result<Vec<FrameRecord>> {
    let mut containers: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == CONTAINER_EXT))
        .collect();
    containers.sort();
    if containers.is_empty() {
        bail!("no .{CONTAINER_EXT} frames in {}", dir.display());
    }
    containers
        .par_iter()
        .map(|c| {
            let sidecar = c.with_extension(SIDECAR_EXT);
            let bytes = fs::read(c).with_context(|| format!("reading {}", c.display()))?;
            let text = fs::read_to_string(&sidecar).with_context(|| format!("reading {}", sidecar.display()))?;
            decode_frame(&bytes, &text).with_context(|| format!("loading {}", c.display()))
        })
        .collect()
}

pub struct EvalRow {
    pub pipeline: Pipeline,
    pub n_v: usize,
    pub result: ApResult<f64>,
}

pub fn evaluate(
    frames: &[FrameRecord],
    pipelines: &[Pipeline],
    n_vs: &[usize],
    iou: &[f64],
    fusion: &FusionConfig,
) -> anyhow::Result<Vec<EvalRow>> {
    if let Some(first) = frames.first() {
        if let Some(bad) = frames.iter().position(|f| f.config_id != first.config_id) {
            bail!("frame {bad} was generated from a different configuration");
        }
    }
    let mut rows = Vec::new();
    for &pipeline in pipelines {
        for &n_v in n_vs {
            let preds = frames
                .par_iter()
                .map(|f| fused_predictions(f, pipeline, n_v, fusion))
                .collect::<Result<Vec<_>, _>>()?;
            for result in score_pooled(frames, &preds, iou) {
                rows.push(EvalRow { pipeline, n_v, result });
            }
        }
    }
    Ok(rows)
}

pub fn results_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("pipeline,n_v,iou,ap,n_gt,n_pred\n");
    for r in rows {
        let a = &r.result;
        writeln!(s, "{},{},{},{:.6},{},{}", r.pipeline, r.n_v, a.iou_thr, a.ap, a.n_gt, a.n_pred).unwrap();
    }
    s
}

pub fn curve_csv(result: &ApResult<f64>) -> String {
    let mut s = String::from("recall,precision,score\n");
    for p in &result.curve {
        writeln!(s, "{:.6},{:.6},{:.6}", p.recall, p.precision, p.score_threshold).unwrap();
    }
    s
}

pub fn curve_name(row: &EvalRow) -> String {
    format!("pr_{}_nv{}_iou{:03}.csv", row.pipeline, row.n_v, (row.result.iou_thr * 100.0).round() as u32)
}

/// Mean and median encoded size over every message.
pub fn cpm_size_stats(frames: &[FrameRecord]) -> anyhow::Result<(f64, f64, usize)> {
    let mut sizes = frames
        .iter()
        .flat_map(|f| &f.cpms)
        .map(|m| coopfuse::cpm::cpm_size(m))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() {
        return Ok((0.0, 0.0, 0));
    }
    sizes.sort_unstable();
    let n = sizes.len();
    let mean = sizes.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 { sizes[n / 2] as f64 } else { (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0 };
    Ok((mean, median, n))
}

pub fn fuse_eval(cfg: &Config, input: Option<&Path>, out: &Path) -> anyhow::Result<String> {
    let frames = match input {
        Some(dir) => load_frames(dir)?,
        None => make_records(&cfg.sim(), &cfg.select(), cfg.run.noise, cfg.run.frames)?,
    };
    let pipelines = cfg.pipelines().map_err(anyhow::Error::msg)?;
    let rows = evaluate(&frames, &pipelines, &cfg.run.n_v, &cfg.run.iou, &cfg.fusion())?;

    let curves = out.join("curves");
    fs::create_dir_all(&curves).with_context(|| format!("creating {}", curves.display()))?;
    let table = results_csv(&rows);
    fs::write(out.join("results.csv"), &table)?;
    for r in &rows {
        fs::write(curves.join(curve_name(r)), curve_csv(&r.result))?;
    }
    let (mean, median, n) = cpm_size_stats(&frames)?;
    let sizes = format!("statistic,bytes\nmessages,{n}\nmean,{mean:.1}\nmedian,{median:.1}\n");
    fs::write(out.join("cpm_sizes.csv"), &sizes)?;
    Ok(format!("{table}\n{sizes}"))
}

pub struct CpmRow {
    pub sender: u32,
    pub n_prop: usize,
    pub n_kpts: usize,
    pub n_ch: usize,
    pub n_corr: usize,
    pub bytes: usize,
    pub dense: usize,
    pub sparse: usize,
}

impl CpmRow {
    pub fn of(m: &Cpm, bytes: usize, range: f64, cell: f64) -> Self {
        let g = proposal_gridmap(m, range, cell, m.keypoints.n_ch);
        Self {
            sender: m.sender_id,
            n_prop: m.proposals.len(),
            n_kpts: m.keypoints.len(),
            n_ch: m.keypoints.n_ch,
            n_corr: m.correction_points.len(),
            bytes,
            dense: gridmap_size(&g),
            sparse: gridmap_sparse_size(&g),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.dense as f64 / self.bytes as f64
    }
}

/// Per-message table for each container, then a summary over all of them.
pub fn cpm_stats(paths: &[PathBuf], range: f64, cell: f64) -> anyhow::Result<(String, String)> {
    let mut table = String::from("file,index,sender,n_prop,n_kpts,n_ch,n_corr,bytes,dense_bytes,sparse_bytes,ratio\n");
    let mut rows = Vec::new();
    for path in paths {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let msgs = read_container(&data).with_context(|| format!("in {}", path.display()))?;
        let records = container_records(&data)?;
        for (i, (m, (_, rec))) in msgs.iter().zip(records).enumerate() {
            let row = CpmRow::of(m, rec.len(), range, cell);
            writeln!(
                table,
                "{},{i},{},{},{},{},{},{},{},{},{}",
                path.display(),
                row.sender,
                row.n_prop,
                row.n_kpts,
                row.n_ch,
                row.n_corr,
                row.bytes,
                row.dense,
                row.sparse,
                row.ratio()
            )?;
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Ok((table, "messages 0\n".into()));
    }
    let mut bytes: Vec<usize> = rows.iter().map(|r| r.bytes).collect();
    bytes.sort_unstable();
    let n = bytes.len();
    let median = if n % 2 == 1 { bytes[n / 2] as f64 } else { (bytes[n / 2 - 1] + bytes[n / 2]) as f64 / 2.0 };
    let mean = bytes.iter().sum::<usize>() as f64 / n as f64;
    let mut dense: Vec<usize> = rows.iter().map(|r| r.dense).collect();
    dense.sort_unstable();
    let dense_median = dense[n / 2];
    let summary = format!(
        "messages {n}\nmean_bytes {mean:.1}\nmedian_bytes {median:.1}\ndense_gridmap_bytes {dense_median}\nmedian_ratio {:.3}\n",
        dense_median as f64 / median
    );
    Ok((table, summary))
}

/// Every `.cpmc` under the given paths; directories are expanded one level.
pub fn expand_containers(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|x| x.extension().is_some_and(|e| e == CONTAINER_EXT))
                .collect();
            v.sort();
            out.extend(v);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no containers found");
    }
    Ok(out)
}

pub fn sweep(cfg: &Config, kpts: &[usize], chans: &[usize], out: &Path) -> anyhow::Result<String> {
    let pipelines = cfg.pipelines().map_err(anyhow::Error::msg)?;
    let fusion = cfg.fusion();
    let mut s = String::from("n_kpts,n_ch,pipeline,n_v,iou,ap,n_gt,n_pred,mean_cpm_bytes,median_cpm_bytes\n");
    for &n_kpts in kpts {
        for &n_ch in chans {
            let mut select = cfg.select();
            select.n_kpts = n_kpts;
            select.n_ch = n_ch;
            let frames = make_records(&cfg.sim(), &select, cfg.run.noise, cfg.run.frames)?;
            let (mean, median, _) = cpm_size_stats(&frames)?;
            for r in evaluate(&frames, &pipelines, &cfg.run.n_v, &cfg.run.iou, &fusion)? {
                let a = &r.result;
                writeln!(
                    s,
                    "{n_kpts},{n_ch},{},{},{},{:.6},{},{},{mean:.1},{median:.1}",
                    r.pipeline, r.n_v, a.iou_thr, a.ap, a.n_gt, a.n_pred
                )?;
            }
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("sweep.csv"), &s)?;
    Ok(s)
}
