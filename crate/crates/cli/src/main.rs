//! `coopfuse` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(name = "coopfuse", version, about = "Cooperative detection fusion experiments")]
struct Cli {
    /// Worker threads; 0 uses all cores.
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one CPM container and ground-truth sidecar per frame.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fuse and score frames, writing results.csv, curves/ and cpm_sizes.csv.
    FuseEval {
        #[command(flatten)]
        run: RunArgs,
        /// Directory written by `simulate`; frames are generated when omitted.
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Per-message size breakdown of containers (files or directories).
    CpmStats {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Cartesian sweep over N_v x keypoint count x channel count.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "256,1024,2048")]
        n_kpts: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "16,32,128")]
        n_ch: Vec<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Flags overriding the `[run]` table of the config.
#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    /// Base seed; beats COOPFUSE_SEED, which beats the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Inject localization noise into reported poses.
    #[arg(long, conflicts_with = "no_noise")]
    noise: bool,
    #[arg(long)]
    no_noise: bool,
    #[arg(long, value_delimiter = ',')]
    pipelines: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    n_v: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    iou: Option<Vec<f64>>,
}

enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(Failure::Invalid),
        None => Ok(Config::default()),
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("COOPFUSE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Invalid(format!("COOPFUSE_SEED must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<Config, Failure> {
        let mut cfg = load_config(self.config.as_ref())?;
        if let Some(s) = env_seed()? {
            cfg.run.seed = s;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(n) = self.frames {
            cfg.run.frames = n;
        }
        if self.noise {
            cfg.run.noise = true;
        }
        if self.no_noise {
            cfg.run.noise = false;
        }
        if let Some(p) = &self.pipelines {
            cfg.run.pipelines = p.clone();
        }
        if let Some(v) = &self.n_v {
            cfg.run.n_v = v.clone();
        }
        if let Some(v) = &self.iou {
            cfg.run.iou = v.clone();
        }
        cfg.validate().map_err(Failure::Invalid)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))?;
    match cli.cmd {
        Cmd::Simulate { run, out } => {
            let cfg = run.resolve()?;
            print!("{}", commands::simulate(&cfg, &out)?);
        }
        Cmd::FuseEval { run, input, out } => {
            let cfg = run.resolve()?;
            print!("{}", commands::fuse_eval(&cfg, input.as_deref(), &out)?);
        }
        Cmd::CpmStats { paths, config } => {
            let cfg = load_config(config.as_ref())?;
            cfg.validate().map_err(Failure::Invalid)?;
            let files = commands::expand_containers(&paths)?;
            let (table, summary) = commands::cpm_stats(&files, cfg.scene.det_range, cfg.gridmap.cell)?;
            print!("{table}");
            eprint!("{summary}");
        }
        Cmd::Sweep { run, n_kpts, n_ch, out } => {
            let cfg = run.resolve()?;
            let mut probe = cfg.clone();
            for &k in &n_kpts {
                for &c in &n_ch {
                    probe.keypoints.n_kpts = k;
                    probe.keypoints.n_ch = c;
                    probe.validate().map_err(Failure::Invalid)?;
                }
            }
            print!("{}", commands::sweep(&cfg, &n_kpts, &n_ch, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
