// SPDX-License-Identifier: Apache-2.0

mod boxfile;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use boxhash::bench::{self, Algorithm, AlgorithmDefaults, BenchConfig, SceneSpec, ScoreModel};
use boxhash::suppress::hnms_par;
use boxhash::{
    hnms, iou_hash, lower_bound, multi_hnms, nms, prefilter_pipeline, soft_nms, HashParams,
    SoftDecay, SoftNmsParams, Stage2,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Parser)]
#[command(name = "boxhash", version = VERSION, about = "IoU hashing and box suppression")]
struct Cli {
    /// Worker threads for batch hashing (output does not depend on it).
    #[arg(long, global = true, env = "BOXHASH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the hash code `i j m n` of every box in a box file.
    Hash(HashArgs),
    /// Print the minimum IoU of two boxes sharing a hash cell.
    Bound {
        #[arg(long)]
        alpha: f64,
    },
    /// Suppress the boxes of a box file and write the kept indices as JSON.
    Suppress(SuppressArgs),
    /// Benchmark algorithms on a synthetic crowded scene and emit CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct HashArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
    #[arg(long, default_value_t = 1.0)]
    h0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    bx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    by: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Nms,
    Soft,
    Hnms,
    Multi,
    Pipeline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Decay {
    Linear,
    Gaussian,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage2Kind {
    Nms,
    Soft,
}

#[derive(Args, Clone)]
struct SoftArgs {
    #[arg(long, value_enum, default_value_t = Decay::Gaussian)]
    decay: Decay,
    #[arg(long, default_value_t = SoftNmsParams::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = SoftNmsParams::DEFAULT_SCORE_FLOOR)]
    score_floor: f64,
}

impl SoftArgs {
    fn params(&self) -> SoftNmsParams {
        let decay = match self.decay {
            Decay::Linear => SoftDecay::Linear,
            Decay::Gaussian => SoftDecay::Gaussian { sigma: self.sigma },
        };
        SoftNmsParams {
            decay,
            score_floor: self.score_floor,
        }
    }
}

#[derive(Args)]
struct SuppressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    /// Number of staggered hash functions (multi, pipeline).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// NMS IoU threshold (nms, and the pipeline's NMS stage).
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    /// Second stage of the pipeline.
    #[arg(long, value_enum, default_value_t = Stage2Kind::Nms)]
    stage2: Stage2Kind,
    #[command(flatten)]
    soft: SoftArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON scene spec; overrides the inline scene flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    truths: usize,
    #[arg(long, default_value_t = 90)]
    per_truth: usize,
    #[arg(long, default_value_t = 1000.0)]
    image_w: f64,
    #[arg(long, default_value_t = 1000.0)]
    image_h: f64,
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
    #[arg(long, value_enum, default_value_t = ScoreArg::IouCorrelated)]
    score_model: ScoreArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated algorithm labels: nms, soft, hnms, multi, pipeline.
    #[arg(long, default_value = "nms,hnms", value_delimiter = ',')]
    algo: Vec<String>,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Threshold of nms, the pipeline's stage 2 and the agreement oracle.
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    #[command(flatten)]
    soft: SoftArgs,
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// CSV output file; stdout when neither --csv nor --json is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreArg {
    IouCorrelated,
    Uniform,
}

#[derive(Serialize)]
struct SuppressOutput {
    schema_version: u32,
    algorithm: &'static str,
    kept: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescored: Option<Vec<f64>>,
    timings_ms: BTreeMap<&'static str, f64>,
}

/// Formats `v` with six significant digits.
fn six_significant(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_hash(args: &HashArgs) -> Result<()> {
    let params = HashParams::new(args.alpha, args.w0, args.h0, args.bx, args.by)?;
    let records = boxfile::read(&args.input)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for rec in &records {
        let b = rec.to_box()?;
        let code = iou_hash(&b, &params).with_context(|| format!("hashing row {}", rec.index))?;
        writeln!(out, "{code}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_bound(alpha: f64) -> Result<()> {
    let v = lower_bound(alpha)?;
    println!("{}", six_significant(v));
    Ok(())
}

fn cmd_suppress(args: &SuppressArgs, parallel: bool) -> Result<()> {
    let records = boxfile::read(&args.input)?;
    let d = boxfile::to_detections(&records)?;
    let mut timings = BTreeMap::new();
    let start = Instant::now();
    let (label, keep) = match args.algo {
        Algo::Nms => ("nms", nms(&d, args.threshold)?),
        Algo::Soft => ("soft", soft_nms(&d, &args.soft.params())?),
        Algo::Hnms => {
            let p = HashParams::canonical(args.alpha)?;
            let keep = if parallel {
                hnms_par(&d, &p)?
            } else {
                hnms(&d, &p)?
            };
            ("hnms", keep)
        }
        Algo::Multi => ("multi", multi_hnms(&d, args.alpha, args.k)?),
        Algo::Pipeline => {
            let stage2 = match args.stage2 {
                Stage2Kind::Nms => Stage2::Nms {
                    threshold: args.threshold,
                },
                Stage2Kind::Soft => Stage2::SoftNms(args.soft.params()),
            };
            let r = prefilter_pipeline(&d, args.alpha, args.k, &stage2)?;
            timings.insert("prefilter", r.timings.prefilter.as_secs_f64() * 1e3);
            timings.insert("stage2", r.timings.stage2.as_secs_f64() * 1e3);
            ("pipeline", r.keep)
        }
    };
    timings.insert("total", start.elapsed().as_secs_f64() * 1e3);

    let output = SuppressOutput {
        schema_version: boxhash::SCHEMA_VERSION,
        algorithm: label,
        kept: keep.kept,
        rescored: keep.rescored,
        timings_ms: timings,
    };
    let mut out = open_output(args.output.as_deref())?;
    serde_json::to_writer(&mut out, &output)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn scene_spec(args: &BenchArgs) -> Result<SceneSpec> {
    if let Some(path) = &args.spec {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text)
            .with_context(|| format!("parsing scene spec {}", path.display()));
    }
    Ok(SceneSpec {
        ground_truth_count: args.truths,
        proposals_per_truth: args.per_truth,
        image_w: args.image_w,
        image_h: args.image_h,
        jitter_scale: args.jitter,
        score_model: match args.score_model {
            ScoreArg::IouCorrelated => ScoreModel::IouCorrelated,
            ScoreArg::Uniform => ScoreModel::Uniform,
        },
        seed: args.seed,
    })
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let spec = scene_spec(args)?;
    let d = bench::generate_scene(&spec)?;
    let defaults = AlgorithmDefaults {
        alpha: args.alpha,
        k: args.k,
        threshold: args.threshold,
        soft: args.soft.params(),
    };
    let algorithms = args
        .algo
        .iter()
        .map(|label| Algorithm::from_label(label, &defaults))
        .collect::<boxhash::Result<Vec<_>>>()?;
    if algorithms.is_empty() {
        bail!("no algorithms given");
    }
    let cfg = BenchConfig {
        repetitions: args.repeat,
        warmup: args.warmup,
        oracle_threshold: args.threshold,
    };
    let reports = bench::run_bench(&d, &algorithms, &cfg)?;
    if let Some(path) = &args.json {
        bench::write_json(&reports, open_output(Some(path))?)?;
    }
    if args.csv.is_some() || args.json.is_none() {
        bench::write_csv(&reports, open_output(args.csv.as_deref())?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.unwrap_or(1);
    if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("starting worker pool")?;
    }
    match &cli.command {
        Command::Hash(args) => cmd_hash(args),
        Command::Bound { alpha } => cmd_bound(*alpha),
        Command::Suppress(args) => cmd_suppress(args, threads > 1),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
