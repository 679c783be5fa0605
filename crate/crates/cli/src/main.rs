use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dimtrack_core::config::{EnhanceMode, TrackerConfig};
use dimtrack_core::enhance::{fast_enhance, lime_enhance, recover_inverted, should_enhance};
use dimtrack_core::eval::{evaluate_dataset, EvalMode};
use dimtrack_core::imgproc::{load_image, load_sequence, save_image, BoundingBox};
use dimtrack_core::memory::ConfidenceReport;
use dimtrack_core::synth::{generate, write_sequence, SynthKind};
use dimtrack_core::tracker::Tracker;

#[derive(Parser, Debug)]
#[command(name = "dimtrack", version, about = "Correlation-filter tracker for low-light video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one target through an image sequence.
    Track(TrackArgs),
    /// Run the OPE or TRE protocol over a dataset directory.
    Eval(EvalArgs),
    /// Enhance a single image.
    Enhance(EnhanceArgs),
    /// Write a synthetic test sequence.
    Synth(SynthArgs),
}

/// Tracker parameters. Flags override values read from `--config`.
#[derive(Args, Debug, Default)]
struct TunableArgs {
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Filter regularization weight [default: 0.01]
    #[arg(long)]
    lambda: Option<f64>,
    /// Learning rate [default: 0.025]
    #[arg(long)]
    eta: Option<f64>,
    /// Label bandwidth relative to the target size [default: 0.0625]
    #[arg(long)]
    sigma_factor: Option<f64>,
    /// Search-region padding [default: 2]
    #[arg(long)]
    padding: Option<f64>,
    /// Compressed translation feature dimension [default: 18]
    #[arg(long)]
    dims: Option<usize>,
    /// Number of scales [default: 17]
    #[arg(long)]
    n_scales: Option<usize>,
    /// Number of interpolated scales [default: 33]
    #[arg(long)]
    n_interp: Option<usize>,
    /// Scale step [default: 1.02]
    #[arg(long)]
    scale_step: Option<f64>,
    /// Re-detection trigger threshold on the long-term confidence [default: 0.2]
    #[arg(long)]
    t_r: Option<f64>,
    /// Acceptance threshold for re-detections and long-term updates [default: 0.4]
    #[arg(long)]
    t_a: Option<f64>,
    /// Response-peak gate factor [default: 0.9]
    #[arg(long)]
    response_factor: Option<f64>,
    /// Response-quality gate factor [default: 0.75]
    #[arg(long)]
    quality_factor: Option<f64>,
    /// Response-quality metric, apce or csrm [default: apce]
    #[arg(long)]
    quality: Option<String>,
    /// Frames between filter updates [default: 3]
    #[arg(long)]
    update_interval: Option<usize>,
    /// Frames between template re-matches [default: 5]
    #[arg(long)]
    rematch_interval: Option<usize>,
    /// Enhancement trigger luminance on the 0-255 scale [default: 48]
    #[arg(long)]
    enhance_t_l: Option<f64>,
    /// Extra `key=value` overrides, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl TunableArgs {
    fn resolve(&self) -> Result<TrackerConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrackerConfig::load(path)?,
            None => TrackerConfig::default(),
        };
        let flags: [(&str, Option<String>); 16] = [
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("sigma_factor", self.sigma_factor.map(|v| v.to_string())),
            ("padding", self.padding.map(|v| v.to_string())),
            ("dims", self.dims.map(|v| v.to_string())),
            ("n_scales", self.n_scales.map(|v| v.to_string())),
            ("n_interp", self.n_interp.map(|v| v.to_string())),
            ("scale_step", self.scale_step.map(|v| v.to_string())),
            ("t_r", self.t_r.map(|v| v.to_string())),
            ("t_a", self.t_a.map(|v| v.to_string())),
            ("response_factor", self.response_factor.map(|v| v.to_string())),
            ("quality_factor", self.quality_factor.map(|v| v.to_string())),
            ("quality", self.quality.clone()),
            ("update_interval", self.update_interval.map(|v| v.to_string())),
            ("rematch_interval", self.rematch_interval.map(|v| v.to_string())),
            ("enhance_t_l", self.enhance_t_l.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("override {item:?} is not KEY=VALUE"))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnhanceFlag {
    Auto,
    On,
    Off,
}

impl From<EnhanceFlag> for EnhanceMode {
    fn from(f: EnhanceFlag) -> Self {
        match f {
            EnhanceFlag::Auto => EnhanceMode::Auto,
            EnhanceFlag::On => EnhanceMode::On,
            EnhanceFlag::Off => EnhanceMode::Off,
        }
    }
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Sequence directory with img/ and optional groundtruth_rect.txt
    #[arg(long, value_name = "DIR")]
    seq: PathBuf,
    /// Initial box as 0-based x,y,w,h, or `gt` for the first ground-truth box
    #[arg(long, default_value = "gt")]
    init: String,
    /// Output file, one `frame,x,y,w,h` line per frame
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Low-light enhancement mode [default: auto]
    #[arg(long, value_enum)]
    enhance: Option<EnhanceFlag>,
    /// Per-frame confidence diagnostics
    #[arg(long, value_name = "FILE")]
    diag: Option<PathBuf>,
    #[command(flatten)]
    tunables: TunableArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeFlag {
    Ope,
    Tre,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory holding one sub-directory per sequence
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Protocol
    #[arg(long, value_enum, default_value = "ope")]
    mode: ModeFlag,
    /// Output directory for the summary table and curve files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Low-light enhancement mode [default: auto]
    #[arg(long, value_enum)]
    enhance: Option<EnhanceFlag>,
    #[command(flatten)]
    tunables: TunableArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    /// Gated exposure compensation
    Fast,
    /// Refined illumination map
    Lime,
    /// Dehazing on the inverted image
    Inverted,
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    /// Input image
    #[arg(long = "in", value_name = "IMG")]
    input: PathBuf,
    /// Output image
    #[arg(long, value_name = "IMG")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "fast")]
    method: Method,
    #[command(flatten)]
    tunables: TunableArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindFlag {
    Translate,
    Scale,
    Darken,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindFlag,
    /// Output sequence directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn parse_init(spec: &str, gt: Option<&[BoundingBox]>) -> Result<BoundingBox> {
    if spec.trim() == "gt" {
        return gt
            .and_then(|g| g.first().copied())
            .context("--init gt needs a groundtruth_rect.txt in the sequence");
    }
    let bb = BoundingBox::parse(spec).with_context(|| format!("malformed --init {spec:?}"))?;
    if !bb.is_valid() {
        bail!("malformed --init {spec:?}: width and height must be positive");
    }
    Ok(bb)
}

fn box_line(frame: usize, b: &BoundingBox) -> String {
    format!("{frame},{:.2},{:.2},{:.2},{:.2}\n", b.x, b.y, b.w, b.h)
}

const DIAG_HEADER: &str =
    "frame,r_max,apce,csrm,c_long,update_ok,redetect_needed,accept_candidate,enhanced,redetected,scale\n";

fn diag_line(frame: usize, r: &ConfidenceReport, scale: f64) -> String {
    format!(
        "{frame},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{:.6}\n",
        r.r_max,
        r.apce,
        r.csrm,
        r.c_long,
        u8::from(r.gates.update_ok),
        u8::from(r.gates.redetect_needed),
        u8::from(r.gates.accept_candidate),
        u8::from(r.enhanced),
        u8::from(r.redetected),
        scale
    )
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn track(args: &TrackArgs) -> Result<()> {
    let mut cfg = args.tunables.resolve()?;
    if let Some(mode) = args.enhance {
        cfg.enhance_mode = mode.into();
    }
    let seq = load_sequence(&args.seq, cfg.one_based)?;
    let init = parse_init(&args.init, seq.ground_truth.as_deref())?;
    let mut tracker = Tracker::init(&seq.frame(0)?, init, cfg)?;

    let mut boxes = box_line(1, &tracker.bbox());
    let mut diag = String::from(DIAG_HEADER);
    diag.push_str(&diag_line(1, tracker.last_report(), tracker.current_scale()));
    for k in 1..seq.len() {
        let (bb, report) = tracker.step(&seq.frame(k)?)?;
        boxes.push_str(&box_line(k + 1, &bb));
        diag.push_str(&diag_line(k + 1, &report, tracker.current_scale()));
    }
    write_file(&args.out, &boxes)?;
    if let Some(path) = &args.diag {
        write_file(path, &diag)?;
    }
    log::info!("tracked {} frames of {}", seq.len(), seq.name);
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let mut cfg = args.tunables.resolve()?;
    if let Some(mode) = args.enhance {
        cfg.enhance_mode = mode.into();
    }
    let mode = match args.mode {
        ModeFlag::Ope => EvalMode::Ope,
        ModeFlag::Tre => EvalMode::Tre,
    };
    let report = evaluate_dataset(&args.dataset, &cfg, mode)?;
    let written = report.write(&args.out)?;
    let mut out = report.summary_table()?;
    for path in written {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    print!("{out}");
    Ok(())
}

fn enhance(args: &EnhanceArgs) -> Result<()> {
    let cfg = args.tunables.resolve()?.enhance;
    let img = load_image(&args.input)?;
    let result = match args.method {
        Method::Fast => {
            if !should_enhance(&img, None, &cfg) {
                fs::copy(&args.input, &args.out)
                    .with_context(|| format!("copying to {}", args.out.display()))?;
                return Ok(());
            }
            fast_enhance(&img, None, &cfg)
        }
        Method::Lime => lime_enhance(&img, &cfg)?,
        Method::Inverted => recover_inverted(&img, &cfg)?,
    };
    save_image(&result, &args.out)?;
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let kind = match args.kind {
        KindFlag::Translate => SynthKind::Translate,
        KindFlag::Scale => SynthKind::Scale,
        KindFlag::Darken => SynthKind::Darken,
    };
    write_sequence(&generate(kind), &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Enhance(a) => enhance(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
