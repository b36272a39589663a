use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaanet::autoanchor::FitnessKind;
use gaanet::commands::{self, AnchorsOptions, InferOptions};
use gaanet::pnm::write_pnm;
use gaanet::{Error, NetConfig};

#[derive(Parser)]
#[command(name = "gaanet", version, about = "Ghost-convolution small-object detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Network config; the built-in one when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated class names overriding the config's.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fitness {
    Ratio,
    Ciou,
}

#[derive(Subcommand)]
enum Command {
    /// Compute anchors from a YOLO label tree.
    Anchors {
        /// Dataset root holding `labels/` (or `*/labels/`).
        labels: PathBuf,
        #[arg(long, default_value_t = 12)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        generations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = commands::DEFAULT_IMG_SIZE)]
        img_size: usize,
        #[arg(long, default_value_t = gaanet::autoanchor::DEFAULT_THRESHOLD)]
        thr: f64,
        #[arg(long, value_enum, default_value_t = Fitness::Ratio)]
        fitness: Fitness,
        /// Fail when any label row is rejected.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect objects in PNM images.
    Infer {
        #[command(flatten)]
        shared: Shared,
        /// GAAW archive; seeded random weights when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        img_size: Option<usize>,
        #[arg(long, default_value_t = commands::DEFAULT_CONF)]
        conf: f64,
        #[arg(long, default_value_t = commands::DEFAULT_IOU)]
        iou: f64,
        /// Predictions file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for annotated copies of each image.
        #[arg(long)]
        overlay_dir: Option<PathBuf>,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Score a predictions file against a label tree.
    Eval {
        #[command(flatten)]
        shared: Shared,
        predictions: PathBuf,
        labels: PathBuf,
        /// Also write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer parameter counts.
    Params {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer FLOP counts.
    Flops {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        img_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw detections from a predictions file onto an image.
    Render {
        #[command(flatten)]
        shared: Shared,
        image: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(shared: &Shared) -> Result<NetConfig, Error> {
    let cfg = commands::load_config(shared.config.as_deref())?;
    let cfg = match &shared.names {
        Some(names) => cfg.with_classes(names.clone()),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Anchors {
            labels,
            k,
            generations,
            seed,
            img_size,
            thr,
            fitness,
            strict,
            json,
            out,
        } => {
            let opts = AnchorsOptions {
                k,
                generations,
                seed,
                img_size,
                threshold: thr,
                fitness: match fitness {
                    Fitness::Ratio => FitnessKind::Ratio,
                    Fitness::Ciou => FitnessKind::Ciou,
                },
                ..AnchorsOptions::new(labels)
            };
            let outcome = commands::run_anchors(&opts)?;
            for d in outcome.diagnostics() {
                eprintln!("warning: {d}");
            }
            if strict && !outcome.labels.rejected.is_empty() {
                return Err(Error::Labels(format!(
                    "{} label rows rejected",
                    outcome.labels.rejected.len()
                )));
            }
            let text = if json {
                serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n"
            } else {
                outcome.report.to_text()
            };
            emit(&text, out.as_deref())
        }
        Command::Infer {
            shared,
            weights,
            seed,
            img_size,
            conf,
            iou,
            out,
            overlay_dir,
            images,
        } => {
            let opts = InferOptions {
                weights,
                seed,
                img_size,
                conf,
                iou,
                overlay_dir,
                ..InferOptions::new(config(&shared)?, images)
            };
            let outcome = commands::run_infer(&opts)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for t in &outcome.timings {
                eprintln!("{}: {} detections in {:.1} ms", t.image_id, t.detections, t.millis);
            }
            emit(&outcome.predictions(), out.as_deref())
        }
        Command::Eval {
            shared,
            predictions,
            labels,
            json,
            out,
        } => {
            let cfg = config(&shared)?;
            let outcome = commands::run_eval(&predictions, &labels, &cfg.class_names)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = json {
                emit(&outcome.report.to_json(), Some(&p))?;
            }
            emit(&outcome.report.to_table(), out.as_deref())
        }
        Command::Params { shared, out } => emit(&commands::run_params(&config(&shared)?)?, out.as_deref()),
        Command::Flops { shared, img_size, out } => {
            let cfg = config(&shared)?;
            let size = img_size.unwrap_or(cfg.input_size);
            emit(&commands::run_flops(&cfg, size)?, out.as_deref())
        }
        Command::Render {
            shared,
            image,
            predictions,
            out,
        } => {
            let cfg = config(&shared)?;
            let rendered = commands::run_render(&image, &predictions, &cfg.class_names)?;
            for w in &rendered.warnings {
                eprintln!("warning: {w}");
            }
            write_pnm(&rendered.image, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("GAANET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
