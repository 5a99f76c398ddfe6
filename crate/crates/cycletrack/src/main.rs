use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cycletrack::commands::{self, AnalyzeInputs, TrackInputs};
use cycletrack::{AppResult, BackwardKind, Overrides, RunConfig};
use cycletrack_core::FusionMode;

#[derive(Parser)]
#[command(name = "cycletrack", version, about = "Bidirectional cell tracking and counting for capillary flow video")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario seed; also restricts a pipeline run to this one seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// cycle, ct_only or sort_only.
    #[arg(long, global = true, value_parser = parse_mode)]
    fusion_mode: Option<FusionMode>,
    /// Backward displacement source: oracle, ncc or sidecar.
    #[arg(long, global = true, value_parser = parse_backward)]
    backward: Option<BackwardKind>,
    /// Frame rate in Hz.
    #[arg(long, global = true)]
    fps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario and its detection files.
    Simulate {
        /// Also render frames.bin for the ncc backward source.
        #[arg(long)]
        frames: bool,
    },
    /// Track a detection file.
    Track {
        /// MOT detection file.
        #[arg(long)]
        det: PathBuf,
        /// Defaults to truth.json next to the detection file.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Defaults to disp.csv next to the detection file.
        #[arg(long)]
        disp: Option<PathBuf>,
        /// Defaults to frames.bin next to the detection file.
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// Score a hypothesis file against ground truth.
    Evaluate {
        /// MOT ground-truth file.
        #[arg(long)]
        gt: PathBuf,
        /// MOT hypothesis file.
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Velocity spectrum, counting error and count correlation.
    Analyze {
        /// Velocity CSV as written by track.
        #[arg(long)]
        velocity: PathBuf,
        /// frame,gt,hyp cumulative counts as written by evaluate.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// hyp,gt final counts, one row per video.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Run every stage for each configured seed and aggregate.
    Pipeline {
        /// Run all three fusion modes.
        #[arg(long)]
        ablation: bool,
    },
}

fn parse_mode(s: &str) -> Result<FusionMode, String> {
    s.parse().map_err(|e: cycletrack_core::Error| e.to_string())
}

fn parse_backward(s: &str) -> Result<BackwardKind, String> {
    s.parse()
}

fn execute(cli: Cli) -> AppResult<()> {
    let common = cli.common;
    let overrides = Overrides {
        out: common.out,
        seed: common.seed,
        fusion_mode: common.fusion_mode,
        backward: common.backward,
        fps: common.fps,
    };
    let mut cfg = RunConfig::load(common.config.as_deref(), &overrides)?;
    let out = cfg.out_dir();
    match cli.command {
        Command::Simulate { frames } => {
            cfg.write_frames |= frames;
            let m = commands::simulate(&cfg, &out)?;
            println!("wrote {} files for seed {} to {}", m.files.len(), cfg.scenario.seed, out.display());
        }
        Command::Track { det, truth, disp, frames } => {
            let r = commands::track(&cfg, &TrackInputs { det, truth, disp, frames }, &out)?;
            println!("{} cells, {} tracklets over {} frames ({})", r.count, r.tracklets_created, r.frames, r.mode.as_str());
        }
        Command::Evaluate { gt, hyp } => {
            let m = commands::evaluate(&cfg, &gt, &hyp, &out)?;
            println!("MOTA {:.2}  IDF1 {:.2}  IDSw {}  Frag {}", m.mota, m.idf1, m.idsw, m.frag);
        }
        Command::Analyze { velocity, counts, pairs } => {
            let a = commands::analyze(&cfg, &AnalyzeInputs { velocity, counts, pairs }, &out)?;
            match a.dominant_freq {
                Some(f) => println!("dominant frequency {f:.3} Hz"),
                None => println!("no dominant frequency: {}", a.dominant_freq_error.unwrap_or_default()),
            }
        }
        Command::Pipeline { ablation } => {
            cfg.ablation |= ablation;
            let agg = commands::pipeline(&cfg, &out)?;
            for b in &agg.blocks {
                println!(
                    "{:<9} counting accuracy {:.2} ± {:.2}%  MOTA {:.2}  IDSw {:.1}",
                    b.mode.as_str(),
                    b.counting_accuracy_pct.mean,
                    b.counting_accuracy_pct.std,
                    b.mota.mean,
                    b.idsw.mean
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
