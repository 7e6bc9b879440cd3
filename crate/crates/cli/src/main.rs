use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ata_core::bench::{ablation_settings, bench_settings, run_settings, run_single, write_report};
use ata_core::compositor::{blend, heatmap_overlay, red_overlay, Image};
use ata_core::config::{AblationAxis, Overrides, RunConfig};
use ata_core::mask::PixelMask;
use ata_core::roi::EefPose;
use ata_core::scheduler::{action_mask, attention_mask};
use ata_core::toy::{default_camera, EEF_START};
use ata_core::{atn1, AtaError};

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_CONTRACT: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "ata", version, about = "Attention- and action-guided observation masking")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    shared: Shared,
}

/// Flags accepted by every subcommand. Each one overrides a config key.
#[derive(Args, Debug, Clone, Default)]
struct Shared {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory [run.out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base seed [run.seed].
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Attention trigger period, 0 for the first step only [guidance.freq].
    #[arg(long, global = true, value_name = "N")]
    freq: Option<usize>,

    /// Step of action guidance [guidance.i_act].
    #[arg(long = "i-act", global = true, value_name = "N")]
    i_act: Option<usize>,

    /// Opening angle of the action cone, degrees [guidance.roi.alpha].
    #[arg(long, global = true, value_name = "DEG")]
    alpha: Option<f64>,

    /// Length of the projected tool ray, meters [guidance.roi.z_depth].
    #[arg(long = "z-depth", global = true, value_name = "M")]
    z_depth: Option<f64>,

    /// Background gray level [guidance.bg].
    #[arg(long, global = true, value_name = "0..255")]
    bg: Option<u8>,

    /// Save every policy input frame [run.dump_frames].
    #[arg(long = "dump-frames", global = true)]
    dump_frames: bool,

    /// Also write a heatmap composite [run.overlay].
    #[arg(long, global = true)]
    overlay: bool,
}

impl Shared {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            freq: self.freq,
            i_act: self.i_act,
            alpha: self.alpha,
            z_depth: self.z_depth,
            bg: self.bg,
            dump_frames: self.dump_frames,
            overlay: self.overlay,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Attention mask from an ATN1 dump, blended into an image.
    MaskAttn {
        /// ATN1 attention dump.
        attention: PathBuf,
        /// RGB image to mask.
        image: PathBuf,
    },
    /// Conic action mask from the configured camera and pose.
    MaskAct {
        /// RGB image to mask.
        image: PathBuf,
    },
    /// Blend an image with an 8-bit mask.
    Blend {
        image: PathBuf,
        /// Grayscale mask, 255 keeps the pixel.
        mask: PathBuf,
    },
    /// One toy episode.
    Run,
    /// Seeded toy episodes, unguided and guided.
    Bench,
    /// Sweep one guidance axis over the toy suite.
    Ablate {
        /// freq, blur or strategy [ablate.axis].
        #[arg(long)]
        axis: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ATA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ata: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &AtaError) -> u8 {
    match e {
        AtaError::Config(_) => EXIT_USAGE,
        AtaError::Format { .. } | AtaError::Image(_) => EXIT_FORMAT,
        AtaError::Structural(_)
        | AtaError::Numeric(_)
        | AtaError::Contract(_)
        | AtaError::BehindCamera { .. }
        | AtaError::DegenerateRay { .. } => EXIT_CONTRACT,
        AtaError::Io(_) => EXIT_IO,
    }
}

fn load_config(shared: &Shared) -> Result<RunConfig, AtaError> {
    let mut cfg = match &shared.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&shared.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), AtaError> {
    let cfg = load_config(&cli.shared)?;
    let out = cfg.run.out.clone();
    match &cli.command {
        Command::MaskAttn { attention, image } => {
            let t = atn1::read(attention)?;
            let img = load_rgb(image)?;
            let mask = attention_mask(&t, img.width(), img.height())?;
            write_masked(&out, &img, &mask, &cfg, heatmap_overlay)
        }
        Command::MaskAct { image } => {
            let img = load_rgb(image)?;
            let camera = match &cfg.camera {
                Some(c) => c.clone(),
                None => {
                    log::info!("no camera configured, using the toy camera");
                    default_camera(img.width(), img.height())?
                }
            };
            if (camera.width, camera.height) != img.dimensions() {
                return Err(AtaError::Structural(format!(
                    "camera is {}x{} but the image is {}x{}",
                    camera.width,
                    camera.height,
                    img.width(),
                    img.height()
                )));
            }
            let pose = cfg.pose.unwrap_or_else(|| EefPose::at(EEF_START));
            pose.validate()?;
            let mask = action_mask(&camera, &pose, &cfg.guidance.roi, img.width(), img.height())?;
            write_masked(&out, &img, &mask, &cfg, red_overlay)
        }
        Command::Blend { image, mask } => {
            let img = load_rgb(image)?;
            let mask = PixelMask::from_luma8(&image::open(mask)?.to_luma8())?;
            std::fs::create_dir_all(&out)?;
            blend(&img, &mask, cfg.guidance.bg)?.save(out.join("blended.png"))?;
            Ok(())
        }
        Command::Run => {
            let frames = cfg.run.dump_frames.then(|| out.join("frames"));
            let report = run_single(&cfg, frames.as_deref())?;
            write_report(&out, &report)?;
            print_summary(&report.summary);
            Ok(())
        }
        Command::Bench => {
            let report = run_settings(&cfg, &bench_settings(&cfg))?;
            write_report(&out, &report)?;
            print_summary(&report.summary);
            Ok(())
        }
        Command::Ablate { axis } => {
            let axis = match axis {
                Some(name) => name.parse::<AblationAxis>()?,
                None => cfg.ablate.axis,
            };
            let report = run_settings(&cfg, &ablation_settings(&cfg, axis))?;
            write_report(&out, &report)?;
            print_summary(&report.summary);
            Ok(())
        }
    }
}

fn load_rgb(path: &Path) -> Result<Image, AtaError> {
    Ok(image::open(path)?.to_rgb8())
}

type Overlay = fn(&Image, &PixelMask) -> Result<Image, AtaError>;

fn write_masked(out: &Path, img: &Image, mask: &PixelMask, cfg: &RunConfig, overlay: Overlay) -> Result<(), AtaError> {
    std::fs::create_dir_all(out)?;
    mask.to_luma8().save(out.join("mask.png"))?;
    blend(img, mask, cfg.guidance.bg)?.save(out.join("blended.png"))?;
    if cfg.run.overlay {
        overlay(img, mask)?.save(out.join("overlay.png"))?;
    }
    Ok(())
}

fn print_summary(rows: &[ata_core::bench::SummaryRow]) {
    for r in rows {
        let sic = r.avg_sic.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:<12} episodes={:<4} sr={:.3} sic={} ic={:.2}",
            r.setting, r.episodes, r.avg_sr, sic, r.avg_ic
        );
    }
}
