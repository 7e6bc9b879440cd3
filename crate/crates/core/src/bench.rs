//! Seeded episode runners over the toy suite, and CSV output.
//!
//! Episodes of one setting run on a worker pool; results are collected in
//! episode order, so the written CSVs do not depend on scheduling.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AblationAxis, RunConfig};
use crate::error::{AtaError, Result};
use crate::scheduler::{
    aggregate_metrics, guidance_schedule, run_episode_observed, BlurMode, EpisodeMetrics, EpisodeSpec, FrameRecord,
    GuidanceConfig, GuidanceKind,
};
use crate::toy::{generate_scene, generate_suite, policy_for, SceneSpec, ToyEnv};

/// A named guidance configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub name: String,
    pub guidance: GuidanceConfig,
}

impl Setting {
    pub fn new(name: impl Into<String>, guidance: GuidanceConfig) -> Self {
        Self {
            name: name.into(),
            guidance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub setting: String,
    pub episode: usize,
    pub seed: u64,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow<'a> {
    pub setting: &'a str,
    pub episode: usize,
    pub seed: u64,
    pub success: bool,
    pub policy_calls: usize,
    pub env_steps: usize,
    pub guided_attention: usize,
    pub guided_action: usize,
    pub aborted: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub setting: String,
    pub episodes: usize,
    pub successes: usize,
    pub avg_sr: f64,
    pub avg_sic: Option<f64>,
    pub avg_ic: f64,
    /// Attention triggers the schedule allows within the step budget.
    pub attention_triggers: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub episodes: Vec<EpisodeRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs one episode of the toy task on `scene`.
pub fn run_scene(
    cfg: &RunConfig,
    scene: &SceneSpec,
    guidance: &GuidanceConfig,
    seed: u64,
    on_frame: &mut dyn FnMut(FrameRecord<'_>),
) -> Result<EpisodeMetrics> {
    let mut policy = policy_for(scene, &cfg.policy)?;
    let mut env = ToyEnv::new(scene.clone(), cfg.env)?;
    let episode = EpisodeSpec {
        instruction: scene.instruction(),
        seed,
    };
    Ok(run_episode_observed(&mut policy, &mut env, guidance, &episode, on_frame))
}

/// Every scene of the suite under one setting, in episode order.
pub fn run_setting(cfg: &RunConfig, scenes: &[SceneSpec], setting: &Setting) -> Result<Vec<EpisodeRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| AtaError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<EpisodeMetrics>> = pool.install(|| {
        scenes
            .par_iter()
            .map(|scene| run_scene(cfg, scene, &setting.guidance, scene.seed, &mut |_| {}))
            .collect()
    });
    scenes
        .iter()
        .zip(results)
        .enumerate()
        .map(|(episode, (scene, metrics))| {
            Ok(EpisodeRecord {
                setting: setting.name.clone(),
                episode,
                seed: scene.seed,
                metrics: metrics?,
            })
        })
        .collect()
}

pub fn summarize(setting: &Setting, records: &[EpisodeRecord]) -> Result<SummaryRow> {
    let metrics: Vec<EpisodeMetrics> = records.iter().map(|r| r.metrics.clone()).collect();
    let s = aggregate_metrics(&metrics)?;
    let attention_triggers = guidance_schedule(&setting.guidance, setting.guidance.max_steps)
        .iter()
        .filter(|(_, kind)| *kind == GuidanceKind::Attention)
        .count();
    Ok(SummaryRow {
        setting: setting.name.clone(),
        episodes: s.episodes,
        successes: s.successes,
        avg_sr: s.avg_sr,
        avg_sic: s.avg_sic,
        avg_ic: s.avg_ic,
        attention_triggers,
    })
}

/// Runs every setting on the configured suite.
pub fn run_settings(cfg: &RunConfig, settings: &[Setting]) -> Result<Report> {
    let scenes = generate_suite(&cfg.suite, cfg.run.seed, cfg.run.episodes)?;
    let mut report = Report::default();
    for setting in settings {
        let records = run_setting(cfg, &scenes, setting)?;
        report.summary.push(summarize(setting, &records)?);
        report.episodes.extend(records);
    }
    Ok(report)
}

/// Settings of `bench`: optionally the unguided policy, then the configured guidance.
pub fn bench_settings(cfg: &RunConfig) -> Vec<Setting> {
    let guided = cfg.effective_guidance();
    let mut out = Vec::new();
    if cfg.run.baseline {
        out.push(Setting::new("baseline", baseline(&guided)));
    }
    out.push(Setting::new("guided", guided));
    out
}

pub fn ablation_settings(cfg: &RunConfig, axis: AblationAxis) -> Vec<Setting> {
    let g = cfg.effective_guidance();
    let base = baseline(&g);
    let attention_only = |freq| GuidanceConfig {
        freq,
        attention_guidance_enabled: true,
        action_guidance_enabled: false,
        ..base
    };
    match axis {
        AblationAxis::Freq => cfg
            .ablate
            .freqs
            .iter()
            .map(|&freq| {
                Setting::new(
                    format!("freq_{freq}"),
                    GuidanceConfig {
                        freq,
                        attention_guidance_enabled: true,
                        ..g
                    },
                )
            })
            .collect(),
        AblationAxis::Blur => {
            let blurred = |mode| GuidanceConfig {
                blur: crate::scheduler::BlurAblation { mode, ..g.blur },
                ..base
            };
            vec![
                Setting::new("baseline", base),
                Setting::new("blur_first", blurred(BlurMode::FirstFrame)),
                Setting::new("blur_random", blurred(BlurMode::RandomFrames)),
                Setting::new("attn_first", attention_only(0)),
            ]
        }
        AblationAxis::Strategy => vec![
            Setting::new("baseline", base),
            Setting::new("attn", attention_only(g.freq)),
            Setting::new(
                "act",
                GuidanceConfig {
                    action_guidance_enabled: true,
                    ..base
                },
            ),
            Setting::new(
                "ata",
                GuidanceConfig {
                    attention_guidance_enabled: true,
                    action_guidance_enabled: true,
                    ..base
                },
            ),
        ],
    }
}

/// `g` with guidance and blur switched off.
fn baseline(g: &GuidanceConfig) -> GuidanceConfig {
    GuidanceConfig {
        attention_guidance_enabled: false,
        action_guidance_enabled: false,
        blur: crate::scheduler::BlurAblation {
            mode: BlurMode::None,
            ..g.blur
        },
        ..*g
    }
}

/// Scene used by `run`: the configured one or the suite scene at `run.seed`.
pub fn single_scene(cfg: &RunConfig) -> Result<SceneSpec> {
    match &cfg.scene {
        Some(scene) => Ok(scene.clone()),
        None => generate_scene(&cfg.suite, cfg.run.seed),
    }
}

/// One episode; with `frames_dir` every policy input is saved as
/// `step_NNNN.png`.
pub fn run_single(cfg: &RunConfig, frames_dir: Option<&Path>) -> Result<Report> {
    let scene = single_scene(cfg)?;
    let setting = Setting::new("run", cfg.effective_guidance());
    let mut write_err = None;
    if let Some(dir) = frames_dir {
        std::fs::create_dir_all(dir)?;
    }
    let metrics = run_scene(cfg, &scene, &setting.guidance, cfg.run.seed, &mut |frame| {
        if let (Some(dir), None) = (frames_dir, &write_err) {
            let path = dir.join(format!("step_{:04}.png", frame.step));
            if let Err(e) = frame.image.save(&path) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let records = vec![EpisodeRecord {
        setting: setting.name.clone(),
        episode: 0,
        seed: cfg.run.seed,
        metrics,
    }];
    Ok(Report {
        summary: vec![summarize(&setting, &records)?],
        episodes: records,
    })
}

pub fn write_episodes_csv(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        let m = &r.metrics;
        w.serialize(EpisodeRow {
            setting: &r.setting,
            episode: r.episode,
            seed: r.seed,
            success: m.success,
            policy_calls: m.policy_calls,
            env_steps: m.env_steps,
            guided_attention: m.guided_count(GuidanceKind::Attention),
            guided_action: m.guided_count(GuidanceKind::Action),
            aborted: m.aborted.as_deref().unwrap_or(""),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `metrics.csv` and `summary.csv` under `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_episodes_csv(&dir.join("metrics.csv"), &report.episodes)?;
    write_summary_csv(&dir.join("summary.csv"), &report.summary)
}

fn csv_err(e: csv::Error) -> AtaError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AtaError::Io(io),
        other => AtaError::Config(format!("csv: {other:?}")),
    }
}
