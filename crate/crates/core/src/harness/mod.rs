//! Experiment generation and evaluation: scene scripts, detector noise,
//! the exhaustive oracle, metrics and report export.

mod io;
mod metrics;
mod noise;
mod oracle;
mod scene;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{frame_stem, read_scene, write_scene, DumpedHypotheses, FrameDump, SceneDump};
pub use metrics::{
    fill_precision, pose_errors, report_export, summarize, FrameRecord, MetricsReport, MetricsRow, RepeatSummary, ReportFormat,
    Stat, Summary, CSV_HEADER,
};
pub use noise::{gen_hypotheses, object_seed, splitmix, NoiseModel};
pub use oracle::{exhaustive_oracle, ORACLE_GUARD};
pub use scene::{
    complex_structure, isolated_block, occlusion_scene, scattered, tower, SceneScript, ScriptFrame, ScriptObject, BASE_GAP, BLOCK,
    BLOCK_DENSITY,
};

use crate::geometry::{ModelDb, ObjectModel, Pose};
use crate::parser::{parse_frame, HypothesisSet, ParserParams, SceneEstimate};
use crate::sensor::{render_cloud, visibility, CameraModel, Placement, PointCloud};
use crate::{Error, ObjectId, Result};

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub script: SceneScript,
    pub camera: CameraModel,
    pub noise: NoiseModel,
    /// Detector hypotheses per object and frame.
    pub k: usize,
    pub engine: ParserParams,
    pub seed: u64,
    pub repeats: usize,
    /// Surface samples per model.
    pub surface_points: usize,
    /// Run repeats on parallel workers.
    pub parallel_repeats: bool,
}

/// Front-above view of the desk area around the origin.
pub fn default_camera() -> CameraModel {
    CameraModel::look_at(Point3::new(0.0, -0.5, 0.38), Point3::new(0.0, 0.0, 0.06), Vector3::z())
        .expect("fixed camera placement is valid")
        .with_noise(0.0005)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "complex".into(),
            script: complex_structure(4),
            camera: default_camera(),
            noise: NoiseModel::default(),
            k: 25,
            engine: ParserParams::default(),
            seed: 0,
            repeats: 1,
            surface_points: 200,
            parallel_repeats: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.repeats == 0 {
            return Err(Error::InvalidParameter("k and repeats must be at least 1".into()));
        }
        self.script.validate()?;
        self.camera.validate()?;
        self.noise.validate()?;
        self.engine.validate()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parser settings with the experiment camera.
    pub fn parser_params(&self) -> ParserParams {
        ParserParams { camera: Some(self.camera.clone()), ..self.engine.clone() }
    }

    pub fn models(&self) -> Result<ModelDb> {
        self.script.model_db(self.surface_points, 0)
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        splitmix(self.seed ^ splitmix(repeat as u64 + 1))
    }
}

/// Sensor input and detector output for one scripted frame.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub truth: Vec<(ObjectId, Arc<ObjectModel>, Pose)>,
    pub cloud: PointCloud,
    pub visibility: BTreeMap<ObjectId, f64>,
    pub hypotheses: HypothesisSet,
}

/// Renders the cloud of a scripted frame and draws detector hypotheses.
pub fn frame_input(config: &ExperimentConfig, models: &ModelDb, frame: usize, seed: u64) -> Result<FrameInput> {
    let spec = config.script.frames.get(frame).ok_or_else(|| Error::InvalidParameter(format!("no frame {frame}")))?;
    let mut truth = Vec::new();
    let mut scene = Vec::new();
    for o in &spec.objects {
        let model = models.get(&o.model)?.clone();
        truth.push((o.id.clone(), model.clone(), o.pose));
        scene.push(Placement { id: o.id.clone(), model, pose: o.pose });
    }
    let cloud = render_cloud(&scene, &config.camera, splitmix(seed ^ (2 * frame as u64)))?;
    let mut vis = BTreeMap::new();
    for o in &spec.objects {
        let v = if o.detect { visibility(&o.id, &scene, &config.camera)? } else { 0.0 };
        vis.insert(o.id.clone(), v);
    }
    let hypotheses = gen_hypotheses(&truth, &vis, &config.noise, config.k, splitmix(seed ^ (2 * frame as u64 + 1)))?;
    Ok(FrameInput { truth, cloud, visibility: vis, hypotheses })
}

struct RepeatResult {
    rows: Vec<MetricsRow>,
    estimates: Vec<Option<Pose>>,
    frames: Vec<FrameRecord>,
    wall_clock: Vec<f64>,
}

fn run_repeat(config: &ExperimentConfig, models: &ModelDb, params: &ParserParams, repeat: usize) -> Result<RepeatResult> {
    let seed = config.repeat_seed(repeat);
    let mut prev = SceneEstimate::empty();
    let mut out = RepeatResult { rows: Vec::new(), estimates: Vec::new(), frames: Vec::new(), wall_clock: Vec::new() };
    for frame in 0..config.script.frames.len() {
        let input = frame_input(config, models, frame, seed)?;
        let start = Instant::now();
        let est = parse_frame(&prev, &input.hypotheses, &input.cloud, params).map_err(|e| Error::Frame { frame, source: Box::new(e) })?;
        out.wall_clock.push(start.elapsed().as_secs_f64());
        out.frames.push(FrameRecord { repeat, frame, objects: input.truth.len(), k: config.k, sim_calls: est.sim_calls });
        for (id, _, truth) in &input.truth {
            let estimate = est.objects.get(id).map(|o| o.pose);
            let parsed = estimate.map(|p| pose_errors(&p, truth));
            let hyps = input.hypotheses.get(id).map(|e| e.hypotheses.as_slice()).unwrap_or(&[]);
            let induced = (!hyps.is_empty()).then(|| {
                let errs: Vec<(f64, f64)> = hyps.iter().map(|h| pose_errors(&h.pose, truth)).collect();
                let n = errs.len() as f64;
                (errs.iter().map(|e| e.0).sum::<f64>() / n, errs.iter().map(|e| e.1).sum::<f64>() / n)
            });
            let label = est.transitions.get(id).map_or_else(|| "Missing".to_string(), |l| l.to_string());
            out.rows.push(MetricsRow {
                repeat,
                frame,
                object: id.clone(),
                label,
                hypotheses: hyps.len(),
                trans_err_mm: parsed.map(|p| p.0),
                rot_err_deg: parsed.map(|p| p.1),
                induced_trans_mm: induced.map(|i| i.0),
                induced_rot_deg: induced.map(|i| i.1),
                precision_trans_mm: None,
                precision_rot_deg: None,
            });
            out.estimates.push(estimate);
        }
        prev = est;
    }
    Ok(out)
}

/// Runs every repeat of the scripted experiment and aggregates the metrics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let models = config.models()?;
    let params = config.parser_params();
    let results: Vec<Result<RepeatResult>> = if config.parallel_repeats {
        (0..config.repeats).into_par_iter().map(|r| run_repeat(config, &models, &params, r)).collect()
    } else {
        (0..config.repeats).map(|r| run_repeat(config, &models, &params, r)).collect()
    };
    let mut report = MetricsReport { name: config.name.clone(), seed: config.seed, ..MetricsReport::default() };
    let mut estimates = Vec::new();
    for r in results {
        let r = r?;
        report.rows.extend(r.rows);
        estimates.extend(r.estimates);
        report.frames.extend(r.frames);
        report.wall_clock.extend(r.wall_clock);
    }
    fill_precision(&mut report.rows, &estimates);
    report.summary = summarize(&report.rows, &report.frames);
    Ok(report)
}
