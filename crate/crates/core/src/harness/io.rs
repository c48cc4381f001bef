use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{frame_input, ExperimentConfig, ScriptObject};
use crate::geometry::{ModelDb, Pose};
use crate::parser::{HypothesisSet, HypothesisSource};
use crate::sensor::PointCloud;
use crate::{Error, ObjectId, Result};

const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpedHypotheses {
    pub model: String,
    pub poses: Vec<Pose>,
}

/// Ground truth and detector output of one frame, stored next to its cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDump {
    pub frame: usize,
    pub truth: Vec<ScriptObject>,
    pub visibility: BTreeMap<ObjectId, f64>,
    pub hypotheses: BTreeMap<ObjectId, DumpedHypotheses>,
}

impl FrameDump {
    pub fn hypothesis_set(&self, models: &ModelDb) -> Result<HypothesisSet> {
        let mut set = HypothesisSet::new();
        for (id, h) in &self.hypotheses {
            let model = models.get(&h.model)?;
            for pose in &h.poses {
                set.insert(id.clone(), model.clone(), *pose, HypothesisSource::Detector);
            }
        }
        Ok(set)
    }
}

pub fn frame_stem(frame: usize) -> String {
    format!("frame_{frame:04}")
}

/// Writes `config.json` plus `frame_NNNN.json` and `frame_NNNN.xyz` (labeled
/// cloud) for every scripted frame of one repeat.
pub fn write_scene(config: &ExperimentConfig, repeat: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    let models = config.models()?;
    let seed = config.repeat_seed(repeat);
    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, config.to_json())?;
    let mut written = vec![config_path];
    for (frame, spec) in config.script.frames.iter().enumerate() {
        let input = frame_input(config, &models, frame, seed)?;
        let hypotheses = input
            .hypotheses
            .objects
            .iter()
            .map(|(id, e)| {
                let dumped = DumpedHypotheses { model: e.model.name().to_string(), poses: e.hypotheses.iter().map(|h| h.pose).collect() };
                (id.clone(), dumped)
            })
            .collect();
        let dump = FrameDump { frame, truth: spec.objects.clone(), visibility: input.visibility, hypotheses };
        let json = dir.join(format!("{}.json", frame_stem(frame)));
        fs::write(&json, serde_json::to_string_pretty(&dump)?)?;
        let xyz = dir.join(format!("{}.xyz", frame_stem(frame)));
        input.cloud.save(&xyz)?;
        written.extend([json, xyz]);
    }
    Ok(written)
}

/// A directory written by [`write_scene`].
#[derive(Debug, Clone)]
pub struct SceneDump {
    pub config: ExperimentConfig,
    pub models: ModelDb,
    pub frames: Vec<(FrameDump, PointCloud)>,
}

pub fn read_scene(dir: &Path) -> Result<SceneDump> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let models = config.models()?;
    let mut frames = Vec::new();
    for frame in 0.. {
        let json = dir.join(format!("{}.json", frame_stem(frame)));
        if !json.exists() {
            break;
        }
        let dump: FrameDump = serde_json::from_str(&fs::read_to_string(&json)?)?;
        let cloud = PointCloud::load(&dir.join(format!("{}.xyz", frame_stem(frame))))?;
        frames.push((dump, cloud.unlabeled()));
    }
    if frames.is_empty() {
        return Err(Error::InvalidParameter(format!("no frame dumps in {}", dir.display())));
    }
    Ok(SceneDump { config, models, frames })
}
