use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{ModelDb, ModelSpec, Pose};
use crate::{Error, ObjectId, Result};

/// Side of the 2-inch blocks used by the built-in scenes (m).
pub const BLOCK: f64 = 0.0508;
/// Density of the built-in blocks (kg/m³).
pub const BLOCK_DENSITY: f64 = 500.0;
/// Gap between neighbouring base blocks in the complex structure (m).
pub const BASE_GAP: f64 = 0.005;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptObject {
    pub id: ObjectId,
    pub model: String,
    pub pose: Pose,
    /// When false the detector reports nothing for this object.
    #[serde(default = "default_true")]
    pub detect: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptFrame {
    pub objects: Vec<ScriptObject>,
}

/// Declarative scene: model library plus the ground truth of every frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub models: Vec<ModelSpec>,
    pub frames: Vec<ScriptFrame>,
}

impl SceneScript {
    pub fn validate(&self) -> Result<()> {
        let names: BTreeSet<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        for (f, frame) in self.frames.iter().enumerate() {
            let mut ids = BTreeSet::new();
            for o in &frame.objects {
                if !names.contains(o.model.as_str()) {
                    return Err(Error::UnknownModel(o.model.clone()));
                }
                if o.id.is_ground() || !ids.insert(&o.id) {
                    return Err(Error::Frame { frame: f, source: Box::new(Error::DuplicateObject(o.id.clone())) });
                }
                if !o.pose.is_finite() {
                    return Err(Error::Frame { frame: f, source: Box::new(Error::NonFinite(o.id.clone())) });
                }
            }
        }
        Ok(())
    }

    pub fn model_db(&self, surface_points: usize, seed: u64) -> Result<ModelDb> {
        ModelDb::from_specs(&self.models, surface_points, seed)
    }

    /// Repeats each stage `frames_per_stage` times.
    pub fn from_stages(models: Vec<ModelSpec>, stages: &[Vec<ScriptObject>], frames_per_stage: usize) -> Self {
        let frames = stages
            .iter()
            .flat_map(|s| std::iter::repeat_n(ScriptFrame { objects: s.clone() }, frames_per_stage))
            .collect();
        SceneScript { models, frames }
    }
}

fn block_model() -> ModelSpec {
    ModelSpec::cuboid("block", [BLOCK; 3], BLOCK_DENSITY)
}

fn block(id: &str, x: f64, y: f64, level: usize) -> ScriptObject {
    ScriptObject {
        id: ObjectId::new(id),
        model: "block".into(),
        pose: Pose::from_translation(x, y, BLOCK / 2.0 + level as f64 * BLOCK),
        detect: true,
    }
}

/// Eight-block structure built in three stages: a base row of four, three
/// blocks bridging the base gaps, and one block on top.
pub fn complex_structure(frames_per_stage: usize) -> SceneScript {
    let pitch = BLOCK + BASE_GAP;
    let base: Vec<ScriptObject> = (0..4).map(|i| block(&format!("b{i}"), (i as f64 - 1.5) * pitch, 0.0, 0)).collect();
    let bridge: Vec<ScriptObject> = (0..3).map(|i| block(&format!("m{i}"), (i as f64 - 1.0) * pitch, 0.0, 1)).collect();
    let top = vec![block("t0", 0.0, 0.0, 2)];
    let s1 = base.clone();
    let s2 = [base.clone(), bridge.clone()].concat();
    let s3 = [base, bridge, top].concat();
    SceneScript::from_stages(vec![block_model()], &[s1, s2, s3], frames_per_stage)
}

/// A single block resting on the ground, rotated about the vertical.
pub fn isolated_block(frames: usize, yaw: f64) -> SceneScript {
    let mut b = block("b0", 0.0, 0.0, 0);
    b.pose = Pose::from_axis_angle(nalgebra::Vector3::z(), yaw).with_translation(b.pose.translation);
    SceneScript::from_stages(vec![block_model()], &[vec![b]], frames)
}

/// Three-block tower plus a side block; the side block is then occluded by a
/// wall placed between it and the camera.
pub fn occlusion_scene(frames_per_stage: usize) -> SceneScript {
    let tower = vec![block("a", 0.0, 0.0, 0), block("b", 0.0, 0.0, 1), block("c", 0.0, 0.0, 2)];
    let hidden = block("h", 0.1, 0.1, 0);
    let s1 = [tower.clone(), vec![hidden.clone()]].concat();
    let mut s2 = s1.clone();
    s2.push(ScriptObject { id: ObjectId::new("w"), model: "wall".into(), pose: Pose::from_translation(0.0, 0.05, 0.06), detect: true });
    let models = vec![block_model(), ModelSpec::cuboid("wall", [0.3, 0.02, 0.12], BLOCK_DENSITY)];
    SceneScript::from_stages(models, &[s1, s2], frames_per_stage)
}

/// A stack of `n` blocks on the ground.
pub fn tower(n: usize, frames: usize) -> SceneScript {
    let objs = (0..n).map(|i| block(&format!("s{i}"), 0.0, 0.0, i)).collect::<Vec<_>>();
    SceneScript::from_stages(vec![block_model()], &[objs], frames)
}

/// `n` blocks spaced along x so that none touch.
pub fn scattered(n: usize, frames: usize) -> SceneScript {
    let objs = (0..n).map(|i| block(&format!("o{i}"), i as f64 * 2.5 * BLOCK, 0.0, 0)).collect::<Vec<_>>();
    SceneScript::from_stages(vec![block_model()], &[objs], frames)
}
