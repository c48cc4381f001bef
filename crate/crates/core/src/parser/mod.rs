//! Sequential scene parsing: layered hypothesis evaluation, simulation-based
//! hypothesis repair and the persistent scene estimate carried across frames.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{ConsistencyParams, ObjectScore, SceneScore};
use crate::geometry::{ObjectModel, Pose};
use crate::physics::{simulate_world, GuidingForceParams, SimContext, SolverParams, World};
use crate::sensor::{visibility_mask, CameraModel, CloudIndex, Placement, PointCloud};
use crate::supportgraph::{
    classify_transitions, occupies_volume, vertices_by_distance, SupportGraph, TransitionLabel, TransitionMode,
    TransitionThresholds, VisibilityEvidence,
};
use crate::{Error, ObjectId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisSource {
    Detector,
    PreviousFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub pose: Pose,
    pub source: HypothesisSource,
}

#[derive(Debug, Clone)]
pub struct ObjectHypotheses {
    pub model: Arc<ObjectModel>,
    pub hypotheses: Vec<Hypothesis>,
}

/// Candidate poses per object, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct HypothesisSet {
    pub objects: BTreeMap<ObjectId, ObjectHypotheses>,
}

impl HypothesisSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: ObjectId, model: Arc<ObjectModel>, pose: Pose, source: HypothesisSource) {
        self.objects
            .entry(id)
            .or_insert_with(|| ObjectHypotheses { model, hypotheses: Vec::new() })
            .hypotheses
            .push(Hypothesis { pose, source });
    }

    pub fn get(&self, id: &ObjectId) -> Option<&ObjectHypotheses> {
        self.objects.get(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn total(&self) -> usize {
        self.objects.values().map(|o| o.hypotheses.len()).sum()
    }

    pub fn max_k(&self) -> usize {
        self.objects.values().map(|o| o.hypotheses.len()).max().unwrap_or(0)
    }

    /// Number of full configurations an exhaustive search would simulate.
    pub fn search_size(&self) -> u128 {
        self.objects.values().map(|o| o.hypotheses.len() as u128).product()
    }
}

/// Settings for a parse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserParams {
    /// Simulation window per hypothesis (s).
    pub window: f64,
    pub solver: SolverParams,
    pub guiding: GuidingForceParams,
    pub consistency: ConsistencyParams,
    pub thresholds: TransitionThresholds,
    pub camera: Option<CameraModel>,
    /// Simulate the hypotheses of one object on parallel workers.
    pub parallel: bool,
}

impl Default for ParserParams {
    fn default() -> Self {
        ParserParams {
            window: 0.4,
            solver: SolverParams::default(),
            guiding: GuidingForceParams::default(),
            consistency: ConsistencyParams::default(),
            thresholds: TransitionThresholds::default(),
            camera: None,
            parallel: true,
        }
    }
}

impl ParserParams {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.guiding.validate()?;
        self.consistency.validate()?;
        if !(self.window >= self.solver.dt) {
            return Err(Error::InvalidParameter(format!("window {} shorter than dt {}", self.window, self.solver.dt)));
        }
        if let Some(c) = &self.camera {
            c.validate()?;
        }
        Ok(())
    }

    pub fn context<'a>(&'a self, index: &'a CloudIndex, counter: Option<&'a AtomicUsize>) -> SimContext<'a> {
        SimContext {
            window: self.window,
            dt: self.solver.dt,
            cloud: index,
            guiding: self.guiding,
            consistency: self.consistency,
            camera: self.camera.as_ref(),
            counter,
        }
    }

    pub fn empty_world(&self) -> World {
        World::new(self.solver)
    }
}

#[derive(Debug, Clone)]
pub struct EstimatedObject {
    pub model: Arc<ObjectModel>,
    /// Settled pose after simulation.
    pub pose: Pose,
    pub label: TransitionLabel,
    pub score: Option<ObjectScore>,
}

/// Parsed scene for one frame; the prior for the next.
#[derive(Debug, Clone, Default)]
pub struct SceneEstimate {
    pub frame: usize,
    pub objects: BTreeMap<ObjectId, EstimatedObject>,
    pub score: SceneScore,
    pub graph: SupportGraph,
    /// Labels for every object seen this frame, including removed ones.
    pub transitions: BTreeMap<ObjectId, TransitionLabel>,
    pub ephemeral: BTreeSet<ObjectId>,
    /// Pre-simulation poses whose simulation reproduces `score`.
    pub configuration: BTreeMap<ObjectId, Pose>,
    /// `simulate_world` calls spent on this frame.
    pub sim_calls: usize,
}

impl SceneEstimate {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn poses(&self) -> BTreeMap<ObjectId, Pose> {
        self.objects.iter().map(|(id, o)| (id.clone(), o.pose)).collect()
    }

    /// World holding the stored pre-simulation configuration.
    pub fn configuration_world(&self, params: &ParserParams) -> Result<World> {
        let mut w = params.empty_world();
        for (id, pose) in &self.configuration {
            let model = self.objects.get(id).ok_or_else(|| Error::UnknownObject(id.clone()))?.model.clone();
            w.add_body(id.clone(), model, *pose)?;
        }
        Ok(w)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let objects: Vec<serde_json::Value> = self
            .objects
            .iter()
            .map(|(id, o)| {
                serde_json::json!({
                    "id": id,
                    "model": o.model.name(),
                    "pose": o.pose,
                    "label": o.label.to_string(),
                    "scores": o.score,
                })
            })
            .collect();
        let transitions: BTreeMap<&ObjectId, String> = self.transitions.iter().map(|(k, v)| (k, v.to_string())).collect();
        serde_json::json!({
            "frame": self.frame,
            "objects": objects,
            "transitions": transitions,
            "log_prob": self.score.log_prob,
            "graph": self.graph,
            "sim_calls": self.sim_calls,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("estimate serializes")
    }
}

/// Result of a layered search.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Simulated world of the selected configuration.
    pub world: World,
    pub score: SceneScore,
    pub configuration: BTreeMap<ObjectId, Pose>,
}

/// Fraction of surface points with a cloud point within `d_t`.
pub fn data_support(model: &ObjectModel, pose: &Pose, index: &CloudIndex, d_t: f64) -> f64 {
    if index.is_empty() {
        return 0.0;
    }
    let hits = model
        .surface_points()
        .iter()
        .filter(|s| index.nearest_within(&pose.transform_point(&s.position), d_t).is_some())
        .count();
    hits as f64 / model.surface_count() as f64
}

/// Index of the hypothesis best explained by the cloud (ties to the lowest index).
pub fn best_data_index(entry: &ObjectHypotheses, index: &CloudIndex, d_t: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, h) in entry.hypotheses.iter().enumerate() {
        let s = data_support(&entry.model, &h.pose, index, d_t);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Pose of each object's best-data hypothesis.
pub fn best_data_configuration(hyps: &HypothesisSet, index: &CloudIndex, d_t: f64) -> BTreeMap<ObjectId, Pose> {
    hyps.objects
        .iter()
        .filter(|(_, e)| !e.hypotheses.is_empty())
        .map(|(id, e)| (id.clone(), e.hypotheses[best_data_index(e, index, d_t)].pose))
        .collect()
}

fn build_world(base: &World, models: &HypothesisSet, config: &BTreeMap<ObjectId, Pose>) -> Result<World> {
    let mut w = base.clone();
    for (id, pose) in config {
        let entry = models.get(id).ok_or_else(|| Error::UnknownObject(id.clone()))?;
        w.add_body(id.clone(), entry.model.clone(), *pose)?;
    }
    Ok(w)
}

/// Tries every hypothesis of every object, layer by layer from the ground.
///
/// Each trial world holds the objects already decided, the candidate, and the
/// candidate's supported descendants at their poses in `provisional`.
pub fn evaluate_hypotheses(
    graph: &SupportGraph,
    hyps: &HypothesisSet,
    provisional: &BTreeMap<ObjectId, Pose>,
    base_world: &World,
    ctx: &SimContext,
    parallel: bool,
) -> Result<Evaluation> {
    for (id, e) in &hyps.objects {
        if e.hypotheses.is_empty() {
            return Err(Error::NoHypotheses(id.clone()));
        }
    }
    let mut order: Vec<ObjectId> = vertices_by_distance(graph, &ObjectId::ground())
        .into_iter()
        .flatten()
        .filter(|id| hyps.objects.contains_key(id))
        .collect();
    let placed_in_graph: BTreeSet<ObjectId> = order.iter().cloned().collect();
    order.extend(hyps.objects.keys().filter(|id| !placed_in_graph.contains(*id)).cloned());

    let mut chosen: BTreeMap<ObjectId, Pose> = BTreeMap::new();
    let mut last: Option<Evaluation> = None;
    for id in &order {
        let entry = &hyps.objects[id];
        let children: Vec<ObjectId> = graph
            .descendants(id)
            .into_iter()
            .filter(|c| !chosen.contains_key(c) && c != id && hyps.objects.contains_key(c))
            .collect();
        let trial = |pose: &Pose| -> Result<Evaluation> {
            let mut config = chosen.clone();
            config.insert(id.clone(), *pose);
            for c in &children {
                let p = provisional.get(c).copied().unwrap_or(hyps.objects[c].hypotheses[0].pose);
                config.insert(c.clone(), p);
            }
            let world = build_world(base_world, hyps, &config)?;
            let (world, score) = simulate_world(&world, ctx)?;
            Ok(Evaluation { world, score, configuration: config })
        };
        let results: Vec<Result<Evaluation>> = if parallel {
            entry.hypotheses.par_iter().map(|h| trial(&h.pose)).collect()
        } else {
            entry.hypotheses.iter().map(|h| trial(&h.pose)).collect()
        };
        let mut best: Option<(usize, Evaluation)> = None;
        for (i, r) in results.into_iter().enumerate() {
            let r = r?;
            if best.as_ref().is_none_or(|(_, b)| r.score.log_prob > b.score.log_prob) {
                best = Some((i, r));
            }
        }
        let (i, eval) = best.expect("non-empty hypothesis list");
        chosen.insert(id.clone(), entry.hypotheses[i].pose);
        last = Some(eval);
    }
    match last {
        Some(eval) => Ok(eval),
        None => {
            let (world, score) = (base_world.clone(), SceneScore::empty());
            Ok(Evaluation { world, score, configuration: BTreeMap::new() })
        }
    }
}

/// Simulates a hypothesis world with guiding forces and returns the settled
/// world with its score.
pub fn improve_hypothesis(world: &World, ctx: &SimContext) -> Result<(World, SceneScore)> {
    simulate_world(world, ctx)
}

/// Visibility of `model` at `pose` against `scene`, and the share of it that
/// lands near cloud points. Without a camera every point counts as visible.
fn evidence_for(
    model: &ObjectModel,
    pose: &Pose,
    scene: &[Placement],
    camera: Option<&CameraModel>,
    index: &CloudIndex,
    d_t: f64,
) -> VisibilityEvidence {
    let mask = match camera {
        Some(cam) => visibility_mask(model, pose, scene, cam),
        None => vec![true; model.surface_count()],
    };
    let m = model.surface_count() as f64;
    let mut geometric = 0usize;
    let mut confirmed = 0usize;
    for (s, visible) in model.surface_points().iter().zip(&mask) {
        if *visible {
            geometric += 1;
            if index.nearest_within(&pose.transform_point(&s.position), d_t).is_some() {
                confirmed += 1;
            }
        }
    }
    VisibilityEvidence { geometric: geometric as f64 / m, confirmed: confirmed as f64 / m }
}

/// Parses one frame given the previous estimate, the detector hypotheses and
/// the observed cloud.
pub fn parse_frame(prev: &SceneEstimate, detections: &HypothesisSet, cloud: &PointCloud, params: &ParserParams) -> Result<SceneEstimate> {
    params.validate()?;
    let counter = AtomicUsize::new(0);
    let index = CloudIndex::new(cloud, params.guiding.d_t);
    let ctx = params.context(&index, Some(&counter));
    let d_t = params.guiding.d_t;
    let frame = if prev.is_empty() && prev.transitions.is_empty() { 0 } else { prev.frame + 1 };

    for (id, e) in &detections.objects {
        if e.hypotheses.is_empty() && !prev.objects.contains_key(id) {
            return Err(Error::NoHypotheses(id.clone()));
        }
    }

    // Current detection pose per detected object, from detector hypotheses only.
    let detected: BTreeMap<ObjectId, Pose> = best_data_configuration(detections, &index, d_t);

    let mut scene: Vec<Placement> = detected
        .iter()
        .map(|(id, pose)| Placement { id: id.clone(), model: detections.objects[id].model.clone(), pose: *pose })
        .collect();
    scene.extend(
        prev.objects
            .iter()
            .filter(|(id, _)| !detected.contains_key(*id))
            .map(|(id, o)| Placement { id: id.clone(), model: o.model.clone(), pose: o.pose }),
    );
    let mut evidence = BTreeMap::new();
    let mut occupied = BTreeSet::new();
    for (id, o) in prev.objects.iter().filter(|(id, _)| !detected.contains_key(*id)) {
        evidence.insert(id.clone(), evidence_for(&o.model, &o.pose, &scene, params.camera.as_ref(), &index, params.thresholds.confirm_distance));
        let taken = detected.iter().any(|(did, dpose)| {
            occupies_volume((&detections.objects[did].model, dpose), (&o.model, &o.pose), params.thresholds.occupancy)
        });
        if taken {
            occupied.insert(id.clone());
        }
    }
    let mut labels = classify_transitions(prev, &detected, &evidence, &occupied, &params.thresholds);

    // Hypotheses: detector candidates plus the previous pose of every retained object.
    let mut hyps = HypothesisSet::new();
    for (id, e) in &detections.objects {
        for h in &e.hypotheses {
            hyps.insert(id.clone(), e.model.clone(), h.pose, h.source);
        }
    }
    for (id, o) in &prev.objects {
        if labels.get(id).is_some_and(|l| l.mode == TransitionMode::Removed) {
            continue;
        }
        hyps.insert(id.clone(), o.model.clone(), o.pose, HypothesisSource::PreviousFrame);
    }

    let base = params.empty_world();
    if hyps.is_empty() {
        return Ok(SceneEstimate {
            frame,
            transitions: labels,
            sim_calls: 0,
            ..SceneEstimate::empty()
        });
    }

    // Provisional configuration from the best-data hypotheses; its support
    // graph orders the search and its score guards against regressions.
    let raw_config = best_data_configuration(&hyps, &index, d_t);
    let raw_world = build_world(&base, &hyps, &raw_config)?;
    let (raw_sim, raw_score) = simulate_world(&raw_world, &ctx)?;
    let provisional_graph = raw_sim.support_graph.clone().unwrap_or_default();
    let settled: BTreeMap<ObjectId, Pose> = raw_sim.poses();

    for (id, label) in labels.iter_mut() {
        if label.ephemeral && label.mode != TransitionMode::Removed {
            let needed = provisional_graph.descendants(id).iter().any(|d| detected.contains_key(d));
            if needed {
                *label = TransitionLabel::new(TransitionMode::SupportRetained);
            }
        }
    }

    let greedy = evaluate_hypotheses(&provisional_graph, &hyps, &settled, &base, &ctx, params.parallel)?;
    let chosen = if raw_score.log_prob > greedy.score.log_prob {
        Evaluation { world: raw_sim, score: raw_score, configuration: raw_config }
    } else {
        greedy
    };

    let graph = chosen.world.support_graph.clone().unwrap_or_default();
    let mut objects = BTreeMap::new();
    for b in chosen.world.bodies() {
        let label = labels.get(&b.id).copied().unwrap_or(TransitionLabel::new(TransitionMode::Added));
        objects.insert(
            b.id.clone(),
            EstimatedObject { model: b.model.clone(), pose: b.pose, label, score: chosen.score.objects.get(&b.id).cloned() },
        );
    }
    let ephemeral = objects.iter().filter(|(_, o)| o.label.ephemeral).map(|(id, _)| id.clone()).collect();
    Ok(SceneEstimate {
        frame,
        objects,
        score: chosen.score,
        graph,
        transitions: labels,
        ephemeral,
        configuration: chosen.configuration,
        sim_calls: counter.into_inner(),
    })
}

#[cfg(test)]
mod tests;
