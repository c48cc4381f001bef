use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Point3, Vector3};

use super::guiding::{guiding_wrench_indexed, GuidingForceParams};
use super::world::World;
use crate::consistency::{
    collision_log_prob, data_fit_log_prob, movement, scene_log_prob, stability_log_prob, stability_scores, support_log_prob,
    transition_log_prob, ConsistencyParams, ObjectComponents, ObjectDiagnostics, ObjectScore, SceneScore,
};
use crate::sensor::{placements, visibility_mask, CameraModel, CloudIndex};
use crate::supportgraph::gen_support_graph;
use crate::{Error, ObjectId, Result};

/// Mean accelerations of one body over a simulation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectKinematics {
    pub linear_acceleration: Vector3<f64>,
    pub angular_acceleration: Vector3<f64>,
    /// Net COG translation over the window (m).
    pub translation: f64,
    /// Net rotation angle over the window (rad).
    pub rotation: f64,
}

impl Default for ObjectKinematics {
    fn default() -> Self {
        ObjectKinematics {
            linear_acceleration: Vector3::zeros(),
            angular_acceleration: Vector3::zeros(),
            translation: 0.0,
            rotation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BodyKinematics {
    pub bodies: BTreeMap<ObjectId, ObjectKinematics>,
}

/// `a = 2Δx / t²` and `α = 2Δθ / t²` per body, from the start of the window to its end.
pub fn measure_kinematics(before: &World, after: &World, t: f64) -> Result<BodyKinematics> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive, got {t}")));
    }
    if before.len() != after.len() {
        return Err(Error::MismatchedBodies);
    }
    let k = 2.0 / (t * t);
    let mut bodies = BTreeMap::new();
    for (b0, b1) in before.bodies().iter().zip(after.bodies()) {
        if b0.id != b1.id {
            return Err(Error::MismatchedBodies);
        }
        let dx = b1.cog() - b0.cog();
        let dq = b1.pose.rotation * b0.pose.rotation.inverse();
        let axis_angle = dq.scaled_axis();
        bodies.insert(
            b0.id.clone(),
            ObjectKinematics {
                linear_acceleration: dx * k,
                angular_acceleration: axis_angle * k,
                translation: dx.norm(),
                rotation: axis_angle.norm(),
            },
        );
    }
    Ok(BodyKinematics { bodies })
}

/// Inputs shared by every simulation of a frame.
#[derive(Debug, Clone, Copy)]
pub struct SimContext<'a> {
    /// Simulation window `t` (s).
    pub window: f64,
    pub dt: f64,
    pub cloud: &'a CloudIndex,
    pub guiding: GuidingForceParams,
    pub consistency: ConsistencyParams,
    pub camera: Option<&'a CameraModel>,
    /// Incremented once per `simulate_world` call.
    pub counter: Option<&'a AtomicUsize>,
}

impl<'a> SimContext<'a> {
    pub fn new(cloud: &'a CloudIndex) -> Self {
        SimContext {
            window: 0.4,
            dt: 1.0 / 250.0,
            cloud,
            guiding: GuidingForceParams::default(),
            consistency: ConsistencyParams::default(),
            camera: None,
            counter: None,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.window / self.dt).round() as usize).max(1)
    }
}

fn apply_guiding(world: &mut World, ctx: &SimContext) {
    let eye: Option<Point3<f64>> = ctx.camera.map(|c| c.eye());
    for b in world.bodies_mut() {
        let (f, t) = guiding_wrench_indexed(&b.model, &b.pose, ctx.cloud, &ctx.guiding, eye.as_ref());
        b.force = f;
        b.torque = t;
    }
}

/// Runs the window with gravity, contacts and guiding forces, stores the final
/// support graph on the returned world, and scores the result against the
/// world as it was on entry.
pub fn simulate_world(world: &World, ctx: &SimContext) -> Result<(World, SceneScore)> {
    if let Some(c) = ctx.counter {
        c.fetch_add(1, Ordering::Relaxed);
    }
    if !(ctx.dt > 0.0 && ctx.window >= ctx.dt) {
        return Err(Error::InvalidParameter(format!("need window >= dt > 0, got {} and {}", ctx.window, ctx.dt)));
    }
    let mut w = world.clone();
    apply_guiding(&mut w, ctx);
    for _ in 0..ctx.steps() {
        w.step(ctx.dt)?;
        apply_guiding(&mut w, ctx);
    }
    for b in w.bodies_mut() {
        b.force = Vector3::zeros();
        b.torque = Vector3::zeros();
    }
    let graph = gen_support_graph(&w);
    w.support_graph = Some(graph);
    let score = score_world(world, &w, ctx)?;
    Ok((w, score))
}

/// Scores `after` (with its support graph) against the pre-simulation `before`.
pub fn score_world(before: &World, after: &World, ctx: &SimContext) -> Result<SceneScore> {
    let window = ctx.steps() as f64 * ctx.dt;
    let kin = measure_kinematics(before, after, window)?;
    let graph = match &after.support_graph {
        Some(g) => g.clone(),
        None => gen_support_graph(after),
    };
    let p = &ctx.consistency;
    let scene = ctx.camera.map(|_| placements(after));
    let mut objects = BTreeMap::new();
    for (b0, b) in before.bodies().iter().zip(after.bodies()) {
        let model = &b.model;
        let (beta_t, beta_r) = stability_scores(&kin.bodies[&b.id], model, after.solver.gravity, p);
        let (depth, volume) = graph.vertex(&b.id).map_or((0.0, 0.0), |v| (v.d, v.v));
        let fractions = graph.support_fractions(&b.id);
        let visibility = confirmed_visibility(after, b.id.as_str(), ctx, scene.as_deref());
        let logs = ObjectComponents {
            stability: stability_log_prob(beta_t, beta_r, p),
            collision: collision_log_prob(depth, model.shape().diameter(), volume, model.shape().volume(), p),
            support: support_log_prob(&fractions, p),
            data: data_fit_log_prob(visibility, p),
            transition: transition_log_prob(Some(&b0.pose), &b.pose, p),
        };
        let diagnostics = ObjectDiagnostics {
            beta_t,
            beta_r,
            depth,
            volume,
            support_total: fractions.iter().sum(),
            visibility,
            movement: movement(&b0.pose, &b.pose, p),
        };
        objects.insert(b.id.clone(), ObjectScore { logs, diagnostics });
    }
    scene_log_prob(objects)
}

/// Share of surface points that are visible from the camera and have a cloud
/// point within `d_t`; without a camera, the share with a cloud point.
fn confirmed_visibility(world: &World, id: &str, ctx: &SimContext, scene: Option<&[crate::sensor::Placement]>) -> f64 {
    let Ok(body) = world.body(&ObjectId::new(id)) else { return 0.0 };
    let model = &body.model;
    let mask = match (ctx.camera, scene) {
        (Some(cam), Some(scene)) => visibility_mask(model, &body.pose, scene, cam),
        _ => vec![true; model.surface_count()],
    };
    let matched = model
        .surface_points()
        .iter()
        .zip(&mask)
        .filter(|(s, visible)| **visible && ctx.cloud.nearest_within(&body.pose.transform_point(&s.position), ctx.guiding.d_t).is_some())
        .count();
    matched as f64 / model.surface_count() as f64
}
