use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::solver;
use crate::geometry::{ContactManifold, ObjectModel, Plane, Pose};
use crate::supportgraph::SupportGraph;
use crate::{Error, ObjectId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Time step (s).
    pub dt: f64,
    pub iterations: usize,
    /// Fraction of the penetration removed per step by positional correction.
    pub baumgarte: f64,
    pub friction: f64,
    pub restitution: f64,
    /// Penetration allowed before positional correction kicks in (m).
    pub slop: f64,
    /// Speculative contact distance (m).
    pub contact_margin: f64,
    /// Gravitational acceleration magnitude (m/s²), acting along -z.
    pub gravity: f64,
    pub warm_start: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            dt: 1.0 / 250.0,
            iterations: 10,
            baumgarte: 0.2,
            friction: 0.6,
            restitution: 0.0,
            slop: 5e-5,
            contact_margin: 1e-3,
            gravity: 9.81,
            warm_start: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.dt.is_finite()
            && self.iterations > 0
            && (0.0..=1.0).contains(&self.baumgarte)
            && self.friction >= 0.0
            && self.restitution == 0.0
            && self.slop >= 0.0
            && self.contact_margin >= 0.0
            && self.gravity.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("solver parameters out of range: {self:?}")))
        }
    }
}

/// Immovable ground half-space `normal · x <= height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub height: f64,
    pub normal: [f64; 3],
}

impl Default for GroundPlane {
    fn default() -> Self {
        GroundPlane { height: 0.0, normal: [0.0, 0.0, 1.0] }
    }
}

impl GroundPlane {
    pub fn plane(&self) -> Plane {
        let n = Vector3::from(self.normal).normalize();
        Plane::new(n, self.height)
    }
}

#[derive(Debug, Clone)]
pub struct Body {
    pub id: ObjectId,
    pub model: Arc<ObjectModel>,
    pub pose: Pose,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    /// External wrench applied during the next integration (N, N·m about the COG).
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Body {
    pub fn new(id: ObjectId, model: Arc<ObjectModel>, pose: Pose) -> Self {
        Body {
            id,
            model,
            pose,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }

    /// World-frame centre of gravity.
    pub fn cog(&self) -> Point3<f64> {
        self.pose.transform_point(&self.model.cog())
    }

    pub fn inverse_mass(&self) -> f64 {
        1.0 / self.model.mass()
    }

    pub fn inverse_inertia_world(&self) -> Matrix3<f64> {
        let r = self.pose.rotation.to_rotation_matrix();
        let inv = self.model.inertia().try_inverse().unwrap_or_else(Matrix3::zeros);
        r.matrix() * inv * r.matrix().transpose()
    }

    pub fn kinetic_energy(&self) -> f64 {
        let r = self.pose.rotation.to_rotation_matrix();
        let i_world = r.matrix() * self.model.inertia() * r.matrix().transpose();
        0.5 * self.model.mass() * self.linear_velocity.norm_squared()
            + 0.5 * self.angular_velocity.dot(&(i_world * self.angular_velocity))
    }

    fn is_finite(&self) -> bool {
        self.pose.is_finite()
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
    }
}

/// Resolved contact between two bodies after a step. `a` is the ground or the
/// body with the smaller id; normals point from `a` into `b`.
#[derive(Debug, Clone)]
pub struct PairContact {
    pub a: ObjectId,
    pub b: ObjectId,
    pub manifold: ContactManifold,
    /// Accumulated normal impulse per manifold point (N·s, ≥ 0).
    pub normal_impulses: Vec<f64>,
}

impl PairContact {
    pub fn total_impulse(&self) -> f64 {
        self.normal_impulses.iter().sum()
    }

    /// Net impulse delivered to `b`.
    pub fn impulse_on_b(&self) -> Vector3<f64> {
        self.manifold
            .points
            .iter()
            .zip(&self.normal_impulses)
            .map(|(p, l)| p.normal * *l)
            .sum()
    }

    pub fn involves(&self, id: &ObjectId) -> bool {
        &self.a == id || &self.b == id
    }
}

/// Cached impulses for warm starting, per pair, keyed by contact location in B's frame.
#[derive(Debug, Clone, Default)]
pub(crate) struct ContactCache {
    pub(crate) entries: BTreeMap<(ObjectId, ObjectId), Vec<CachedImpulse>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CachedImpulse {
    pub(crate) local: Point3<f64>,
    pub(crate) normal: f64,
    pub(crate) tangent: [f64; 2],
}

impl ContactCache {
    fn forget(&mut self, id: &ObjectId) {
        self.entries.retain(|(a, b), _| a != id && b != id);
    }
}

/// Simulation state: bodies sorted by id, optional ground, solver settings.
#[derive(Debug, Clone)]
pub struct World {
    bodies: Vec<Body>,
    pub ground: Option<GroundPlane>,
    pub solver: SolverParams,
    pub support_graph: Option<SupportGraph>,
    /// Parser frame this world belongs to.
    pub frame: usize,
    /// Steps taken since construction.
    pub steps: u64,
    contacts: Vec<PairContact>,
    pub(crate) cache: ContactCache,
}

impl World {
    pub fn new(solver: SolverParams) -> Self {
        World {
            bodies: Vec::new(),
            ground: Some(GroundPlane::default()),
            solver,
            support_graph: None,
            frame: 0,
            steps: 0,
            contacts: Vec::new(),
            cache: ContactCache::default(),
        }
    }

    /// World without a ground plane.
    pub fn vacuum(solver: SolverParams) -> Self {
        World { ground: None, ..World::new(solver) }
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.solver.gravity)
    }

    pub fn add_body(&mut self, id: ObjectId, model: Arc<ObjectModel>, pose: Pose) -> Result<()> {
        if id.is_ground() {
            return Err(Error::DuplicateObject(id));
        }
        match self.bodies.binary_search_by(|b| b.id.cmp(&id)) {
            Ok(_) => Err(Error::DuplicateObject(id)),
            Err(pos) => {
                self.bodies.insert(pos, Body::new(id, model, pose));
                Ok(())
            }
        }
    }

    pub fn remove_body(&mut self, id: &ObjectId) -> Option<Body> {
        let pos = self.bodies.binary_search_by(|b| b.id.cmp(id)).ok()?;
        self.cache.forget(id);
        self.contacts.retain(|c| !c.involves(id));
        Some(self.bodies.remove(pos))
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub(crate) fn bodies_mut(&mut self) -> &mut [Body] {
        &mut self.bodies
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.bodies.binary_search_by(|b| b.id.cmp(id)).ok()
    }

    pub fn body(&self, id: &ObjectId) -> Result<&Body> {
        self.index_of(id).map(|i| &self.bodies[i]).ok_or_else(|| Error::UnknownObject(id.clone()))
    }

    pub fn body_mut(&mut self, id: &ObjectId) -> Result<&mut Body> {
        match self.index_of(id) {
            Some(i) => Ok(&mut self.bodies[i]),
            None => Err(Error::UnknownObject(id.clone())),
        }
    }

    /// Teleports a body and zeroes its velocities and cached impulses.
    pub fn set_pose(&mut self, id: &ObjectId, pose: Pose) -> Result<()> {
        let body = self.body_mut(id)?;
        body.pose = pose;
        body.linear_velocity = Vector3::zeros();
        body.angular_velocity = Vector3::zeros();
        body.force = Vector3::zeros();
        body.torque = Vector3::zeros();
        self.cache.forget(id);
        self.contacts.retain(|c| !c.involves(id));
        Ok(())
    }

    /// Zeroes every velocity and external wrench and drops contact history.
    pub fn reset_dynamics(&mut self) {
        for b in &mut self.bodies {
            b.linear_velocity = Vector3::zeros();
            b.angular_velocity = Vector3::zeros();
            b.force = Vector3::zeros();
            b.torque = Vector3::zeros();
        }
        self.cache = ContactCache::default();
        self.contacts.clear();
    }

    pub fn poses(&self) -> BTreeMap<ObjectId, Pose> {
        self.bodies.iter().map(|b| (b.id.clone(), b.pose)).collect()
    }

    /// Contacts resolved during the last step.
    pub fn contacts(&self) -> &[PairContact] {
        &self.contacts
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(Body::kinetic_energy).sum()
    }

    /// Advances the world by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let g = self.gravity();
        for b in &mut self.bodies {
            let inv_i = b.inverse_inertia_world();
            b.linear_velocity += (g + b.force * b.inverse_mass()) * dt;
            b.angular_velocity += inv_i * b.torque * dt;
        }
        let (contacts, pseudo) = solver::solve(self, dt);
        for (b, (pv, pw)) in self.bodies.iter_mut().zip(pseudo) {
            let cog = b.cog() + (b.linear_velocity + pv) * dt;
            let w = b.angular_velocity + pw;
            let rotation = UnitQuaternion::from_scaled_axis(w * dt) * b.pose.rotation;
            let rotation = UnitQuaternion::new_normalize(rotation.into_inner());
            let translation = cog.coords - rotation * b.model.cog().coords;
            b.pose = Pose::new(rotation, translation);
        }
        self.contacts = contacts;
        self.steps += 1;
        for b in &self.bodies {
            if !b.is_finite() {
                return Err(Error::NonFinite(b.id.clone()));
            }
        }
        Ok(())
    }
}

/// Functional form of [`World::step`].
pub fn step(world: &World, dt: f64) -> Result<World> {
    let mut next = world.clone();
    next.step(dt)?;
    Ok(next)
}
