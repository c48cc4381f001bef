use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mass::mass_properties;
use super::obb::Obb;
use super::shape::ConvexShape;
use crate::{Error, Result};

/// Minimum number of surface samples per model.
pub const MIN_SURFACE_POINTS: usize = 64;

/// Point on the model surface with its outward normal, body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Point3<f64>,
    pub normal: Vector3<f64>,
}

/// A known object class: convex shape, mass properties, and surface samples.
#[derive(Debug, Clone)]
pub struct ObjectModel {
    name: String,
    shape: ConvexShape,
    density: f64,
    mass: f64,
    inertia: Matrix3<f64>,
    principal_moments: Vector3<f64>,
    surface: Vec<SurfacePoint>,
    d_max: f64,
    obb: Obb,
}

impl ObjectModel {
    /// Builds a model with `surface_points` samples: every hull vertex plus
    /// area-uniform samples drawn with `seed`.
    pub fn new(name: impl Into<String>, shape: ConvexShape, density: f64, surface_points: usize, seed: u64) -> Result<Self> {
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
        }
        let nv = shape.vertices().len();
        if surface_points < MIN_SURFACE_POINTS.max(nv) {
            return Err(Error::InvalidParameter(format!(
                "need at least {} surface points, got {surface_points}",
                MIN_SURFACE_POINTS.max(nv)
            )));
        }
        let mp = mass_properties(&shape, density);
        let mut surface: Vec<SurfacePoint> = (0..nv)
            .map(|i| SurfacePoint {
                position: shape.vertices()[i],
                normal: vertex_normal(&shape, i),
            })
            .collect();
        for (p, face) in sample_surface_faces(&shape, surface_points - nv, seed)? {
            surface.push(SurfacePoint { position: p, normal: shape.planes()[face].normal });
        }
        let d_max = surface.iter().map(|s| (s.position - mp.cog).norm()).fold(0.0, f64::max);
        let eig = SymmetricEigen::new(mp.inertia);
        let obb = Obb::fit(&shape);
        Ok(ObjectModel {
            name: name.into(),
            shape,
            density,
            mass: mp.mass,
            inertia: mp.inertia,
            principal_moments: eig.eigenvalues,
            surface,
            d_max,
            obb,
        })
    }

    pub fn from_spec(spec: &ModelSpec, surface_points: usize, seed: u64) -> Result<Self> {
        let vertices = spec.vertices.iter().map(|v| Point3::new(v[0], v[1], v[2])).collect();
        let shape = ConvexShape::new(vertices, spec.faces.clone())?;
        ObjectModel::new(spec.name.clone(), shape, spec.density, surface_points, seed)
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            vertices: self.shape.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: self.shape.faces().to_vec(),
            density: self.density,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &ConvexShape {
        &self.shape
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Inertia tensor about the centre of gravity, body frame.
    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn largest_principal_moment(&self) -> f64 {
        self.principal_moments.max()
    }

    pub fn cog(&self) -> Point3<f64> {
        self.shape.cog()
    }

    pub fn surface_points(&self) -> &[SurfacePoint] {
        &self.surface
    }

    /// Number of surface samples `M`.
    pub fn surface_count(&self) -> usize {
        self.surface.len()
    }

    /// Oriented bounding box in the body frame.
    pub fn obb(&self) -> &Obb {
        &self.obb
    }

    pub fn max_pivot_distance(&self) -> f64 {
        self.d_max
    }
}

/// Largest distance from the centre of gravity to any surface sample (`d_max`).
pub fn max_pivot_distance(model: &ObjectModel) -> f64 {
    model.max_pivot_distance()
}

fn vertex_normal(shape: &ConvexShape, vertex: usize) -> Vector3<f64> {
    let n: Vector3<f64> = shape
        .faces()
        .iter()
        .zip(shape.planes())
        .filter(|(f, _)| f.contains(&vertex))
        .map(|(_, p)| p.normal)
        .sum();
    n.normalize()
}

/// `count` points distributed uniformly by area over the hull surface.
pub fn sample_surface(shape: &ConvexShape, count: usize, seed: u64) -> Result<Vec<Point3<f64>>> {
    Ok(sample_surface_faces(shape, count, seed)?.into_iter().map(|(p, _)| p).collect())
}

/// Like [`sample_surface`], also returning the face index of each sample.
pub fn sample_surface_faces(shape: &ConvexShape, count: usize, seed: u64) -> Result<Vec<(Point3<f64>, usize)>> {
    let verts = shape.vertices();
    let mut tris: Vec<(usize, [Point3<f64>; 3])> = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for (fi, face) in shape.faces().iter().enumerate() {
        let p0 = verts[face[0]];
        for w in face[1..].windows(2) {
            let (p1, p2) = (verts[w[0]], verts[w[1]]);
            let a = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
            if a > 0.0 {
                total += a;
                cumulative.push(total);
                tris.push((fi, [p0, p1, p2]));
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateShape);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let r: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c < r).min(tris.len() - 1);
        let (fi, [a, b, c]) = tris[idx];
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.push((a + (b - a) * u + (c - a) * v, fi));
    }
    Ok(out)
}

/// On-disk model description. Units: meters and kg/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    pub density: f64,
}

impl ModelSpec {
    pub fn cuboid(name: impl Into<String>, size: [f64; 3], density: f64) -> Self {
        let shape = ConvexShape::cuboid(Vector3::from(size)).expect("positive cuboid size");
        ModelSpec {
            name: name.into(),
            vertices: shape.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: shape.faces().to_vec(),
            density,
        }
    }

    pub fn from_shape(name: impl Into<String>, shape: &ConvexShape, density: f64) -> Self {
        ModelSpec {
            name: name.into(),
            vertices: shape.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: shape.faces().to_vec(),
            density,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Model database keyed by model name.
#[derive(Debug, Clone, Default)]
pub struct ModelDb {
    models: BTreeMap<String, Arc<ObjectModel>>,
}

impl ModelDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: ObjectModel) -> Arc<ObjectModel> {
        let m = Arc::new(model);
        self.models.insert(m.name().to_string(), m.clone());
        m
    }

    pub fn get(&self, name: &str) -> Result<&Arc<ObjectModel>> {
        self.models.get(name).ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn from_specs(specs: &[ModelSpec], surface_points: usize, seed: u64) -> Result<Self> {
        let mut db = ModelDb::new();
        for (i, s) in specs.iter().enumerate() {
            db.insert(ObjectModel::from_spec(s, surface_points, seed.wrapping_add(i as u64))?);
        }
        Ok(db)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Arc<ObjectModel>)> {
        self.models.iter()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> ConvexShape {
        ConvexShape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn samples_are_area_uniform() {
        // Chi-square over the six faces of the unit cube (5 dof).
        let cube = unit_cube();
        let pts = sample_surface_faces(&cube, 600, 7).unwrap();
        let mut counts = [0usize; 6];
        for (_, f) in &pts {
            counts[*f] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
        assert!(chi2 < 20.5, "chi2 = {chi2}, counts {counts:?}"); // p ≈ 0.001
        for c in counts {
            assert!((80..=120).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn samples_lie_on_surface() {
        let cube = unit_cube();
        for p in sample_surface(&cube, 500, 3).unwrap() {
            let max = p.coords.amax();
            assert!((max - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample() {
        let pts = sample_surface(&unit_cube(), 1, 0).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].coords.amax() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_surface(&unit_cube(), 50, 11).unwrap(), sample_surface(&unit_cube(), 50, 11).unwrap());
        assert_ne!(sample_surface(&unit_cube(), 50, 11).unwrap(), sample_surface(&unit_cube(), 50, 12).unwrap());
    }

    #[test]
    fn pivot_distance_unit_cube() {
        let m = ObjectModel::new("cube", unit_cube(), 1000.0, 200, 1).unwrap();
        assert!((max_pivot_distance(&m) - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(max_pivot_distance(&m) <= m.shape().diameter());
    }

    #[test]
    fn pivot_distance_two_inch_block() {
        let s = 0.0508;
        let m = ObjectModel::new("block", ConvexShape::cuboid(Vector3::new(s, s, s)).unwrap(), 500.0, 128, 1).unwrap();
        assert!((max_pivot_distance(&m) - 0.0440).abs() < 5e-5);
    }

    #[test]
    fn pivot_distance_sphere_like() {
        let r = 0.2;
        let m = ObjectModel::new("ball", ConvexShape::icosphere(r, 2).unwrap(), 100.0, 400, 1).unwrap();
        assert!((max_pivot_distance(&m) - r).abs() < 1e-3);
    }

    #[test]
    fn model_invariants() {
        let m = ObjectModel::new("box", ConvexShape::cuboid(Vector3::new(0.1, 0.2, 0.05)).unwrap(), 700.0, 256, 4).unwrap();
        assert_eq!(m.surface_count(), 256);
        let eig = SymmetricEigen::new(*m.inertia());
        assert!(eig.eigenvalues.iter().all(|&e| e > 0.0));
        assert_eq!(*m.inertia(), m.inertia().transpose());
        for sp in m.surface_points() {
            let on_face = m.shape().planes().iter().any(|p| p.signed_distance(&sp.position).abs() < 1e-9);
            let inside = m.shape().planes().iter().all(|p| p.signed_distance(&sp.position) < 1e-9);
            assert!(on_face && inside);
            assert!((sp.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_surface_points_rejected() {
        assert!(ObjectModel::new("c", unit_cube(), 1.0, 10, 0).is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = ModelSpec::cuboid("block", [0.05, 0.05, 0.05], 500.0);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.starts_with("{\"name\":\"block\",\"vertices\":"));
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let m = ObjectModel::from_spec(&back, 64, 0).unwrap();
        assert!((m.mass() - 0.05f64.powi(3) * 500.0).abs() < 1e-12);
    }
}
