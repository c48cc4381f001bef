use std::sync::Arc;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::geometry::{ObjectModel, Pose};
use crate::physics::World;
use crate::{Error, ObjectId, Result};

/// Pinhole depth camera. Camera frame: x right, y down, z along the view direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub pose: Pose,
    pub fov_h: f64,
    pub fov_v: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    /// Depth noise standard deviation along each ray (m).
    pub noise_sigma: f64,
}

impl CameraModel {
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let z = target - eye;
        let x = z.cross(&up);
        if z.norm() < 1e-12 || x.norm() < 1e-12 {
            return Err(Error::InvalidParameter("camera view direction parallel to up or zero".into()));
        }
        let z = z.normalize();
        let x = x.normalize();
        let y = z.cross(&x);
        let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        Ok(CameraModel {
            pose: Pose::new(UnitQuaternion::from_rotation_matrix(&r), eye.coords),
            fov_h: 60f64.to_radians(),
            fov_v: 45f64.to_radians(),
            width: 200,
            height: 150,
            near: 0.05,
            far: 3.0,
            noise_sigma: 0.0,
        })
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_fov(mut self, fov_h: f64, fov_v: f64) -> Self {
        self.fov_h = fov_h;
        self.fov_v = fov_v;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < std::f64::consts::PI;
        if !(fov_ok(self.fov_h) && fov_ok(self.fov_v))
            || self.width < 16
            || self.height < 16
            || !(self.near > 0.0 && self.far > self.near)
            || !(self.noise_sigma >= 0.0)
            || !self.pose.is_finite()
        {
            return Err(Error::InvalidParameter(format!("invalid camera: {self:?}")));
        }
        Ok(())
    }

    pub fn eye(&self) -> Point3<f64> {
        Point3::from(self.pose.translation)
    }

    /// Unit world-frame ray through the centre of pixel (u, v).
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let tx = (self.fov_h * 0.5).tan();
        let ty = (self.fov_v * 0.5).tan();
        let x = ((u as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * tx;
        let y = ((v as f64 + 0.5) / self.height as f64 * 2.0 - 1.0) * ty;
        self.pose.transform_vector(&Vector3::new(x, y, 1.0).normalize())
    }

    /// Whether a world point lies inside the viewing frustum and range limits.
    pub fn in_frustum(&self, p: &Point3<f64>) -> bool {
        let c = self.pose.inverse_transform_point(p);
        if c.z <= 0.0 {
            return false;
        }
        let dist = c.coords.norm();
        let eps = 1e-12;
        (c.x / c.z).abs() <= (self.fov_h * 0.5).tan() + eps
            && (c.y / c.z).abs() <= (self.fov_v * 0.5).tan() + eps
            && dist >= self.near - eps
            && dist <= self.far + eps
    }
}

/// A model instance placed in a scene.
#[derive(Debug, Clone)]
pub struct Placement {
    pub id: ObjectId,
    pub model: Arc<ObjectModel>,
    pub pose: Pose,
}

pub fn placements(world: &World) -> Vec<Placement> {
    world
        .bodies()
        .iter()
        .map(|b| Placement { id: b.id.clone(), model: b.model.clone(), pose: b.pose })
        .collect()
}

/// Entry distance of a ray into a posed convex hull, if it hits in front of the origin.
pub fn ray_hull(origin: &Point3<f64>, dir: &Vector3<f64>, model: &ObjectModel, pose: &Pose) -> Option<f64> {
    let o = pose.inverse_transform_point(origin);
    let d = pose.rotation.inverse_transform_vector(dir);
    let mut t_in = f64::NEG_INFINITY;
    let mut t_out = f64::INFINITY;
    for plane in model.shape().planes() {
        let denom = plane.normal.dot(&d);
        let dist = plane.offset - plane.normal.dot(&o.coords);
        if denom.abs() < 1e-300 {
            if dist < 0.0 {
                return None;
            }
            continue;
        }
        let t = dist / denom;
        if denom < 0.0 {
            t_in = t_in.max(t);
        } else {
            t_out = t_out.min(t);
        }
        if t_in > t_out {
            return None;
        }
    }
    (t_in >= 0.0 && t_in <= t_out).then_some(t_in)
}

fn first_hit(origin: &Point3<f64>, dir: &Vector3<f64>, scene: &[Placement]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, item) in scene.iter().enumerate() {
        let centre = item.pose.transform_point(&item.model.cog());
        let r = item.model.shape().bounding_radius();
        let oc = centre - origin;
        let along = oc.dot(dir);
        if along + r < 0.0 || oc.norm_squared() - along * along > r * r {
            continue;
        }
        if let Some(t) = ray_hull(origin, dir, &item.model, &item.pose) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}

/// Renders one depth sample per pixel; the nearest hull hit wins. Points carry
/// ground-truth labels.
pub fn render_cloud(scene: &[Placement], camera: &CameraModel, seed: u64) -> Result<PointCloud> {
    camera.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, camera.noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidParameter(format!("depth noise: {e}")))?;
    let eye = camera.eye();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for v in 0..camera.height {
        for u in 0..camera.width {
            let dir = camera.pixel_ray(u, v);
            let Some((t, i)) = first_hit(&eye, &dir, scene) else { continue };
            if t < camera.near || t > camera.far {
                continue;
            }
            let noisy = if camera.noise_sigma > 0.0 { t + noise.sample(&mut rng) } else { t };
            points.push(eye + dir * noisy.clamp(camera.near, camera.far));
            labels.push(scene[i].id.clone());
        }
    }
    Ok(PointCloud { points, labels: Some(labels) })
}

/// Per-surface-point visibility: front-facing, inside the frustum, and not
/// occluded by any scene hull.
pub fn visibility_mask(model: &ObjectModel, pose: &Pose, scene: &[Placement], camera: &CameraModel) -> Vec<bool> {
    let eye = camera.eye();
    model
        .surface_points()
        .iter()
        .map(|s| {
            let p = pose.transform_point(&s.position);
            let n = pose.transform_vector(&s.normal);
            let to_eye = eye - p;
            if n.dot(&to_eye) <= 0.0 || !camera.in_frustum(&p) {
                return false;
            }
            let dist = to_eye.norm();
            let dir = -to_eye / dist;
            let eps = 1e-7 + 1e-6 * dist;
            match first_hit(&eye, &dir, scene) {
                Some((t, _)) => t >= dist - eps,
                None => true,
            }
        })
        .collect()
}

/// Visible fraction `c_est / M` of an object's surface samples.
pub fn visibility(id: &ObjectId, scene: &[Placement], camera: &CameraModel) -> Result<f64> {
    let item = scene.iter().find(|p| &p.id == id).ok_or_else(|| Error::UnknownObject(id.clone()))?;
    let mask = visibility_mask(&item.model, &item.pose, scene, camera);
    Ok(mask.iter().filter(|v| **v).count() as f64 / mask.len() as f64)
}
