use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform in SE(3): `x_world = rotation * x_body + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose { rotation, translation }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized), no translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Pose {
            rotation: UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
            translation: Vector3::zeros(),
        }
    }

    pub fn with_translation(mut self, t: Vector3<f64>) -> Self {
        self.translation = t;
        self
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Builds a pose from a `[w, x, y, z]` quaternion, normalizing it.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Self {
        Pose {
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])),
            translation: Vector3::new(t[0], t[1], t[2]),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse() * (p.coords - self.translation))
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }
}

/// Translation distance and geodesic rotation angle in `[0, π]` between two poses.
pub fn pose_delta(a: &Pose, b: &Pose) -> (f64, f64) {
    let trans = (a.translation - b.translation).norm();
    (trans, rotation_angle_between(&a.rotation, &b.rotation))
}

/// Geodesic angle between two rotations.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // |<qa, qb>| = cos(θ/2); the atan2 form stays accurate near 0 and π.
    let qa = a.quaternion().coords;
    let qb = b.quaternion().coords;
    let sign = qa.dot(&qb).signum();
    let diff = (qa - qb * sign).norm();
    let sum = (qa + qb * sign).norm();
    (4.0 * diff.atan2(sum)).clamp(0.0, std::f64::consts::PI)
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            q: self.quaternion_wxyz(),
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(deserializer)?;
        let n = r.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(serde::de::Error::custom("pose quaternion must be nonzero and finite"));
        }
        // Already-unit quaternions are kept bit for bit so that serialization round-trips.
        if (n - 1.0).abs() < 8.0 * f64::EPSILON {
            let [w, x, y, z] = r.q;
            return Ok(Pose {
                rotation: UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
                translation: Vector3::from(r.t),
            });
        }
        Ok(Pose::from_wxyz(r.q, r.t))
    }
}
