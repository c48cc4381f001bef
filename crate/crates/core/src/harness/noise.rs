use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ObjectModel, Pose};
use crate::parser::{HypothesisSet, HypothesisSource};
use crate::{Error, ObjectId, Result};

/// Detector stand-in: Gaussian perturbations of the true pose that grow as
/// visibility drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Per-axis translation standard deviation at full visibility (m).
    pub sigma_trans: f64,
    /// Per-axis rotation-vector standard deviation at full visibility (rad).
    pub sigma_rot: f64,
    /// Growth of both sigmas as visibility falls: `σ·(1 + gain·(1 − v))`.
    pub visibility_gain: f64,
    /// Objects less visible than this receive no hypotheses.
    pub visibility_floor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma_trans: 0.00325, sigma_rot: 3.57f64.to_radians(), visibility_gain: 0.0, visibility_floor: 0.02 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.sigma_trans, self.sigma_rot, self.visibility_gain, self.visibility_floor]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::InvalidParameter(format!("noise model out of range: {self:?}")));
        }
        Ok(())
    }

    /// `(σ_trans, σ_rot)` at a given visibility, or `None` below the floor.
    pub fn sigmas(&self, visibility: f64) -> Option<(f64, f64)> {
        if visibility < self.visibility_floor || visibility <= 0.0 {
            return None;
        }
        let scale = 1.0 + self.visibility_gain * (1.0 - visibility.clamp(0.0, 1.0));
        Some((self.sigma_trans * scale, self.sigma_rot * scale))
    }

    /// Expected translation error magnitude: the Maxwell mean `2σ√(2/π)`.
    pub fn mean_translation_error(&self, visibility: f64) -> Option<f64> {
        self.sigmas(visibility).map(|(s, _)| 2.0 * s * (2.0 / std::f64::consts::PI).sqrt())
    }

    /// Expected rotation angle, Maxwell-distributed like the translation.
    pub fn mean_rotation_error(&self, visibility: f64) -> Option<f64> {
        self.sigmas(visibility).map(|(_, s)| 2.0 * s * (2.0 / std::f64::consts::PI).sqrt())
    }

    pub fn perturb(&self, pose: &Pose, sigma_t: f64, sigma_r: f64, rng: &mut ChaCha8Rng) -> Pose {
        let mut gaussian = || -> Vector3<f64> {
            Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
        };
        let dt = gaussian() * sigma_t;
        let dr = gaussian() * sigma_r;
        Pose::new(UnitQuaternion::from_scaled_axis(dr) * pose.rotation, pose.translation + dt)
    }
}

/// Mixes a seed with an object id so each object draws an independent stream.
pub fn object_seed(seed: u64, id: &ObjectId) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_str().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `k` noisy detections per sufficiently visible object.
pub fn gen_hypotheses(
    truth: &[(ObjectId, Arc<ObjectModel>, Pose)],
    visibility: &BTreeMap<ObjectId, f64>,
    noise: &NoiseModel,
    k: usize,
    seed: u64,
) -> Result<HypothesisSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut set = HypothesisSet::new();
    for (id, model, pose) in truth {
        let vis = visibility.get(id).copied().unwrap_or(1.0);
        let Some((st, sr)) = noise.sigmas(vis) else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(object_seed(seed, id));
        for _ in 0..k {
            set.insert(id.clone(), model.clone(), noise.perturb(pose, st, sr, &mut rng), HypothesisSource::Detector);
        }
    }
    Ok(set)
}
