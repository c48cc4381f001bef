//! Probability components of the scene score and their composition.
//!
//! Every logistic is evaluated in log space so that saturated terms keep
//! their ordering instead of rounding to 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{pose_delta, ObjectModel, Pose};
use crate::physics::ObjectKinematics;
use crate::{Error, ObjectId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsistencyParams {
    pub sigma_b: f64,
    pub alpha_b: f64,
    pub alpha_t: f64,
    pub alpha_r: f64,
    pub sigma_c: f64,
    pub alpha_c: f64,
    pub sigma_s: f64,
    pub alpha_s: f64,
    pub sigma_d: f64,
    pub alpha_d: f64,
    pub sigma_m: f64,
    pub alpha_m: f64,
    /// Translation giving one unit of normalized movement (m).
    pub sigma_m_trans: f64,
    /// Rotation giving one unit of normalized movement (rad).
    pub sigma_m_rot: f64,
    /// Upper clamp on the rotational stability ratio.
    pub beta_r_max: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams {
            sigma_b: 40.0,
            alpha_b: 0.05,
            alpha_t: 1.0,
            alpha_r: 1.0,
            sigma_c: 200.0,
            alpha_c: 0.01,
            sigma_s: 2.0,
            alpha_s: 0.0,
            sigma_d: 10.0,
            alpha_d: 0.3,
            sigma_m: 8.0,
            alpha_m: 0.5,
            sigma_m_trans: 0.02,
            sigma_m_rot: 0.26,
            beta_r_max: 10.0,
        }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<()> {
        let steep = [self.sigma_b, self.sigma_c, self.sigma_s, self.sigma_d, self.sigma_m];
        let mids = [self.alpha_b, self.alpha_t, self.alpha_r, self.alpha_c, self.alpha_s, self.alpha_d, self.alpha_m];
        if steep.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || mids.iter().any(|a| !a.is_finite())
            || !(self.sigma_m_trans > 0.0 && self.sigma_m_rot > 0.0 && self.beta_r_max > 0.0)
        {
            return Err(Error::InvalidParameter(format!("consistency parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// `ln(1 / (1 + e^{-z}))`, accurate in both tails.
pub fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn logistic(z: f64) -> f64 {
    log_logistic(z).exp()
}

/// Linear and rotational stability ratios `(β_t, β_R)`.
pub fn stability_scores(kin: &ObjectKinematics, model: &ObjectModel, gravity: f64, params: &ConsistencyParams) -> (f64, f64) {
    let beta_t = kin.linear_acceleration.norm() / gravity;
    let max_alpha = model.mass() * gravity * model.max_pivot_distance() / model.largest_principal_moment();
    let beta_r = (kin.angular_acceleration.norm() / max_alpha).clamp(0.0, params.beta_r_max);
    (beta_t, beta_r)
}

pub fn stability_log_prob(beta_t: f64, beta_r: f64, p: &ConsistencyParams) -> f64 {
    log_logistic(-p.sigma_b * (p.alpha_t * beta_t - p.alpha_b)) + log_logistic(-p.sigma_b * (p.alpha_r * beta_r - p.alpha_b))
}

pub fn stability_prob(beta_t: f64, beta_r: f64, p: &ConsistencyParams) -> f64 {
    stability_log_prob(beta_t, beta_r, p).exp()
}

/// Normalized collision error `e_C = (d / ε_d)(v_c / v_t)`.
pub fn collision_error(d: f64, eps_d: f64, v_c: f64, v_t: f64) -> f64 {
    (d / eps_d) * (v_c / v_t)
}

pub fn collision_log_prob(d: f64, eps_d: f64, v_c: f64, v_t: f64, p: &ConsistencyParams) -> f64 {
    log_logistic(-p.sigma_c * (collision_error(d, eps_d, v_c, v_t) - p.alpha_c))
}

pub fn collision_prob(d: f64, eps_d: f64, v_c: f64, v_t: f64, p: &ConsistencyParams) -> f64 {
    collision_log_prob(d, eps_d, v_c, v_t, p).exp()
}

pub fn support_log_prob(fractions: &[f64], p: &ConsistencyParams) -> f64 {
    let total: f64 = fractions.iter().sum();
    log_logistic(p.sigma_s * (total - p.alpha_s))
}

pub fn support_prob(fractions: &[f64], p: &ConsistencyParams) -> f64 {
    support_log_prob(fractions, p).exp()
}

pub fn data_fit_log_prob(visibility: f64, p: &ConsistencyParams) -> f64 {
    log_logistic(p.sigma_d * (visibility - p.alpha_d))
}

pub fn data_fit_prob(visibility: f64, p: &ConsistencyParams) -> f64 {
    data_fit_log_prob(visibility, p).exp()
}

/// Normalized movement `δ` between two poses.
pub fn movement(prev: &Pose, curr: &Pose, p: &ConsistencyParams) -> f64 {
    let (dt, dr) = pose_delta(prev, curr);
    dt / p.sigma_m_trans + dr / p.sigma_m_rot
}

pub fn transition_log_prob(prev: Option<&Pose>, curr: &Pose, p: &ConsistencyParams) -> f64 {
    match prev {
        None => 0.0,
        Some(prev) => log_logistic(-p.sigma_m * (movement(prev, curr, p) - p.alpha_m)),
    }
}

pub fn transition_prob(prev: Option<&Pose>, curr: &Pose, p: &ConsistencyParams) -> f64 {
    transition_log_prob(prev, curr, p).exp()
}

/// Log-probabilities of the five components for one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectComponents {
    pub stability: f64,
    pub collision: f64,
    pub support: f64,
    pub data: f64,
    pub transition: f64,
}

impl ObjectComponents {
    pub fn sum(&self) -> f64 {
        self.stability + self.collision + self.support + self.data + self.transition
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("stability", self.stability),
            ("collision", self.collision),
            ("support", self.support),
            ("data", self.data),
            ("transition", self.transition),
        ]
    }
}

/// Diagnostics kept next to the component logs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectDiagnostics {
    pub beta_t: f64,
    pub beta_r: f64,
    pub depth: f64,
    pub volume: f64,
    pub support_total: f64,
    pub visibility: f64,
    pub movement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub logs: ObjectComponents,
    pub diagnostics: ObjectDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub objects: BTreeMap<ObjectId, ObjectScore>,
    /// Per-component sums over objects.
    pub totals: Option<ObjectComponents>,
    pub log_prob: f64,
}

impl SceneScore {
    pub fn empty() -> Self {
        SceneScore { objects: BTreeMap::new(), totals: None, log_prob: 0.0 }
    }

    /// Maximum linear stability ratio over objects.
    pub fn max_beta_t(&self) -> f64 {
        self.objects.values().map(|o| o.diagnostics.beta_t).fold(0.0, f64::max)
    }
}

/// Composes per-object component logs into the scene log-probability. Sums run
/// in id order, so the result does not depend on insertion order.
pub fn scene_log_prob(objects: BTreeMap<ObjectId, ObjectScore>) -> Result<SceneScore> {
    let mut totals = ObjectComponents { stability: 0.0, collision: 0.0, support: 0.0, data: 0.0, transition: 0.0 };
    for (id, score) in &objects {
        for (name, v) in score.logs.named() {
            if !v.is_finite() || v > 0.0 {
                return Err(Error::InvalidProbability { object: id.clone(), component: name });
            }
        }
        totals.stability += score.logs.stability;
        totals.collision += score.logs.collision;
        totals.support += score.logs.support;
        totals.data += score.logs.data;
        totals.transition += score.logs.transition;
    }
    let log_prob = objects.values().map(|o| o.logs.sum()).sum();
    let totals = (!objects.is_empty()).then_some(totals);
    Ok(SceneScore { objects, totals, log_prob })
}
