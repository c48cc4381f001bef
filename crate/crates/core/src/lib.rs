//! Sequential scene parsing with an embedded rigid-body simulation.
//!
//! Pose hypotheses for known convex objects are placed into a deterministic
//! physics world, simulated briefly under gravity and data-guiding forces, and
//! scored by a scene probability built from stability, collision, support,
//! visibility-based data fitness, and temporal consistency. Objects are
//! evaluated in support-graph order so a frame costs `O(N·k)` simulations, and
//! the best scene is carried over as the prior for the next frame.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consistency;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod parser;
pub mod physics;
pub mod sensor;
pub mod supportgraph;

pub use error::{Error, Result};

/// Identifier of an object instance in a scene.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The immovable ground body.
    pub fn ground() -> Self {
        ObjectId(GROUND_ID.to_string())
    }

    pub fn is_ground(&self) -> bool {
        self.0 == GROUND_ID
    }
}

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

pub const GROUND_ID: &str = "ground";
