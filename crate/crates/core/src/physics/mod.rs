//! Deterministic rigid-body world with sequential-impulse contacts, guiding
//! forces toward sensor data, and windowed simulation with scoring.

mod guiding;
mod simulate;
mod solver;
mod world;

pub use guiding::{guiding_wrench, guiding_wrench_indexed, point_pair_force, GuidingForceParams};
pub use simulate::{measure_kinematics, score_world, simulate_world, BodyKinematics, ObjectKinematics, SimContext};
pub use world::{step, Body, GroundPlane, PairContact, SolverParams, World};

#[cfg(test)]
mod tests;
