//! Convex shapes, poses, mass properties, bounding boxes and contact generation.

pub mod contact;
pub mod gjk;
mod mass;
mod model;
mod obb;
mod polytope;
mod pose;
mod shape;

pub use contact::{collide, contact_manifold, plane_manifold, ContactManifold, ContactPoint};
pub use mass::{mass_properties, MassProperties};
pub use model::{max_pivot_distance, sample_surface, sample_surface_faces, ModelDb, ModelSpec, ObjectModel, SurfacePoint, MIN_SURFACE_POINTS};
pub use obb::{obb_intersection_volume, obb_volume_below_plane, Obb};
pub use polytope::Polytope;
pub use pose::{pose_delta, rotation_angle_between, Pose};
pub use shape::{ConvexShape, Plane};
