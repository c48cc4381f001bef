use nalgebra::{Matrix3, Point3, Vector3};

use super::shape::ConvexShape;

/// Mass, centre of gravity and inertia tensor about the centre of gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    pub cog: Point3<f64>,
    pub inertia: Matrix3<f64>,
}

/// Volume moments of a closed, outward-oriented polyhedron.
#[derive(Debug, Clone, Copy)]
pub(crate) struct VolumeMoments {
    pub volume: f64,
    pub centroid: Point3<f64>,
    /// Second moment `∫ x xᵀ dV` about the origin.
    pub covariance: Matrix3<f64>,
}

/// Integrates volume, first and second moments by summing signed tetrahedra
/// spanned by the origin and each fan triangle of every face (divergence theorem).
pub(crate) fn volume_moments(vertices: &[Point3<f64>], faces: &[Vec<usize>]) -> VolumeMoments {
    // Canonical tetrahedron covariance: ∫ x xᵀ over the unit simplex, scaled by det.
    let canonical = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0) / 120.0;
    let mut volume = 0.0;
    let mut first = Vector3::zeros();
    let mut covariance = Matrix3::zeros();
    for face in faces {
        let p0 = vertices[face[0]].coords;
        for w in face[1..].windows(2) {
            let p1 = vertices[w[0]].coords;
            let p2 = vertices[w[1]].coords;
            let a = Matrix3::from_columns(&[p0, p1, p2]);
            let det = a.determinant();
            volume += det / 6.0;
            first += det / 24.0 * (p0 + p1 + p2);
            covariance += det * a * canonical * a.transpose();
        }
    }
    let centroid = if volume.abs() > 0.0 { Point3::from(first / volume) } else { Point3::origin() };
    VolumeMoments { volume, centroid, covariance }
}

/// Mass properties of a uniform-density solid occupying `shape`.
pub fn mass_properties(shape: &ConvexShape, density: f64) -> MassProperties {
    let m = volume_moments(shape.vertices(), shape.faces());
    let mass = density * m.volume;
    let c = m.centroid.coords;
    // Shift the second moment to the centroid, then convert to inertia.
    let cov = density * m.covariance - mass * c * c.transpose();
    let inertia = Matrix3::identity() * cov.trace() - cov;
    MassProperties {
        mass,
        cog: m.centroid,
        inertia: (inertia + inertia.transpose()) * 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shape::ConvexShape;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn unit_cube_density_1000() {
        let cube = ConvexShape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let mp = mass_properties(&cube, 1000.0);
        assert!(rel(mp.mass, 1000.0) < 1e-12);
        for i in 0..3 {
            assert!(rel(mp.inertia[(i, i)], 1000.0 / 6.0) < 1e-9);
            for j in 0..3 {
                if i != j {
                    assert!(mp.inertia[(i, j)].abs() < 1e-9);
                }
            }
        }
        assert!(mp.cog.coords.norm() < 1e-12);
    }

    #[test]
    fn two_inch_block_mass() {
        let s = 0.0508;
        let cube = ConvexShape::cuboid(Vector3::new(s, s, s)).unwrap();
        let mp = mass_properties(&cube, 500.0);
        // s³ · ρ = 1.31097e-4 m³ · 500
        assert!(rel(mp.mass, s * s * s * 500.0) < 1e-12);
        assert!((mp.mass - 6.554e-2).abs() < 1e-5);
    }

    #[test]
    fn cuboid_analytic_inertia() {
        let (a, b, c) = (0.3, 0.7, 1.9);
        let shape = ConvexShape::cuboid(Vector3::new(a, b, c)).unwrap();
        let mp = mass_properties(&shape, 2.5);
        let m = a * b * c * 2.5;
        assert!(rel(mp.inertia[(0, 0)], m * (b * b + c * c) / 12.0) < 1e-9);
        assert!(rel(mp.inertia[(1, 1)], m * (a * a + c * c) / 12.0) < 1e-9);
        assert!(rel(mp.inertia[(2, 2)], m * (a * a + b * b) / 12.0) < 1e-9);
    }

    #[test]
    fn regular_tetrahedron_inertia() {
        // Regular tetrahedron with edge a: I = m a² / 20 about any centroidal axis.
        let a = 0.4;
        let shape = ConvexShape::regular_tetrahedron(a).unwrap();
        let mp = mass_properties(&shape, 1.0);
        let vol = a * a * a / (6.0 * 2f64.sqrt());
        assert!(rel(mp.mass, vol) < 1e-12);
        for i in 0..3 {
            assert!(rel(mp.inertia[(i, i)], mp.mass * a * a / 20.0) < 1e-9);
        }
    }

    #[test]
    fn translation_invariance() {
        let cube = ConvexShape::cuboid(Vector3::new(0.2, 0.3, 0.4)).unwrap();
        let offset = Vector3::new(1.5, -2.0, 0.25);
        let moved: Vec<_> = cube.vertices().iter().map(|v| v + offset).collect();
        let shifted = ConvexShape::new(moved, cube.faces().to_vec()).unwrap();
        let a = mass_properties(&cube, 7.0);
        let b = mass_properties(&shifted, 7.0);
        assert!(rel(a.mass, b.mass) < 1e-12);
        assert!((b.cog - a.cog - offset).norm() < 1e-12);
        assert!((a.inertia - b.inertia).norm() < 1e-9 * a.inertia.norm());
    }
}
