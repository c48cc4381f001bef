use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::model::ObjectModel;
use super::polytope::Polytope;
use super::pose::Pose;
use super::shape::{ConvexShape, Plane};

/// Oriented bounding box: centre, orthonormal axes (columns), half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Point3<f64>,
    pub axes: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl Obb {
    /// Principal-axes box of the hull vertices. When the vertex covariance is
    /// (near) isotropic its eigenvectors are arbitrary, so the body-frame box
    /// is used whenever it is not larger.
    pub fn fit(shape: &ConvexShape) -> Obb {
        let verts = shape.vertices();
        let n = verts.len() as f64;
        let mean = verts.iter().map(|v| v.coords).sum::<Vector3<f64>>() / n;
        let mut cov = Matrix3::zeros();
        for v in verts {
            let d = v.coords - mean;
            cov += d * d.transpose();
        }
        cov /= n;
        let eig = SymmetricEigen::new(cov);
        let mut axes = eig.eigenvectors;
        // Right-handed frame.
        if axes.determinant() < 0.0 {
            let c = -axes.column(2);
            axes.set_column(2, &c);
        }
        let principal = Obb::enclosing(verts, axes);
        let body = Obb::enclosing(verts, Matrix3::identity());
        if body.volume() <= principal.volume() * (1.0 + 1e-9) {
            body
        } else {
            principal
        }
    }

    fn enclosing(verts: &[Point3<f64>], axes: Matrix3<f64>) -> Obb {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in verts {
            let local = axes.transpose() * v.coords;
            lo = lo.inf(&local);
            hi = hi.sup(&local);
        }
        Obb {
            center: Point3::from(axes * ((lo + hi) * 0.5)),
            axes,
            half_extents: (hi - lo) * 0.5,
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn transformed(&self, pose: &Pose) -> Obb {
        let r = pose.rotation.to_rotation_matrix();
        Obb {
            center: pose.transform_point(&self.center),
            axes: r.matrix() * self.axes,
            half_extents: self.half_extents,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let d = p - self.center;
        (0..3).all(|i| self.axes.column(i).dot(&d).abs() <= self.half_extents[i])
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let mut out = [Point3::origin(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = Vector3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            *c = self.center + self.axes * s.component_mul(&self.half_extents);
        }
        out
    }

    /// Six bounding planes with outward normals.
    pub fn planes(&self) -> [Plane; 6] {
        let mut out = [Plane::new(Vector3::x(), 0.0); 6];
        for i in 0..3 {
            let a: Vector3<f64> = self.axes.column(i).into();
            let c = a.dot(&self.center.coords);
            out[2 * i] = Plane::new(a, c + self.half_extents[i]);
            out[2 * i + 1] = Plane::new(-a, -c + self.half_extents[i]);
        }
        out
    }

    pub fn to_polytope(&self) -> Polytope {
        let c = self.corners();
        let faces = [
            [0, 4, 6, 2],
            [1, 3, 7, 5],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 2, 3, 1],
            [4, 5, 7, 6],
        ];
        let mut poly: Vec<Vec<Point3<f64>>> = faces.iter().map(|f| f.iter().map(|&i| c[i]).collect()).collect();
        // Outward winding assumes right-handed axes.
        if self.axes.determinant() < 0.0 {
            for f in &mut poly {
                f.reverse();
            }
        }
        Polytope::from_faces(poly)
    }

    pub fn intersection_volume(&self, other: &Obb) -> f64 {
        let eps = 1e-12;
        // Separating-axis early out on the six face axes.
        for i in 0..3 {
            for (axis_box, other_box) in [(self, other), (other, self)] {
                let a: Vector3<f64> = axis_box.axes.column(i).into();
                let d = (other_box.center - axis_box.center).dot(&a).abs();
                let r = axis_box.half_extents[i]
                    + (0..3).map(|j| other_box.half_extents[j] * other_box.axes.column(j).dot(&a).abs()).sum::<f64>();
                if d >= r - eps {
                    return 0.0;
                }
            }
        }
        let mut poly = self.to_polytope();
        for plane in other.planes() {
            poly = poly.clip(&plane);
            if poly.is_empty() {
                return 0.0;
            }
        }
        poly.volume().min(self.volume()).min(other.volume())
    }
}

/// Volume of the intersection of the two models' oriented bounding boxes (m³).
pub fn obb_intersection_volume(a: &ObjectModel, pose_a: &Pose, b: &ObjectModel, pose_b: &Pose) -> f64 {
    let oa = a.obb().transformed(pose_a);
    let ob = b.obb().transformed(pose_b);
    // Clip the box with the smaller volume first so the result is symmetric.
    let (first, second) = if (oa.volume(), key(pose_a)) <= (ob.volume(), key(pose_b)) { (oa, ob) } else { (ob, oa) };
    first.intersection_volume(&second)
}

fn key(p: &Pose) -> [u64; 7] {
    let q = p.quaternion_wxyz();
    let t = p.translation;
    [t.x, t.y, t.z, q[0], q[1], q[2], q[3]].map(f64::to_bits)
}

/// Volume of the model's oriented bounding box lying below `plane` (`n · x <= offset`).
pub fn obb_volume_below_plane(model: &ObjectModel, pose: &Pose, plane: &Plane) -> f64 {
    let obb = model.obb().transformed(pose);
    if obb.corners().iter().all(|c| plane.signed_distance(c) >= 0.0) {
        return 0.0;
    }
    obb.to_polytope().clip(plane).volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::model::ObjectModel;

    fn cube(s: f64) -> ObjectModel {
        ObjectModel::new("cube", ConvexShape::cuboid(Vector3::new(s, s, s)).unwrap(), 1000.0, 64, 0).unwrap()
    }

    #[test]
    fn fit_matches_cuboid() {
        let shape = ConvexShape::cuboid(Vector3::new(0.3, 0.1, 0.2)).unwrap();
        let obb = Obb::fit(&shape);
        assert!((obb.volume() - shape.volume()).abs() < 1e-12);
    }

    #[test]
    fn fit_wedge_encloses_vertices() {
        let shape = ConvexShape::wedge(0.1, 0.05, 0.08).unwrap();
        let obb = Obb::fit(&shape);
        for v in shape.vertices() {
            let d = v - obb.center;
            for i in 0..3 {
                assert!(obb.axes.column(i).dot(&d).abs() <= obb.half_extents[i] + 1e-12);
            }
        }
        assert!(obb.volume() >= shape.volume());
    }

    #[test]
    fn identical_cubes_overlap_fully() {
        let c = cube(1.0);
        let v = obb_intersection_volume(&c, &Pose::identity(), &c, &Pose::identity());
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn disjoint_cubes() {
        let c = cube(1.0);
        assert_eq!(obb_intersection_volume(&c, &Pose::identity(), &c, &Pose::from_translation(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn half_offset() {
        let c = cube(1.0);
        let v = obb_intersection_volume(&c, &Pose::identity(), &c, &Pose::from_translation(0.5, 0.0, 0.0));
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotated_overlap_is_symmetric() {
        let c = cube(1.0);
        let d = ObjectModel::new("bar", ConvexShape::cuboid(Vector3::new(2.0, 0.3, 0.4)).unwrap(), 1.0, 64, 0).unwrap();
        let pa = Pose::from_axis_angle(Vector3::new(1.0, 2.0, 0.5), 0.4).with_translation(Vector3::new(0.1, 0.2, 0.0));
        let pb = Pose::from_axis_angle(Vector3::new(-0.3, 1.0, 1.0), 1.1);
        let ab = obb_intersection_volume(&c, &pa, &d, &pb);
        let ba = obb_intersection_volume(&d, &pb, &c, &pa);
        assert!(ab > 0.0);
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab <= 2.0 * 0.3 * 0.4 + 1e-12);
    }

    #[test]
    fn below_ground() {
        let c = cube(1.0);
        let ground = Plane::new(Vector3::z(), 0.0);
        assert_eq!(obb_volume_below_plane(&c, &Pose::from_translation(0.0, 0.0, 0.5), &ground), 0.0);
        let v = obb_volume_below_plane(&c, &Pose::from_translation(0.0, 0.0, 0.4), &ground);
        assert!((v - 0.1).abs() < 1e-12);
    }
}
