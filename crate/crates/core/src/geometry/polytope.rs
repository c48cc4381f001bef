//! Convex polytopes as outward-wound face polygons, with half-space clipping.

use nalgebra::{Point3, Vector3};

use super::shape::Plane;

#[derive(Debug, Clone, Default)]
pub struct Polytope {
    pub faces: Vec<Vec<Point3<f64>>>,
}

impl Polytope {
    pub fn from_faces(faces: Vec<Vec<Point3<f64>>>) -> Self {
        Polytope { faces }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.len() < 4
    }

    /// Keeps the part satisfying `plane.signed_distance(x) <= 0`.
    pub fn clip(&self, plane: &Plane) -> Polytope {
        let tol = 1e-12;
        let (lo, hi) = self.faces.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = plane.signed_distance(p);
            (lo.min(d), hi.max(d))
        });
        if hi <= tol {
            return self.clone();
        }
        if lo >= -tol {
            return Polytope::default();
        }
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cap: Vec<Point3<f64>> = Vec::new();
        for face in &self.faces {
            let n = face.len();
            let mut out = Vec::with_capacity(n + 2);
            for i in 0..n {
                let a = face[i];
                let b = face[(i + 1) % n];
                let da = plane.signed_distance(&a);
                let db = plane.signed_distance(&b);
                if da <= tol {
                    out.push(a);
                    if da >= -tol {
                        cap.push(a);
                    }
                }
                if (da < -tol && db > tol) || (da > tol && db < -tol) {
                    let t = da / (da - db);
                    let p = a + (b - a) * t;
                    out.push(p);
                    cap.push(p);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if let Some(cap_face) = order_cap(&cap, &plane.normal) {
            faces.push(cap_face);
        }
        if faces.len() < 4 {
            return Polytope::default();
        }
        Polytope { faces }
    }

    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for face in &self.faces {
            let p0 = face[0].coords;
            for w in face[1..].windows(2) {
                v += p0.dot(&w[0].coords.cross(&w[1].coords));
            }
        }
        (v / 6.0).max(0.0)
    }
}

/// Orders coplanar points counter-clockwise about `normal`, merging duplicates.
fn order_cap(points: &[Point3<f64>], normal: &Vector3<f64>) -> Option<Vec<Point3<f64>>> {
    let mut uniq: Vec<Point3<f64>> = Vec::new();
    for p in points {
        if !uniq.iter().any(|q| (q - p).norm_squared() < 1e-20) {
            uniq.push(*p);
        }
    }
    if uniq.len() < 3 {
        return None;
    }
    let centre = Point3::from(uniq.iter().map(|p| p.coords).sum::<Vector3<f64>>() / uniq.len() as f64);
    let u = (uniq[0] - centre).normalize();
    let w = normal.cross(&u);
    let mut keyed: Vec<(f64, Point3<f64>)> = uniq
        .into_iter()
        .map(|p| {
            let d = p - centre;
            (d.dot(&w).atan2(d.dot(&u)), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let poly: Vec<_> = keyed.into_iter().map(|(_, p)| p).collect();
    let area: Vector3<f64> = (1..poly.len() - 1)
        .map(|i| (poly[i] - poly[0]).cross(&(poly[i + 1] - poly[0])))
        .sum();
    if area.norm() < 1e-18 {
        return None;
    }
    Some(poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Polytope {
        let c = crate::geometry::ConvexShape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap();
        Polytope::from_faces(c.faces().iter().map(|f| f.iter().map(|&i| c.vertices()[i]).collect()).collect())
    }

    #[test]
    fn box_volume() {
        assert!((unit_box().volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_half() {
        let half = unit_box().clip(&Plane::new(Vector3::x(), 0.0));
        assert!((half.volume() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clip_corner() {
        // Cut off the (+,+,+) corner tetrahedron with legs 0.5: volume 0.5³/6.
        let n = Vector3::new(1.0, 1.0, 1.0).normalize();
        let plane = Plane::new(n, n.dot(&Vector3::new(0.5, 0.5, 0.0)));
        let v = unit_box().clip(&plane).volume();
        assert!((v - (1.0 - 0.125 / 6.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn clip_away_everything() {
        let p = unit_box().clip(&Plane::new(Vector3::x(), -0.6));
        assert!(p.is_empty());
        assert_eq!(p.volume(), 0.0);
    }
}
