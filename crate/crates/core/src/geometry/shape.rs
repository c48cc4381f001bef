use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point3, Vector3};

use super::mass::volume_moments;
use crate::{Error, Result};

/// Plane `normal · x = offset` with unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        Plane { normal, offset }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// A convex polyhedron in its body frame.
///
/// Faces are vertex index loops ordered counter-clockwise seen from outside.
/// Derived quantities (volume, centre of gravity, diameter) are computed once
/// at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexShape {
    vertices: Vec<Point3<f64>>,
    faces: Vec<Vec<usize>>,
    planes: Vec<Plane>,
    edges: Vec<(usize, usize)>,
    edge_directions: Vec<Vector3<f64>>,
    volume: f64,
    cog: Point3<f64>,
    diameter: f64,
    area: f64,
}

impl ConvexShape {
    /// Validates and builds a convex polyhedron. Face winding is corrected to
    /// point outward; non-planar faces, non-convex vertex sets, and unused
    /// vertices are rejected.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<Vec<usize>>) -> Result<Self> {
        if vertices.len() < 4 || faces.len() < 4 {
            return Err(Error::InvalidShape("need at least 4 vertices and 4 faces".into()));
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidShape("non-finite vertex".into()));
        }
        let mut diameter: f64 = 0.0;
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[i + 1..] {
                diameter = diameter.max((a - b).norm());
            }
        }
        if diameter <= 0.0 {
            return Err(Error::InvalidShape("zero diameter".into()));
        }
        let tol = 1e-9 * diameter.max(1.0);
        let interior = Point3::from(vertices.iter().map(|v| v.coords).sum::<Vector3<f64>>() / vertices.len() as f64);

        let mut used = vec![false; vertices.len()];
        let mut oriented = Vec::with_capacity(faces.len());
        let mut planes = Vec::with_capacity(faces.len());
        let mut area = 0.0;
        for (fi, face) in faces.into_iter().enumerate() {
            if face.len() < 3 || face.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidShape(format!("face {fi} has bad indices")));
            }
            let mut face = face;
            let mut normal = newell_normal(&vertices, &face);
            let len = normal.norm();
            if len <= tol * tol {
                return Err(Error::InvalidShape(format!("face {fi} has zero area")));
            }
            normal /= len;
            let mut offset = normal.dot(&vertices[face[0]].coords);
            if normal.dot(&interior.coords) > offset {
                face.reverse();
                normal = -normal;
                offset = -offset;
            }
            for &i in &face {
                if (normal.dot(&vertices[i].coords) - offset).abs() > 1e3 * tol {
                    return Err(Error::InvalidShape(format!("face {fi} is not planar")));
                }
                used[i] = true;
            }
            area += 0.5 * len;
            planes.push(Plane::new(normal, offset));
            oriented.push(face);
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidShape("vertex not on any face".into()));
        }
        for (fi, plane) in planes.iter().enumerate() {
            if vertices.iter().any(|v| plane.signed_distance(v) > 1e3 * tol) {
                return Err(Error::InvalidShape(format!("shape is not convex at face {fi}")));
            }
        }

        let mut edge_set = BTreeSet::new();
        for face in &oriented {
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                edge_set.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<_> = edge_set.into_iter().collect();
        let mut edge_directions: Vec<Vector3<f64>> = Vec::new();
        for &(a, b) in &edges {
            let d = (vertices[b] - vertices[a]).normalize();
            if !edge_directions.iter().any(|e| e.cross(&d).norm() < 1e-9) {
                edge_directions.push(d);
            }
        }

        let moments = volume_moments(&vertices, &oriented);
        if moments.volume <= 0.0 {
            return Err(Error::InvalidShape("volume must be positive".into()));
        }
        Ok(ConvexShape {
            vertices,
            faces: oriented,
            planes,
            edges,
            edge_directions,
            volume: moments.volume,
            cog: moments.centroid,
            diameter,
            area,
        })
    }

    /// Axis-aligned box with the given full side lengths, centred at the origin.
    pub fn cuboid(size: Vector3<f64>) -> Result<Self> {
        let h = size * 0.5;
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            let sx = if i & 1 == 0 { -h.x } else { h.x };
            let sy = if i & 2 == 0 { -h.y } else { h.y };
            let sz = if i & 4 == 0 { -h.z } else { h.z };
            vertices.push(Point3::new(sx, sy, sz));
        }
        let faces = vec![
            vec![0, 2, 6, 4], // -x
            vec![1, 5, 7, 3], // +x
            vec![0, 4, 5, 1], // -y
            vec![2, 3, 7, 6], // +y
            vec![0, 1, 3, 2], // -z
            vec![4, 6, 7, 5], // +z
        ];
        ConvexShape::new(vertices, faces)
    }

    pub fn regular_tetrahedron(edge: f64) -> Result<Self> {
        let s = edge / (2.0 * 2f64.sqrt());
        let vertices = vec![
            Point3::new(s, s, s),
            Point3::new(s, -s, -s),
            Point3::new(-s, s, -s),
            Point3::new(-s, -s, s),
        ];
        ConvexShape::new(vertices, vec![vec![0, 1, 2], vec![0, 3, 1], vec![0, 2, 3], vec![1, 3, 2]])
    }

    /// Subdivided icosahedron with all vertices on a sphere of `radius`.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Result<Self> {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector3<f64>> = [
            (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
            (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
            (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect();
        let mut tris: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(tris.len() * 4);
            for [a, b, c] in tris {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let vertices = verts.into_iter().map(|v| Point3::from(v * radius)).collect();
        ConvexShape::new(vertices, tris.into_iter().map(|t| t.to_vec()).collect())
    }

    /// Triangular prism: right-triangle cross-section `base × height` in x–z, extruded `depth` along y.
    pub fn wedge(base: f64, depth: f64, height: f64) -> Result<Self> {
        let (hb, hd) = (base / 2.0, depth / 2.0);
        let vertices = vec![
            Point3::new(-hb, -hd, 0.0),
            Point3::new(hb, -hd, 0.0),
            Point3::new(-hb, -hd, height),
            Point3::new(-hb, hd, 0.0),
            Point3::new(hb, hd, 0.0),
            Point3::new(-hb, hd, height),
        ];
        let faces = vec![vec![0, 1, 2], vec![3, 5, 4], vec![0, 3, 4, 1], vec![0, 2, 5, 3], vec![1, 4, 5, 2]];
        let shape = ConvexShape::new(vertices, faces)?;
        // Re-centre on the centre of gravity so body origin and cog coincide.
        let c = shape.cog.coords;
        let moved = shape.vertices.iter().map(|v| v - c).collect();
        ConvexShape::new(moved, shape.faces)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Unique (mutually non-parallel) edge directions.
    pub fn edge_directions(&self) -> &[Vector3<f64>] {
        &self.edge_directions
    }

    /// Total volume `v_t` (m³).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Centre of gravity of the uniform solid, body frame.
    pub fn cog(&self) -> Point3<f64> {
        self.cog
    }

    /// Maximum pairwise vertex distance `ε_d` (m).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn surface_area(&self) -> f64 {
        self.area
    }

    /// Index of the vertex furthest along `dir`; ties go to the lowest index.
    pub fn support_index(&self, dir: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.coords.dot(dir);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn support(&self, dir: &Vector3<f64>) -> Point3<f64> {
        self.vertices[self.support_index(dir)]
    }

    /// Largest distance from the centre of gravity to a vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| (v - self.cog).norm()).fold(0.0, f64::max)
    }

    /// A cuboid has six faces, twelve edges and three edge directions.
    pub fn is_box_like(&self) -> bool {
        self.faces.len() == 6 && self.edges.len() == 12 && self.edge_directions.len() == 3
    }
}

fn newell_normal(vertices: &[Point3<f64>], face: &[usize]) -> Vector3<f64> {
    let mut n = Vector3::zeros();
    for k in 0..face.len() {
        let a = vertices[face[k]];
        let b = vertices[face[(k + 1) % face.len()]];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}
