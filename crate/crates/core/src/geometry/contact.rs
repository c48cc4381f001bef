//! Narrowphase: separating-axis test with face clipping for convex polyhedra,
//! vertex–plane contacts for the ground, and manifold reduction.

use nalgebra::{Point3, Vector3};

use super::gjk;
use super::model::ObjectModel;
use super::pose::Pose;
use super::shape::{ConvexShape, Plane};

/// Above this many edge-direction pairs the SAT edge sweep is replaced by GJK/EPA.
const MAX_SAT_EDGE_PAIRS: usize = 2048;
const MAX_MANIFOLD_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// World-frame contact location (midway between the surfaces).
    pub position: Point3<f64>,
    /// Unit normal pointing from body A into body B.
    pub normal: Vector3<f64>,
    /// Signed surface distance along the normal; negative when overlapping.
    pub separation: f64,
    /// Penetration depth `max(0, -separation)`, clamped for deep overlaps.
    pub depth: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactManifold {
    pub points: Vec<ContactPoint>,
    /// Set when the raw overlap exceeded half the smaller shape diameter and depths were clamped.
    pub deep: bool,
}

impl ContactManifold {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_depth(&self) -> f64 {
        self.points.iter().map(|p| p.depth).fold(0.0, f64::max)
    }

    pub fn flipped(mut self) -> Self {
        for p in &mut self.points {
            p.normal = -p.normal;
        }
        self
    }
}

/// Contact manifold of two posed models, reporting touching or overlapping
/// contacts only. Swapping the arguments flips the normals and leaves the
/// points and depths unchanged.
pub fn contact_manifold(a: &ObjectModel, pose_a: &Pose, b: &ObjectModel, pose_b: &Pose) -> ContactManifold {
    if canonical_order(a, pose_a, b, pose_b) {
        collide(a.shape(), pose_a, b.shape(), pose_b, 0.0)
    } else {
        collide(b.shape(), pose_b, a.shape(), pose_a, 0.0).flipped()
    }
}

fn canonical_order(a: &ObjectModel, pose_a: &Pose, b: &ObjectModel, pose_b: &Pose) -> bool {
    let key = |m: &ObjectModel, p: &Pose| {
        let q = p.quaternion_wxyz();
        let t = p.translation;
        (m.name().to_string(), [t.x, t.y, t.z, q[0], q[1], q[2], q[3]].map(ordered))
    };
    key(a, pose_a) <= key(b, pose_b)
}

fn ordered(v: f64) -> i64 {
    let bits = v.to_bits() as i64;
    if bits < 0 { bits ^ i64::MAX } else { bits }
}

/// Shape in world coordinates.
struct WorldHull<'a> {
    shape: &'a ConvexShape,
    verts: Vec<Point3<f64>>,
    planes: Vec<Plane>,
    edge_dirs: Vec<Vector3<f64>>,
    centre: Point3<f64>,
}

impl<'a> WorldHull<'a> {
    fn new(shape: &'a ConvexShape, pose: &Pose) -> Self {
        let verts: Vec<_> = shape.vertices().iter().map(|v| pose.transform_point(v)).collect();
        let planes = shape
            .planes()
            .iter()
            .zip(shape.faces())
            .map(|(p, f)| {
                let n = pose.transform_vector(&p.normal);
                Plane::new(n, n.dot(&verts[f[0]].coords))
            })
            .collect();
        let edge_dirs = shape.edge_directions().iter().map(|d| pose.transform_vector(d)).collect();
        WorldHull { shape, verts, planes, edge_dirs, centre: pose.transform_point(&shape.cog()) }
    }

    fn min_along(&self, axis: &Vector3<f64>) -> f64 {
        self.verts.iter().map(|v| axis.dot(&v.coords)).fold(f64::INFINITY, f64::min)
    }

    fn max_along(&self, axis: &Vector3<f64>) -> f64 {
        self.verts.iter().map(|v| axis.dot(&v.coords)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn face_polygon(&self, face: usize) -> Vec<Point3<f64>> {
        self.shape.faces()[face].iter().map(|&i| self.verts[i]).collect()
    }
}

/// Deepest face of `reference` against `other`: (separation, face index).
fn face_query(reference: &WorldHull, other: &WorldHull) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, p) in reference.planes.iter().enumerate() {
        let s = other.min_along(&p.normal) - p.offset;
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

/// Best edge–edge axis: (separation, axis oriented A→B, edge dir index A, edge dir index B).
fn edge_query(a: &WorldHull, b: &WorldHull) -> Option<(f64, Vector3<f64>, usize, usize)> {
    let mut best: Option<(f64, Vector3<f64>, usize, usize)> = None;
    for (i, ea) in a.edge_dirs.iter().enumerate() {
        for (j, eb) in b.edge_dirs.iter().enumerate() {
            let c = ea.cross(eb);
            let len = c.norm();
            if len < 1e-6 {
                continue;
            }
            let axis = c / len;
            let forward = b.min_along(&axis) - a.max_along(&axis);
            let backward = a.min_along(&axis) - b.max_along(&axis);
            let (s, ax) = if forward >= backward { (forward, axis) } else { (backward, -axis) };
            if best.is_none_or(|(bs, ..)| s > bs) {
                best = Some((s, ax, i, j));
            }
        }
    }
    best
}

/// Contact manifold between two posed convex shapes, keeping contacts whose
/// separation is at most `margin`.
pub fn collide(a: &ConvexShape, pose_a: &Pose, b: &ConvexShape, pose_b: &Pose, margin: f64) -> ContactManifold {
    let ha = WorldHull::new(a, pose_a);
    let hb = WorldHull::new(b, pose_b);
    let ra = a.bounding_radius();
    let rb = b.bounding_radius();
    if (ha.centre - hb.centre).norm() > ra + rb + margin {
        return ContactManifold::default();
    }
    let deep_limit = 0.5 * a.diameter().min(b.diameter());
    let scale = a.diameter().max(b.diameter());

    if a.edge_directions().len() * b.edge_directions().len() > MAX_SAT_EDGE_PAIRS {
        return gjk_manifold(a, pose_a, b, pose_b, margin, deep_limit);
    }

    let (sep_a, face_a) = face_query(&ha, &hb);
    if sep_a > margin {
        return ContactManifold::default();
    }
    let (sep_b, face_b) = face_query(&hb, &ha);
    if sep_b > margin {
        return ContactManifold::default();
    }
    let edge = edge_query(&ha, &hb);
    if let Some((s, ..)) = edge {
        if s > margin {
            return ContactManifold::default();
        }
    }

    let face_tol = 1e-9 * scale;
    let edge_tol = 1e-4 * scale;
    let best_face = sep_a.max(sep_b);
    let mut points = match edge {
        Some((s, axis, ia, ib)) if s > best_face + edge_tol => edge_contact(&ha, &hb, s, axis, ia, ib),
        _ if sep_b > sep_a + face_tol => {
            clip_face(&hb, face_b, &ha, margin).into_iter().map(|mut p| {
                p.normal = -p.normal;
                p
            }).collect()
        }
        _ => clip_face(&ha, face_a, &hb, margin),
    };
    if points.len() > MAX_MANIFOLD_POINTS {
        points = reduce(points);
    }
    finish(points, deep_limit)
}

/// Contacts between a posed shape and a plane; the plane plays body A, so
/// normals equal the plane normal.
pub fn plane_manifold(shape: &ConvexShape, pose: &Pose, plane: &Plane, margin: f64) -> ContactManifold {
    let centre = pose.transform_point(&shape.cog());
    if plane.signed_distance(&centre) > shape.bounding_radius() + margin {
        return ContactManifold::default();
    }
    let mut points: Vec<ContactPoint> = shape
        .vertices()
        .iter()
        .map(|v| pose.transform_point(v))
        .filter_map(|p| {
            let s = plane.signed_distance(&p);
            (s <= margin).then(|| ContactPoint {
                position: p - plane.normal * (0.5 * s),
                normal: plane.normal,
                separation: s,
                depth: 0.0,
            })
        })
        .collect();
    if points.len() > MAX_MANIFOLD_POINTS {
        points = reduce(points);
    }
    finish(points, 0.5 * shape.diameter())
}

fn finish(mut points: Vec<ContactPoint>, deep_limit: f64) -> ContactManifold {
    let mut deep = false;
    for p in &mut points {
        let raw = (-p.separation).max(0.0);
        if raw > deep_limit {
            deep = true;
        }
        p.depth = raw.min(deep_limit);
    }
    ContactManifold { points, deep }
}

/// Clips the most anti-parallel face of `incident` against the side planes of
/// `reference`'s face and keeps points below the reference plane. Normals
/// point out of the reference shape.
fn clip_face(reference: &WorldHull, face: usize, incident: &WorldHull, margin: f64) -> Vec<ContactPoint> {
    let plane = reference.planes[face];
    let n = plane.normal;
    let inc_face = (0..incident.planes.len())
        .min_by(|&i, &j| incident.planes[i].normal.dot(&n).total_cmp(&incident.planes[j].normal.dot(&n)))
        .unwrap_or(0);
    let mut poly = incident.face_polygon(inc_face);
    let ref_poly = reference.face_polygon(face);
    for k in 0..ref_poly.len() {
        let v0 = ref_poly[k];
        let v1 = ref_poly[(k + 1) % ref_poly.len()];
        let side_n = (v1 - v0).cross(&n);
        let len = side_n.norm();
        if len < 1e-15 {
            continue;
        }
        let side = Plane::new(side_n / len, side_n.dot(&v0.coords) / len);
        poly = clip_polygon(&poly, &side);
        if poly.is_empty() {
            break;
        }
    }
    poly.into_iter()
        .filter_map(|p| {
            let s = plane.signed_distance(&p);
            (s <= margin).then(|| ContactPoint {
                position: p - n * (0.5 * s),
                normal: n,
                separation: s,
                depth: 0.0,
            })
        })
        .collect()
}

/// Sutherland–Hodgman: keep the part of `poly` with `signed_distance <= 0`.
fn clip_polygon(poly: &[Point3<f64>], plane: &Plane) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let da = plane.signed_distance(&a);
        let db = plane.signed_distance(&b);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            out.push(a + (b - a) * (da / (da - db)));
        }
    }
    out
}

fn edge_contact(a: &WorldHull, b: &WorldHull, sep: f64, axis: Vector3<f64>, ia: usize, ib: usize) -> Vec<ContactPoint> {
    let pick = |h: &WorldHull, dir_index: usize, along: Vector3<f64>| -> (Point3<f64>, Point3<f64>) {
        let dir = h.edge_dirs[dir_index];
        let mut best = (f64::NEG_INFINITY, Point3::origin(), Point3::origin());
        for &(i, j) in h.shape.edges() {
            let (p, q) = (h.verts[i], h.verts[j]);
            let e = q - p;
            if e.cross(&dir).norm() > 1e-6 * e.norm() {
                continue;
            }
            let score = along.dot(&(p.coords + q.coords));
            if score > best.0 {
                best = (score, p, q);
            }
        }
        (best.1, best.2)
    };
    let (p1, q1) = pick(a, ia, axis);
    let (p2, q2) = pick(b, ib, -axis);
    let (c1, c2) = closest_points_segments(p1, q1, p2, q2);
    vec![ContactPoint {
        position: Point3::from((c1.coords + c2.coords) * 0.5),
        normal: axis,
        separation: sep,
        depth: 0.0,
    }]
}

fn closest_points_segments(p1: Point3<f64>, q1: Point3<f64>, p2: Point3<f64>, q2: Point3<f64>) -> (Point3<f64>, Point3<f64>) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return (p1, p2);
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-18 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

/// Keeps the deepest point plus the three that maximise the spanned contact area.
fn reduce(points: Vec<ContactPoint>) -> Vec<ContactPoint> {
    let n = points[0].normal;
    let deepest = (0..points.len())
        .min_by(|&i, &j| points[i].separation.total_cmp(&points[j].separation))
        .unwrap();
    let p0 = points[deepest].position;
    let far = (0..points.len())
        .max_by(|&i, &j| {
            (points[i].position - p0).norm_squared().total_cmp(&(points[j].position - p0).norm_squared()).then(j.cmp(&i))
        })
        .unwrap();
    let p1 = points[far].position;
    let area = |a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>| (b - a).cross(&(c - a)).dot(&n);
    let third = (0..points.len())
        .max_by(|&i, &j| {
            area(&p0, &p1, &points[i].position).abs().total_cmp(&area(&p0, &p1, &points[j].position).abs()).then(j.cmp(&i))
        })
        .unwrap();
    let (mut ia, mut ib, mut ic) = (deepest, far, third);
    if area(&points[ia].position, &points[ib].position, &points[ic].position) < 0.0 {
        std::mem::swap(&mut ib, &mut ic);
    }
    let tri = [points[ia].position, points[ib].position, points[ic].position];
    let added = |q: &Point3<f64>| -> f64 {
        (0..3).map(|k| -area(&tri[k], &tri[(k + 1) % 3], q)).fold(0.0, f64::max)
    };
    let fourth = (0..points.len())
        .filter(|&i| i != ia && i != ib && i != ic)
        .max_by(|&i, &j| added(&points[i].position).total_cmp(&added(&points[j].position)).then(j.cmp(&i)));
    let mut keep = vec![ia, ib, ic];
    if let Some(f) = fourth {
        if added(&points[f].position) > 0.0 {
            keep.push(f);
        }
    }
    ia = keep[0];
    let _ = ia;
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| points[i]).collect()
}

fn gjk_manifold(a: &ConvexShape, pose_a: &Pose, b: &ConvexShape, pose_b: &Pose, margin: f64, deep_limit: f64) -> ContactManifold {
    match gjk::penetration(a, pose_a, b, pose_b) {
        gjk::Query::Penetrating { depth, normal, point } => finish(
            vec![ContactPoint { position: point, normal, separation: -depth, depth: 0.0 }],
            deep_limit,
        ),
        gjk::Query::Separated { distance, normal, point } if distance <= margin => finish(
            vec![ContactPoint { position: point, normal, separation: distance, depth: 0.0 }],
            deep_limit,
        ),
        _ => ContactManifold::default(),
    }
}
