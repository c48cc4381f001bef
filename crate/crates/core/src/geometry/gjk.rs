//! GJK distance and EPA penetration queries on posed convex hulls.

use nalgebra::{Point3, Vector3};

use super::pose::Pose;
use super::shape::ConvexShape;

const MAX_ITERATIONS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Query {
    /// Normal points from A into B.
    Separated { distance: f64, normal: Vector3<f64>, point: Point3<f64> },
    Penetrating { depth: f64, normal: Vector3<f64>, point: Point3<f64> },
    Touching,
}

#[derive(Clone, Copy)]
struct Support {
    /// Minkowski difference point a - b.
    w: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
}

struct Pair<'a> {
    a: &'a ConvexShape,
    pa: &'a Pose,
    b: &'a ConvexShape,
    pb: &'a Pose,
}

impl Pair<'_> {
    fn support(&self, d: &Vector3<f64>) -> Support {
        let da = self.pa.rotation.inverse_transform_vector(d);
        let db = self.pb.rotation.inverse_transform_vector(&-d);
        let a = self.pa.transform_point(&self.a.support(&da)).coords;
        let b = self.pb.transform_point(&self.b.support(&db)).coords;
        Support { w: a - b, a, b }
    }
}

/// Signed distance query between two posed convex shapes.
pub fn penetration(a: &ConvexShape, pose_a: &Pose, b: &ConvexShape, pose_b: &Pose) -> Query {
    let pair = Pair { a, pa: pose_a, b, pb: pose_b };
    let scale = a.diameter().max(b.diameter());
    match gjk(&pair, scale) {
        Gjk::Separated(simplex) => separated(&simplex),
        Gjk::Enclosing(simplex) => epa(&pair, simplex, scale),
        Gjk::Touching => Query::Touching,
    }
}

#[allow(clippy::large_enum_variant)]
enum Gjk {
    Separated(Vec<Support>),
    Enclosing([Support; 4]),
    Touching,
}

/// Distance-GJK using the closest point of the current simplex.
fn gjk(pair: &Pair, scale: f64) -> Gjk {
    let c = pair.pa.transform_point(&pair.a.cog()) - pair.pb.transform_point(&pair.b.cog());
    let start = if c.norm() > 1e-12 * scale { c } else { Vector3::x() };
    let mut simplex = vec![pair.support(&-start)];
    let tol = 1e-10 * scale;
    for _ in 0..MAX_ITERATIONS {
        let (closest, reduced) = closest_on_simplex(&simplex);
        simplex = reduced;
        if simplex.len() == 4 {
            return Gjk::Enclosing([simplex[0], simplex[1], simplex[2], simplex[3]]);
        }
        let dist = closest.norm();
        if dist < tol {
            return grow_to_tetrahedron(pair, simplex, scale).map_or(Gjk::Touching, Gjk::Enclosing);
        }
        let d = -closest / dist;
        let s = pair.support(&d);
        // No progress toward the origin: the closest point is final.
        if dist - (-s.w.dot(&d)) <= tol || simplex.iter().any(|p| (p.w - s.w).norm_squared() < tol * tol) {
            return Gjk::Separated(simplex);
        }
        simplex.push(s);
    }
    Gjk::Separated(simplex)
}

/// Closest point to the origin on a simplex and the minimal sub-simplex supporting it.
/// A full tetrahedron containing the origin is returned unchanged.
fn closest_on_simplex(s: &[Support]) -> (Vector3<f64>, Vec<Support>) {
    match s.len() {
        1 => (s[0].w, s.to_vec()),
        2 => closest_segment(s[0], s[1]),
        3 => closest_triangle(s[0], s[1], s[2]),
        _ => closest_tetrahedron(s[0], s[1], s[2], s[3]),
    }
}

fn closest_segment(a: Support, b: Support) -> (Vector3<f64>, Vec<Support>) {
    let ab = b.w - a.w;
    let t = -a.w.dot(&ab);
    let len2 = ab.norm_squared();
    if t <= 0.0 || len2 <= 0.0 {
        return (a.w, vec![a]);
    }
    if t >= len2 {
        return (b.w, vec![b]);
    }
    (a.w + ab * (t / len2), vec![a, b])
}

fn closest_triangle(a: Support, b: Support, c: Support) -> (Vector3<f64>, Vec<Support>) {
    // Voronoi-region test (Ericson, closest point on triangle).
    let (pa, pb, pc) = (a.w, b.w, c.w);
    let ab = pb - pa;
    let ac = pc - pa;
    let ap = -pa;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (pa, vec![a]);
    }
    let bp = -pb;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (pb, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (pa + ab * v, vec![a, b]);
    }
    let cp = -pc;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (pc, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (pa + ac * w, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (pb + (pc - pb) * w, vec![b, c]);
    }
    let denom = va + vb + vc;
    if denom.abs() < 1e-300 {
        return closest_segment(a, b);
    }
    let v = vb / denom;
    let w = vc / denom;
    (pa + ab * v + ac * w, vec![a, b, c])
}

fn closest_tetrahedron(a: Support, b: Support, c: Support, d: Support) -> (Vector3<f64>, Vec<Support>) {
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let mut best: Option<(Vector3<f64>, Vec<Support>)> = None;
    let mut inside = true;
    for (p, q, r, opp) in faces {
        let n = (q.w - p.w).cross(&(r.w - p.w));
        let side_origin = -p.w.dot(&n);
        let side_opp = (opp.w - p.w).dot(&n);
        if side_origin * side_opp < 0.0 {
            inside = false;
            let cand = closest_triangle(p, q, r);
            if best.as_ref().is_none_or(|bst| cand.0.norm_squared() < bst.0.norm_squared()) {
                best = Some(cand);
            }
        }
    }
    if inside {
        return (Vector3::zeros(), vec![a, b, c, d]);
    }
    best.unwrap()
}

/// Expands a degenerate simplex touching the origin into a tetrahedron, if the
/// Minkowski difference has volume around it.
fn grow_to_tetrahedron(pair: &Pair, mut simplex: Vec<Support>, scale: f64) -> Option<[Support; 4]> {
    let dirs = [
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    let tol = 1e-9 * scale;
    while simplex.len() < 4 {
        let mut added = false;
        let mut candidates: Vec<Vector3<f64>> = dirs.to_vec();
        match simplex.len() {
            2 => {
                let e = simplex[1].w - simplex[0].w;
                for d in dirs {
                    let c = e.cross(&d);
                    if c.norm() > 1e-9 {
                        candidates.insert(0, c.normalize());
                    }
                }
            }
            3 => {
                let n = (simplex[1].w - simplex[0].w).cross(&(simplex[2].w - simplex[0].w));
                if n.norm() > 0.0 {
                    candidates.insert(0, -n.normalize());
                    candidates.insert(0, n.normalize());
                }
            }
            _ => {}
        }
        for d in candidates {
            let s = pair.support(&d);
            let gain = match simplex.len() {
                1 => (s.w - simplex[0].w).norm(),
                2 => (s.w - simplex[0].w).cross(&(simplex[1].w - simplex[0].w)).norm() / (simplex[1].w - simplex[0].w).norm(),
                _ => {
                    let n = (simplex[1].w - simplex[0].w).cross(&(simplex[2].w - simplex[0].w));
                    ((s.w - simplex[0].w).dot(&n) / n.norm()).abs()
                }
            };
            if gain > tol {
                simplex.push(s);
                added = true;
                break;
            }
        }
        if !added {
            return None;
        }
    }
    let (_, reduced) = closest_tetrahedron(simplex[0], simplex[1], simplex[2], simplex[3]);
    (reduced.len() == 4).then(|| [simplex[0], simplex[1], simplex[2], simplex[3]])
}

fn separated(simplex: &[Support]) -> Query {
    let (closest, reduced) = closest_on_simplex(simplex);
    let distance = closest.norm();
    if distance <= 0.0 {
        return Query::Touching;
    }
    let (pa, pb) = witness(&reduced, &closest);
    Query::Separated {
        distance,
        normal: -closest / distance,
        point: Point3::from((pa + pb) * 0.5),
    }
}

/// Witness points on A and B for a point `p` of the simplex hull.
fn witness(s: &[Support], p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let l = barycentric(s, p);
    let mut a = Vector3::zeros();
    let mut b = Vector3::zeros();
    for (si, li) in s.iter().zip(l) {
        a += si.a * li;
        b += si.b * li;
    }
    (a, b)
}

fn barycentric(s: &[Support], p: &Vector3<f64>) -> Vec<f64> {
    match s.len() {
        1 => vec![1.0],
        2 => {
            let ab = s[1].w - s[0].w;
            let t = ((p - s[0].w).dot(&ab) / ab.norm_squared().max(1e-300)).clamp(0.0, 1.0);
            vec![1.0 - t, t]
        }
        _ => {
            let v0 = s[1].w - s[0].w;
            let v1 = s[2].w - s[0].w;
            let v2 = p - s[0].w;
            let d00 = v0.dot(&v0);
            let d01 = v0.dot(&v1);
            let d11 = v1.dot(&v1);
            let d20 = v2.dot(&v0);
            let d21 = v2.dot(&v1);
            let den = (d00 * d11 - d01 * d01).max(1e-300);
            let v = (d11 * d20 - d01 * d21) / den;
            let w = (d00 * d21 - d01 * d20) / den;
            vec![1.0 - v - w, v, w]
        }
    }
}

struct Face {
    idx: [usize; 3],
    normal: Vector3<f64>,
    dist: f64,
}

fn make_face(pts: &[Support], i: usize, j: usize, k: usize) -> Option<Face> {
    let n = (pts[j].w - pts[i].w).cross(&(pts[k].w - pts[i].w));
    let len = n.norm();
    if len < 1e-300 {
        return None;
    }
    let normal = n / len;
    Some(Face { idx: [i, j, k], normal, dist: normal.dot(&pts[i].w) })
}

/// Expanding polytope: the face of the Minkowski difference nearest the origin.
fn epa(pair: &Pair, tet: [Support; 4], scale: f64) -> Query {
    let mut pts: Vec<Support> = tet.to_vec();
    let mut faces: Vec<Face> = Vec::new();
    for (i, j, k, l) in [(0, 1, 2, 3), (0, 3, 1, 2), (0, 2, 3, 1), (1, 3, 2, 0)] {
        let (i, j, k) = if (pts[j].w - pts[i].w).cross(&(pts[k].w - pts[i].w)).dot(&(pts[l].w - pts[i].w)) > 0.0 {
            (i, k, j)
        } else {
            (i, j, k)
        };
        if let Some(f) = make_face(&pts, i, j, k) {
            faces.push(f);
        }
    }
    let tol = 1e-10 * scale;
    for _ in 0..MAX_ITERATIONS {
        let Some(best) = (0..faces.len()).min_by(|&x, &y| faces[x].dist.total_cmp(&faces[y].dist)) else {
            return Query::Touching;
        };
        let n = faces[best].normal;
        let dist = faces[best].dist;
        let s = pair.support(&n);
        if s.w.dot(&n) - dist <= tol {
            break;
        }
        let new = pts.len();
        pts.push(s);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        faces.retain(|f| {
            if f.normal.dot(&(s.w - pts[f.idx[0]].w)) > 0.0 {
                for e in 0..3 {
                    let edge = (f.idx[e], f.idx[(e + 1) % 3]);
                    if let Some(pos) = horizon.iter().position(|&(u, v)| u == edge.1 && v == edge.0) {
                        horizon.swap_remove(pos);
                    } else {
                        horizon.push(edge);
                    }
                }
                false
            } else {
                true
            }
        });
        for (u, v) in horizon {
            if let Some(f) = make_face(&pts, u, v, new) {
                faces.push(f);
            }
        }
    }
    let Some(best) = faces.iter().min_by(|x, y| x.dist.total_cmp(&y.dist)) else {
        return Query::Touching;
    };
    let p = best.normal * best.dist;
    let tri = [pts[best.idx[0]], pts[best.idx[1]], pts[best.idx[2]]];
    let (pa, pb) = witness(&tri, &p);
    // Translating A by -depth * normal separates the pair, so the face normal
    // points from A into B.
    Query::Penetrating { depth: best.dist.max(0.0), normal: best.normal, point: Point3::from((pa + pb) * 0.5) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::contact::collide;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separated_cubes_distance() {
        let c = ConvexShape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap();
        match penetration(&c, &Pose::identity(), &c, &Pose::from_translation(1.5, 0.0, 0.0)) {
            Query::Separated { distance, normal, .. } => {
                assert!((distance - 0.5).abs() < 1e-9);
                assert!((normal - Vector3::x()).norm() < 1e-9);
            }
            q => panic!("{q:?}"),
        }
    }

    #[test]
    fn overlapping_cubes_depth() {
        let c = ConvexShape::cuboid(Vector3::new(1.0, 1.0, 1.0)).unwrap();
        match penetration(&c, &Pose::identity(), &c, &Pose::from_translation(0.8, 0.1, 0.0)) {
            Query::Penetrating { depth, normal, .. } => {
                assert!((depth - 0.2).abs() < 1e-9, "{depth}");
                assert!((normal - Vector3::x()).norm() < 1e-9, "{normal}");
            }
            q => panic!("{q:?}"),
        }
    }

    #[test]
    fn epa_agrees_with_sat_on_random_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..300 {
            let sa = Vector3::new(rng.random_range(0.3..1.0), rng.random_range(0.3..1.0), rng.random_range(0.3..1.0));
            let sb = Vector3::new(rng.random_range(0.3..1.0), rng.random_range(0.3..1.0), rng.random_range(0.3..1.0));
            let a = ConvexShape::cuboid(sa).unwrap();
            let b = ConvexShape::cuboid(sb).unwrap();
            let axis = |rng: &mut ChaCha8Rng| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let pa = Pose::from_axis_angle(axis(&mut rng), rng.random_range(0.0..3.0));
            let t = axis(&mut rng) * 0.6;
            let pb = Pose::from_axis_angle(axis(&mut rng), rng.random_range(0.0..3.0)).with_translation(t);
            let sat = collide(&a, &pa, &b, &pb, 0.0);
            if sat.is_empty() || sat.deep {
                continue;
            }
            let sat_depth = sat.points.iter().map(|p| -p.separation).fold(f64::NEG_INFINITY, f64::max);
            if let Query::Penetrating { depth, normal, .. } = penetration(&a, &pa, &b, &pb) {
                // SAT prefers face axes over edge axes within 1e-4 of the scale.
                assert!((depth - sat_depth).abs() < 1e-4, "epa {depth} sat {sat_depth}");
                assert!(normal.dot(&sat.points[0].normal) > 0.99 || (depth - sat_depth).abs() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 50, "{checked}");
    }
}
