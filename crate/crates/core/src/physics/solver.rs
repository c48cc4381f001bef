//! Sequential-impulse contact solver with split-impulse position correction.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, Vector3};

use super::world::{CachedImpulse, PairContact, World};
use crate::geometry::{collide, plane_manifold, ContactManifold};
use crate::ObjectId;

struct State {
    cog: Point3<f64>,
    inv_mass: f64,
    inv_inertia: Matrix3<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
    pv: Vector3<f64>,
    pw: Vector3<f64>,
}

impl State {
    fn fixed() -> Self {
        State {
            cog: Point3::origin(),
            inv_mass: 0.0,
            inv_inertia: Matrix3::zeros(),
            v: Vector3::zeros(),
            w: Vector3::zeros(),
            pv: Vector3::zeros(),
            pw: Vector3::zeros(),
        }
    }
}

struct Constraint {
    /// `None` for the ground.
    a: Option<usize>,
    b: usize,
    pair: usize,
    n: Vector3<f64>,
    t: [Vector3<f64>; 2],
    ra: Vector3<f64>,
    rb: Vector3<f64>,
    mass_n: f64,
    mass_t: [f64; 2],
    separation: f64,
    lambda_n: f64,
    lambda_t: [f64; 2],
    lambda_p: f64,
}

fn tangents(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let helper = if n.x.abs() < 0.57735 {
        Vector3::x()
    } else if n.y.abs() < 0.57735 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = n.cross(&helper).normalize();
    [t1, n.cross(&t1)]
}

fn effective_mass(a: &State, b: &State, ra: &Vector3<f64>, rb: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    let ca = ra.cross(dir);
    let cb = rb.cross(dir);
    let k = a.inv_mass + b.inv_mass + ca.dot(&(a.inv_inertia * ca)) + cb.dot(&(b.inv_inertia * cb));
    if k > 0.0 { 1.0 / k } else { 0.0 }
}

fn pair_states<'s>(ground: &'s mut State, states: &'s mut [State], a: Option<usize>, b: usize) -> (&'s mut State, &'s mut State) {
    match a {
        None => (ground, &mut states[b]),
        Some(a) => {
            debug_assert!(a < b);
            let (lo, hi) = states.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        }
    }
}

fn apply(a: &mut State, b: &mut State, ra: &Vector3<f64>, rb: &Vector3<f64>, p: &Vector3<f64>) {
    a.v -= p * a.inv_mass;
    a.w -= a.inv_inertia * ra.cross(p);
    b.v += p * b.inv_mass;
    b.w += b.inv_inertia * rb.cross(p);
}

fn apply_pseudo(a: &mut State, b: &mut State, ra: &Vector3<f64>, rb: &Vector3<f64>, p: &Vector3<f64>) {
    a.pv -= p * a.inv_mass;
    a.pw -= a.inv_inertia * ra.cross(p);
    b.pv += p * b.inv_mass;
    b.pw += b.inv_inertia * rb.cross(p);
}

fn relative_velocity(a: &State, b: &State, ra: &Vector3<f64>, rb: &Vector3<f64>) -> Vector3<f64> {
    (b.v + b.w.cross(rb)) - (a.v + a.w.cross(ra))
}

fn relative_pseudo_velocity(a: &State, b: &State, ra: &Vector3<f64>, rb: &Vector3<f64>) -> Vector3<f64> {
    (b.pv + b.pw.cross(rb)) - (a.pv + a.pw.cross(ra))
}

/// Position-correction velocity `(linear, angular)` of one body.
type Pseudo = (Vector3<f64>, Vector3<f64>);

/// Detects contacts, resolves velocities in place, and returns the resolved
/// contacts plus per-body pseudo-velocities for position correction.
pub(crate) fn solve(world: &mut World, dt: f64) -> (Vec<PairContact>, Vec<Pseudo>) {
    let params = world.solver;
    let ground_plane = world.ground.map(|g| g.plane());
    let ground_id = ObjectId::ground();

    let mut states: Vec<State> = world
        .bodies()
        .iter()
        .map(|b| State {
            cog: b.cog(),
            inv_mass: b.inverse_mass(),
            inv_inertia: b.inverse_inertia_world(),
            v: b.linear_velocity,
            w: b.angular_velocity,
            pv: Vector3::zeros(),
            pw: Vector3::zeros(),
        })
        .collect();
    let mut ground = State::fixed();

    // Narrowphase over all candidate pairs, in fixed order.
    let bodies = world.bodies();
    let mut pairs: Vec<(Option<usize>, usize, ContactManifold)> = Vec::new();
    for (j, bj) in bodies.iter().enumerate() {
        if let Some(plane) = &ground_plane {
            let m = plane_manifold(bj.model.shape(), &bj.pose, plane, params.contact_margin);
            if !m.is_empty() {
                pairs.push((None, j, m));
            }
        }
    }
    for i in 0..bodies.len() {
        for j in (i + 1)..bodies.len() {
            let (bi, bj) = (&bodies[i], &bodies[j]);
            let reach = bi.model.shape().bounding_radius() + bj.model.shape().bounding_radius() + params.contact_margin;
            if (states[i].cog - states[j].cog).norm_squared() > reach * reach {
                continue;
            }
            let m = collide(bi.model.shape(), &bi.pose, bj.model.shape(), &bj.pose, params.contact_margin);
            if !m.is_empty() {
                pairs.push((Some(i), j, m));
            }
        }
    }
    pairs.sort_by(|x, y| (x.0.map_or(0, |a| a + 1), x.1).cmp(&(y.0.map_or(0, |a| a + 1), y.1)));

    let mut constraints: Vec<Constraint> = Vec::new();
    for (pi, (a, b, m)) in pairs.iter().enumerate() {
        let a_id = a.map_or(ground_id.clone(), |a| bodies[a].id.clone());
        let b_body = &bodies[*b];
        let cached = if params.warm_start { world.cache.entries.get(&(a_id, b_body.id.clone())) } else { None };
        let match_tol = 0.02 * b_body.model.shape().diameter();
        for p in &m.points {
            let (sa, sb) = pair_states(&mut ground, &mut states, *a, *b);
            let ra = if a.is_some() { p.position - sa.cog } else { Vector3::zeros() };
            let rb = p.position - sb.cog;
            let t = tangents(&p.normal);
            let mut c = Constraint {
                a: *a,
                b: *b,
                pair: pi,
                n: p.normal,
                t,
                ra,
                rb,
                mass_n: effective_mass(sa, sb, &ra, &rb, &p.normal),
                mass_t: [effective_mass(sa, sb, &ra, &rb, &t[0]), effective_mass(sa, sb, &ra, &rb, &t[1])],
                separation: p.separation,
                lambda_n: 0.0,
                lambda_t: [0.0; 2],
                lambda_p: 0.0,
            };
            if let Some(entries) = cached {
                let local = b_body.pose.inverse_transform_point(&p.position);
                let best = entries
                    .iter()
                    .map(|e| ((e.local - local).norm(), e))
                    .filter(|(d, _)| *d < match_tol)
                    .min_by(|x, y| x.0.total_cmp(&y.0));
                if let Some((_, e)) = best {
                    c.lambda_n = e.normal;
                    c.lambda_t = e.tangent;
                    let impulse = c.n * c.lambda_n + c.t[0] * c.lambda_t[0] + c.t[1] * c.lambda_t[1];
                    apply(sa, sb, &c.ra, &c.rb, &impulse);
                }
            }
            constraints.push(c);
        }
    }

    for _ in 0..params.iterations {
        for c in &mut constraints {
            let (sa, sb) = pair_states(&mut ground, &mut states, c.a, c.b);
            // Friction, bounded by the current normal impulse.
            let limit = params.friction * c.lambda_n;
            for k in 0..2 {
                let vt = relative_velocity(sa, sb, &c.ra, &c.rb).dot(&c.t[k]);
                let old = c.lambda_t[k];
                c.lambda_t[k] = (old - c.mass_t[k] * vt).clamp(-limit, limit);
                let p = c.t[k] * (c.lambda_t[k] - old);
                apply(sa, sb, &c.ra, &c.rb, &p);
            }
            // Non-penetration; speculative contacts may close their gap this step.
            let vn = relative_velocity(sa, sb, &c.ra, &c.rb).dot(&c.n);
            let target = -c.separation.max(0.0) / dt;
            let old = c.lambda_n;
            c.lambda_n = (old + c.mass_n * (target - vn)).max(0.0);
            let p = c.n * (c.lambda_n - old);
            apply(sa, sb, &c.ra, &c.rb, &p);
        }
    }

    for _ in 0..params.iterations {
        for c in &mut constraints {
            let depth = -c.separation - params.slop;
            if depth <= 0.0 {
                continue;
            }
            let (sa, sb) = pair_states(&mut ground, &mut states, c.a, c.b);
            let vn = relative_pseudo_velocity(sa, sb, &c.ra, &c.rb).dot(&c.n);
            let target = params.baumgarte * depth / dt;
            let old = c.lambda_p;
            c.lambda_p = (old + c.mass_n * (target - vn)).max(0.0);
            let p = c.n * (c.lambda_p - old);
            apply_pseudo(sa, sb, &c.ra, &c.rb, &p);
        }
    }

    // Write back velocities and refresh the warm-start cache.
    let mut contacts: Vec<PairContact> = pairs
        .iter()
        .map(|(a, b, m)| PairContact {
            a: a.map_or(ground_id.clone(), |a| world.bodies()[a].id.clone()),
            b: world.bodies()[*b].id.clone(),
            manifold: m.clone(),
            normal_impulses: Vec::with_capacity(m.points.len()),
        })
        .collect();
    let mut cache: BTreeMap<(ObjectId, ObjectId), Vec<CachedImpulse>> = BTreeMap::new();
    for c in &constraints {
        contacts[c.pair].normal_impulses.push(c.lambda_n);
        let pc = &contacts[c.pair];
        let b_body = &world.bodies()[c.b];
        let local = b_body.pose.inverse_transform_point(&(b_body.cog() + c.rb));
        let entry = CachedImpulse { local, normal: c.lambda_n, tangent: c.lambda_t };
        cache.entry((pc.a.clone(), pc.b.clone())).or_default().push(entry);
    }
    world.cache.entries = cache;
    let mut pseudo = Vec::with_capacity(states.len());
    for (body, s) in world.bodies_mut().iter_mut().zip(&states) {
        body.linear_velocity = s.v;
        body.angular_velocity = s.w;
        pseudo.push((s.pv, s.pw));
    }
    (contacts, pseudo)
}
