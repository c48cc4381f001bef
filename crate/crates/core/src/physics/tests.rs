use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use super::*;
use crate::geometry::{contact_manifold, ConvexShape, ObjectModel, Pose};
use crate::sensor::{CloudIndex, PointCloud};
use crate::ObjectId;

const A: f64 = 0.05;

fn cube() -> Arc<ObjectModel> {
    Arc::new(ObjectModel::new("cube", ConvexShape::cuboid(Vector3::new(A, A, A)).unwrap(), 500.0, 200, 3).unwrap())
}

fn resting(z: f64) -> Pose {
    Pose::from_translation(0.0, 0.0, z)
}

fn world_with(bodies: &[(&str, Pose)]) -> World {
    let mut w = World::new(SolverParams::default());
    let m = cube();
    for (id, pose) in bodies {
        w.add_body(ObjectId::new(*id), m.clone(), *pose).unwrap();
    }
    w
}

fn surface_cloud(w: &World) -> PointCloud {
    PointCloud::new(
        w.bodies()
            .iter()
            .flat_map(|b| b.model.surface_points().iter().map(move |s| b.pose.transform_point(&s.position)))
            .collect(),
    )
}

fn run(w: &World, n: usize) -> World {
    let mut w = w.clone();
    let dt = w.solver.dt;
    for _ in 0..n {
        w.step(dt).unwrap();
    }
    w
}

#[test]
fn resting_cube_does_not_drift() {
    let w0 = world_with(&[("c", resting(A / 2.0))]);
    let w = run(&w0, 100);
    let drift = (w.bodies()[0].pose.translation - w0.bodies()[0].pose.translation).norm();
    assert!(drift < 1e-4, "drift {drift}");
}

#[test]
fn free_fall_matches_ballistic() {
    let mut w = World::vacuum(SolverParams::default());
    w.add_body(ObjectId::new("c"), cube(), resting(1.0)).unwrap();
    let n = 50;
    let w1 = run(&w, n);
    let t = n as f64 * w.solver.dt;
    let fallen = 1.0 - w1.bodies()[0].pose.translation.z;
    let expected = 0.5 * 9.81 * t * t;
    assert!((fallen - expected).abs() < 0.02 * expected, "{fallen} vs {expected}");
    let kin = measure_kinematics(&w, &w1, t).unwrap();
    let a = kin.bodies[&ObjectId::new("c")].linear_acceleration.norm();
    assert!((a - 9.81).abs() < 0.02 * 9.81);
}

#[test]
fn drop_before_contact_is_ballistic() {
    let solver = SolverParams { dt: 1.0 / 1000.0, ..SolverParams::default() };
    let mut w = World::new(solver);
    w.add_body(ObjectId::new("c"), cube(), resting(A / 2.0 + 0.1)).unwrap();
    // 0.1 s of fall covers 0.049 m, well short of the ground.
    let w1 = run(&w, 100);
    let fallen = A / 2.0 + 0.1 - w1.bodies()[0].pose.translation.z;
    let expected = 0.5 * 9.81 * 0.01;
    assert!((fallen - expected).abs() < 0.02 * expected);
}

#[test]
fn floating_velocity_is_linear_in_steps() {
    let mut w = World::vacuum(SolverParams::default());
    w.add_body(ObjectId::new("c"), cube(), resting(0.0)).unwrap();
    let n = 37;
    let w1 = run(&w, n);
    let v = w1.bodies()[0].linear_velocity;
    let expected = -(n as f64) * w.solver.dt * 9.81;
    assert!((v.z - expected).abs() < 1e-9);
    assert!(v.x.abs() < 1e-12 && v.y.abs() < 1e-12);
}

#[test]
fn nonfinite_state_names_the_body() {
    let mut w = World::vacuum(SolverParams::default());
    w.add_body(ObjectId::new("bad"), cube(), resting(0.0)).unwrap();
    w.body_mut(&ObjectId::new("bad")).unwrap().linear_velocity = Vector3::new(f64::NAN, 0.0, 0.0);
    match w.step(0.004) {
        Err(crate::Error::NonFinite(id)) => assert_eq!(id.as_str(), "bad"),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn duplicate_and_ground_ids_rejected() {
    let mut w = world_with(&[("c", resting(A / 2.0))]);
    assert!(w.add_body(ObjectId::new("c"), cube(), resting(1.0)).is_err());
    assert!(w.add_body(ObjectId::ground(), cube(), resting(1.0)).is_err());
}

#[test]
fn kinematics_definitions() {
    let w0 = world_with(&[("c", resting(1.0))]);
    let zero = measure_kinematics(&w0, &w0, 0.4).unwrap();
    let k = zero.bodies[&ObjectId::new("c")];
    assert_eq!(k.linear_acceleration, Vector3::zeros());
    assert_eq!(k.angular_acceleration, Vector3::zeros());

    let theta = 0.3;
    let mut w1 = w0.clone();
    w1.set_pose(&ObjectId::new("c"), Pose::from_axis_angle(Vector3::z(), theta).with_translation(Vector3::new(0.0, 0.0, 1.0)))
        .unwrap();
    let k = measure_kinematics(&w0, &w1, 0.4).unwrap().bodies[&ObjectId::new("c")];
    assert!((k.angular_acceleration.norm() - 2.0 * theta / 0.16).abs() < 1e-6);
    assert!((k.rotation - theta).abs() < 1e-12);

    let other = world_with(&[("d", resting(1.0))]);
    assert!(measure_kinematics(&w0, &other, 0.4).is_err());
    assert!(measure_kinematics(&w0, &World::new(SolverParams::default()), 0.4).is_err());
}

#[test]
fn two_body_interpenetration_is_resolved() {
    let overlap = 0.02;
    let w0 = world_with(&[("a", Pose::from_translation(0.0, 0.0, A / 2.0)), ("b", Pose::from_translation(A - overlap, 0.0, A / 2.0))]);
    let depth = |w: &World| {
        let (a, b) = (&w.bodies()[0], &w.bodies()[1]);
        contact_manifold(&a.model, &a.pose, &b.model, &b.pose).max_depth()
    };
    let before = depth(&w0);
    assert!((before - overlap).abs() < 1e-9);
    let index = CloudIndex::new(&PointCloud::default(), 0.015);
    let (w1, _) = simulate_world(&w0, &SimContext::new(&index)).unwrap();
    let after = depth(&w1);
    assert!(after < before / 10.0, "depth {after}");
}

#[test]
fn stable_cube_scores_stable() {
    let w0 = world_with(&[("c", resting(A / 2.0))]);
    let cloud = surface_cloud(&w0);
    let index = CloudIndex::new(&cloud, 0.015);
    let mut ctx = SimContext::new(&index);
    // Defaults cap the stability factor near 0.776; a steeper logistic is
    // needed for a 0.9 floor.
    ctx.consistency.sigma_b = 80.0;
    let (_, score) = simulate_world(&w0, &ctx).unwrap();
    let s = &score.objects[&ObjectId::new("c")];
    assert!(s.logs.stability.exp() >= 0.9, "stability {}", s.logs.stability.exp());
    assert!(s.diagnostics.visibility > 0.99);
}

#[test]
fn hovering_cube_settles_and_pays_transition() {
    let hover = world_with(&[("c", resting(A / 2.0 + 0.05))]);
    let index = CloudIndex::new(&PointCloud::default(), 0.015);
    let ctx = SimContext::new(&index);
    let (w1, score) = simulate_world(&hover, &ctx).unwrap();
    let z = w1.bodies()[0].pose.translation.z;
    assert!((z - A / 2.0).abs() < 2e-3, "settled at {z}");

    let stat = world_with(&[("c", resting(A / 2.0))]);
    let (_, static_score) = simulate_world(&stat, &ctx).unwrap();
    let id = ObjectId::new("c");
    assert!(score.objects[&id].logs.transition < static_score.objects[&id].logs.stability);
}

#[test]
fn stacked_scene_settles_to_rest() {
    let w0 = world_with(&[("a", resting(A / 2.0)), ("b", resting(1.5 * A)), ("c", resting(2.5 * A))]);
    let w = run(&w0, 100);
    assert!(w.kinetic_energy() < 1e-6, "kinetic energy {}", w.kinetic_energy());
}

#[test]
fn guiding_fixed_point() {
    let w0 = world_with(&[("a", resting(A / 2.0)), ("b", resting(1.5 * A))]);
    let cloud = surface_cloud(&w0);
    let index = CloudIndex::new(&cloud, 0.015);
    let (w1, _) = simulate_world(&w0, &SimContext::new(&index)).unwrap();
    for (b0, b1) in w0.bodies().iter().zip(w1.bodies()) {
        assert!((b1.pose.translation - b0.pose.translation).norm() < 1e-3);
    }
}

#[test]
fn clones_step_identically() {
    let w0 = world_with(&[("a", Pose::from_axis_angle(Vector3::new(1.0, 0.2, 0.0), 0.3).with_translation(Vector3::new(0.0, 0.0, 0.06))), ("b", resting(0.2))]);
    let (a, b) = (run(&w0, 60), run(&w0.clone(), 60));
    for (x, y) in a.bodies().iter().zip(b.bodies()) {
        assert_eq!(x.pose.translation.map(f64::to_bits), y.pose.translation.map(f64::to_bits));
        assert_eq!(x.pose.rotation.coords.map(f64::to_bits), y.pose.rotation.coords.map(f64::to_bits));
        assert_eq!(x.linear_velocity.map(f64::to_bits), y.linear_velocity.map(f64::to_bits));
    }
}

#[test]
fn simulate_world_is_deterministic_and_counts_calls() {
    let w0 = world_with(&[("a", resting(A / 2.0 + 0.002)), ("b", Pose::from_translation(0.01, 0.0, 1.5 * A + 0.004))]);
    let cloud = surface_cloud(&w0);
    let index = CloudIndex::new(&cloud, 0.015);
    let counter = AtomicUsize::new(0);
    let mut ctx = SimContext::new(&index);
    ctx.counter = Some(&counter);
    let (w1, s1) = simulate_world(&w0, &ctx).unwrap();
    let (w2, s2) = simulate_world(&w0, &ctx).unwrap();
    assert_eq!(counter.load(Ordering::Relaxed), 2);
    assert_eq!(s1.log_prob.to_bits(), s2.log_prob.to_bits());
    assert_eq!(w1.poses(), w2.poses());
    assert_eq!(w1.support_graph, w2.support_graph);
}

/// Rocking back onto a face from an edge: compare the rotation over the
/// window with a fine RK4 integration of the equivalent inverted pendulum.
#[test]
fn edge_rocking_matches_pendulum() {
    let tilt = 15f64.to_radians();
    let solver = SolverParams { dt: 1.0 / 1000.0, friction: 1.0, ..SolverParams::default() };
    let m = cube();
    let rot = Pose::from_axis_angle(Vector3::y(), tilt);
    let edge = rot.transform_point(&Point3::new(A / 2.0, 0.0, -A / 2.0));
    let pose = rot.with_translation(Vector3::new(0.0, 0.0, -edge.z));
    let mut w = World::new(solver);
    w.add_body(ObjectId::new("c"), m.clone(), pose).unwrap();
    let t = 0.05;
    let w1 = run(&w, (t / solver.dt).round() as usize);
    let sim = w1.bodies()[0].pose.rotation.angle_to(&pose.rotation);

    // phi: angle of the COG from the vertical through the edge.
    let r = A / 2.0 * 2f64.sqrt();
    let i_edge = m.mass() * A * A * (1.0 / 6.0 + 1.0 / 2.0);
    let k = m.mass() * 9.81 * r / i_edge;
    let phi0 = std::f64::consts::FRAC_PI_4 - tilt;
    let f = |phi: f64| k * phi.sin();
    let (mut phi, mut om, h) = (phi0, 0.0, 1e-5);
    for _ in 0..(t / h).round() as usize {
        let (k1p, k1o) = (om, f(phi));
        let (k2p, k2o) = (om + 0.5 * h * k1o, f(phi + 0.5 * h * k1p));
        let (k3p, k3o) = (om + 0.5 * h * k2o, f(phi + 0.5 * h * k2p));
        let (k4p, k4o) = (om + h * k3o, f(phi + h * k3p));
        phi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        om += h / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o);
    }
    let oracle = phi - phi0;
    assert!(oracle < tilt);
    assert!((sim - oracle).abs() < 0.05 * oracle, "sim {sim} vs pendulum {oracle}");
}
