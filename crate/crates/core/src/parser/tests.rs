use std::sync::Arc;

use nalgebra::Vector3;

use super::*;
use crate::geometry::ConvexShape;
use crate::sensor::{render_cloud, CameraModel};
use nalgebra::Point3;

const A: f64 = 0.05;

fn cube() -> Arc<ObjectModel> {
    Arc::new(ObjectModel::new("cube", ConvexShape::cuboid(Vector3::new(A, A, A)).unwrap(), 500.0, 200, 5).unwrap())
}

fn id(s: &str) -> ObjectId {
    ObjectId::new(s)
}

fn on_ground(x: f64, y: f64, level: usize) -> Pose {
    Pose::from_translation(x, y, A / 2.0 + level as f64 * A)
}

fn camera() -> CameraModel {
    CameraModel::look_at(Point3::new(0.45, -0.45, 0.4), Point3::new(0.0, 0.0, 0.05), Vector3::z()).unwrap()
}

fn params() -> ParserParams {
    ParserParams { camera: Some(camera()), ..ParserParams::default() }
}

fn cloud_of(scene: &[(&str, Pose)]) -> PointCloud {
    let m = cube();
    let placed: Vec<Placement> = scene.iter().map(|(n, p)| Placement { id: id(n), model: m.clone(), pose: *p }).collect();
    render_cloud(&placed, &camera(), 1).unwrap()
}

fn detections(entries: &[(&str, Vec<Pose>)]) -> HypothesisSet {
    let m = cube();
    let mut h = HypothesisSet::new();
    for (n, poses) in entries {
        for p in poses {
            h.insert(id(n), m.clone(), *p, HypothesisSource::Detector);
        }
    }
    h
}

#[test]
fn hypothesis_set_bookkeeping() {
    let h = detections(&[("a", vec![Pose::identity(); 3]), ("b", vec![Pose::identity(); 2])]);
    assert_eq!(h.len(), 2);
    assert_eq!(h.total(), 5);
    assert_eq!(h.max_k(), 3);
    assert_eq!(h.search_size(), 6);
}

#[test]
fn matching_hypothesis_beats_penetrating_ones() {
    let truth = on_ground(0.0, 0.0, 0);
    let cloud = cloud_of(&[("a", truth)]);
    let hyps = detections(&[(
        "a",
        vec![
            truth.with_translation(Vector3::new(0.0, 0.0, A / 2.0 - 0.02)),
            truth,
            truth.with_translation(Vector3::new(0.01, 0.0, A / 2.0 - 0.015)),
        ],
    )]);
    let p = params();
    let index = CloudIndex::new(&cloud, p.guiding.d_t);
    let ctx = p.context(&index, None);
    let base = p.empty_world();
    // Score each hypothesis on its own as the oracle.
    let scores: Vec<f64> = hyps.objects[&id("a")]
        .hypotheses
        .iter()
        .map(|h| {
            let mut w = base.clone();
            w.add_body(id("a"), cube(), h.pose).unwrap();
            simulate_world(&w, &ctx).unwrap().1.log_prob
        })
        .collect();
    let expected = (0..3).max_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(j.cmp(&i))).unwrap();
    assert_eq!(expected, 1, "scores {scores:?}");
    let eval = evaluate_hypotheses(&SupportGraph::default(), &hyps, &BTreeMap::new(), &base, &ctx, false).unwrap();
    assert_eq!(eval.configuration[&id("a")], truth);
    assert_eq!(eval.score.log_prob, scores[1]);
}

#[test]
fn zero_hypotheses_is_an_error() {
    let mut hyps = detections(&[]);
    hyps.objects.insert(id("x"), ObjectHypotheses { model: cube(), hypotheses: Vec::new() });
    let p = params();
    let err = parse_frame(&SceneEstimate::empty(), &hyps, &PointCloud::default(), &p).unwrap_err();
    assert!(matches!(err, Error::NoHypotheses(_)));
}

#[test]
fn empty_inputs_give_empty_estimate() {
    let est = parse_frame(&SceneEstimate::empty(), &HypothesisSet::new(), &PointCloud::default(), &params()).unwrap();
    assert!(est.is_empty());
    assert_eq!(est.sim_calls, 0);
}

#[test]
fn parallel_and_serial_agree() {
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.0, 0.0, 1))];
    let cloud = cloud_of(&truth);
    let hyps = detections(&[
        ("a", vec![truth[0].1.with_translation(Vector3::new(0.003, 0.0, A / 2.0)), truth[0].1]),
        ("b", vec![truth[1].1, truth[1].1.with_translation(Vector3::new(0.0, 0.004, 1.5 * A + 0.01))]),
    ]);
    let mut p = params();
    let a = parse_frame(&SceneEstimate::empty(), &hyps, &cloud, &p).unwrap();
    p.parallel = false;
    let b = parse_frame(&SceneEstimate::empty(), &hyps, &cloud, &p).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn stored_configuration_reproduces_score() {
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.0, 0.0, 1))];
    let cloud = cloud_of(&truth);
    let hyps = detections(&[("a", vec![truth[0].1]), ("b", vec![truth[1].1.with_translation(Vector3::new(0.0, 0.0, 1.5 * A + 0.003)), truth[1].1])]);
    let p = params();
    let est = parse_frame(&SceneEstimate::empty(), &hyps, &cloud, &p).unwrap();
    let index = CloudIndex::new(&cloud, p.guiding.d_t);
    let (w, score) = simulate_world(&est.configuration_world(&p).unwrap(), &p.context(&index, None)).unwrap();
    assert_eq!(score.log_prob.to_bits(), est.score.log_prob.to_bits());
    assert_eq!(w.poses(), est.poses());
    assert!(est.score.max_beta_t() < 3.0 * p.consistency.alpha_b, "beta_t {}", est.score.max_beta_t());
}

#[test]
fn floating_top_block_is_not_kept() {
    // Best-data hypothesis for the top block floats 3 cm up.
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.0, 0.0, 1))];
    let float = truth[1].1.with_translation(Vector3::new(0.0, 0.0, 1.5 * A + 0.03));
    let cloud = cloud_of(&[("a", truth[0].1), ("b", float)]);
    let hyps = detections(&[("a", vec![truth[0].1]), ("b", vec![float, truth[1].1])]);
    let p = params();
    let est = parse_frame(&SceneEstimate::empty(), &hyps, &cloud, &p).unwrap();

    let index = CloudIndex::new(&cloud, p.guiding.d_t);
    let raw_config = best_data_configuration(&hyps, &index, p.guiding.d_t);
    let mut raw = p.empty_world();
    for (k, pose) in &raw_config {
        raw.add_body(k.clone(), cube(), *pose).unwrap();
    }
    let (_, raw_score) = simulate_world(&raw, &p.context(&index, None)).unwrap();
    assert!(est.score.log_prob >= raw_score.log_prob);
    assert!(est.graph.has_edge(&id("a"), &id("b")));
}

#[test]
fn improve_repairs_ground_penetration() {
    let p = params();
    let index = CloudIndex::new(&PointCloud::default(), p.guiding.d_t);
    let ctx = p.context(&index, None);
    let mut w = p.empty_world();
    w.add_body(id("a"), cube(), Pose::from_translation(0.0, 0.0, A / 2.0 - 0.005)).unwrap();
    let (w1, _) = improve_hypothesis(&w, &ctx).unwrap();
    let z = w1.bodies()[0].pose.translation.z;
    assert!((z - A / 2.0).abs() < 5e-4, "settled at {z}");
}

#[test]
fn improve_keeps_consistent_hypothesis() {
    let truth = on_ground(0.0, 0.0, 0);
    let cloud = cloud_of(&[("a", truth)]);
    let p = params();
    let index = CloudIndex::new(&cloud, p.guiding.d_t);
    let mut w = p.empty_world();
    w.add_body(id("a"), cube(), truth).unwrap();
    let (w1, _) = improve_hypothesis(&w, &p.context(&index, None)).unwrap();
    assert!((w1.bodies()[0].pose.translation - truth.translation).norm() < 2e-3);
}

#[test]
fn improve_reduces_rotation_error() {
    let truth = on_ground(0.0, 0.0, 0);
    let cloud = cloud_of(&[("a", truth)]);
    let p = params();
    let index = CloudIndex::new(&cloud, p.guiding.d_t);
    let off = Pose::new(nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 4f64.to_radians()), truth.translation);
    let mut w = p.empty_world();
    w.add_body(id("a"), cube(), off).unwrap();
    let (w1, _) = improve_hypothesis(&w, &p.context(&index, None)).unwrap();
    let before = crate::geometry::pose_delta(&off, &truth).1;
    let after = crate::geometry::pose_delta(&w1.bodies()[0].pose, &truth).1;
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn repeated_frame_is_static() {
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.0, 0.0, 1)), ("c", on_ground(0.15, 0.0, 0))];
    let cloud = cloud_of(&truth);
    let hyps = detections(&truth.iter().map(|(n, p)| (*n, vec![*p])).collect::<Vec<_>>());
    let p = params();
    let f0 = parse_frame(&SceneEstimate::empty(), &hyps, &cloud, &p).unwrap();
    assert!(f0.transitions.values().all(|l| l.mode == TransitionMode::Added));
    let f1 = parse_frame(&f0, &hyps, &cloud, &p).unwrap();
    assert_eq!(f1.frame, 1);
    assert!(f1.transitions.values().all(|l| l.mode == TransitionMode::Static), "{:?}", f1.transitions);
    for (k, o) in &f1.objects {
        let (dt, dr) = crate::geometry::pose_delta(&o.pose, &f0.objects[k].pose);
        assert!(dt < p.thresholds.translation && dr < p.thresholds.rotation);
    }
}

#[test]
fn hidden_mid_block_is_support_retained() {
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.0, 0.0, 1)), ("c", on_ground(0.0, 0.0, 2))];
    let cloud = cloud_of(&truth);
    let p = params();
    let all = detections(&truth.iter().map(|(n, p)| (*n, vec![*p])).collect::<Vec<_>>());
    let f0 = parse_frame(&SceneEstimate::empty(), &all, &cloud, &p).unwrap();
    // The detector misses b and the cloud around it is gone too.
    let partial = detections(&[("a", vec![truth[0].1]), ("c", vec![truth[2].1])]);
    let cloud1 = cloud_of(&[truth[0], truth[2]]);
    let f1 = parse_frame(&f0, &partial, &cloud1, &p).unwrap();
    assert_eq!(f1.transitions[&id("b")].mode, TransitionMode::SupportRetained);
    assert!(f1.objects.contains_key(&id("b")));
}

#[test]
fn departed_object_is_removed() {
    let truth = [("a", on_ground(0.0, 0.0, 0)), ("b", on_ground(0.15, 0.0, 0))];
    let p = params();
    let all = detections(&truth.iter().map(|(n, p)| (*n, vec![*p])).collect::<Vec<_>>());
    let f0 = parse_frame(&SceneEstimate::empty(), &all, &cloud_of(&truth), &p).unwrap();
    let f1 = parse_frame(&f0, &detections(&[("a", vec![truth[0].1])]), &cloud_of(&[truth[0]]), &p).unwrap();
    assert_eq!(f1.transitions[&id("b")].mode, TransitionMode::Removed);
    assert!(!f1.objects.contains_key(&id("b")));
}

#[test]
fn estimate_json_has_stable_fields() {
    let truth = [("a", on_ground(0.0, 0.0, 0))];
    let est = parse_frame(&SceneEstimate::empty(), &detections(&[("a", vec![truth[0].1])]), &cloud_of(&truth), &params()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&est.to_json()).unwrap();
    assert_eq!(v["frame"], 0);
    assert_eq!(v["objects"][0]["id"], "a");
    assert_eq!(v["objects"][0]["label"], "Added");
    assert!(v["objects"][0]["pose"].is_object());
    assert!(v["graph"]["edges"].is_array());
}
