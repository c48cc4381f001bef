//! Support relations between bodies, layering by distance from the ground,
//! and frame-to-frame transition labels.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{obb_intersection_volume, obb_volume_below_plane, pose_delta, ObjectModel, Pose};
use crate::parser::SceneEstimate;
use crate::physics::World;
use crate::ObjectId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVertex {
    pub id: ObjectId,
    /// Accumulated penetration depth over the vertex's contacts (m).
    pub d: f64,
    /// Accumulated bounding-box intersection volume (m³).
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEdge {
    pub parent: ObjectId,
    pub child: ObjectId,
    /// Total normal impulse exchanged in the last step (N·s).
    pub impulse: f64,
    /// Upward component of the impulse received by the child (N·s).
    pub vertical: f64,
}

/// Directed "parent supports child" graph. Vertices sorted by id, edges by (parent, child).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportGraph {
    pub vertices: Vec<SupportVertex>,
    pub edges: Vec<SupportEdge>,
}

impl SupportGraph {
    pub fn vertex(&self, id: &ObjectId) -> Option<&SupportVertex> {
        self.vertices.binary_search_by(|v| v.id.cmp(id)).ok().map(|i| &self.vertices[i])
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.vertex(id).is_some()
    }

    pub fn children<'a>(&'a self, id: &'a ObjectId) -> impl Iterator<Item = &'a SupportEdge> + 'a {
        self.edges.iter().filter(move |e| &e.parent == id)
    }

    pub fn parents<'a>(&'a self, id: &'a ObjectId) -> impl Iterator<Item = &'a SupportEdge> + 'a {
        self.edges.iter().filter(move |e| &e.child == id)
    }

    pub fn has_edge(&self, parent: &ObjectId, child: &ObjectId) -> bool {
        self.edges.iter().any(|e| &e.parent == parent && &e.child == child)
    }

    /// Every object transitively supported by `id`.
    pub fn descendants(&self, id: &ObjectId) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(cur) = stack.pop() {
            for e in self.children(&cur) {
                if out.insert(e.child.clone()) {
                    stack.push(e.child.clone());
                }
            }
        }
        out
    }

    /// Supported fractions `F_S,i` of each child's upward impulse delivered by `id`.
    pub fn support_fractions(&self, id: &ObjectId) -> Vec<f64> {
        self.children(id)
            .map(|e| {
                let total: f64 = self.parents(&e.child).map(|p| p.vertical.max(0.0)).sum();
                if total > 0.0 { (e.vertical.max(0.0) / total).clamp(0.0, 1.0) } else { 0.0 }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    fn sort(&mut self) {
        self.vertices.sort_by(|a, b| a.id.cmp(&b.id));
        self.edges.sort_by(|a, b| (&a.parent, &a.child).cmp(&(&b.parent, &b.child)));
    }

    /// Removes the weakest edge of each directed cycle until none remain.
    fn break_cycles(&mut self) {
        while let Some(cycle) = self.find_cycle() {
            let weakest = cycle
                .iter()
                .copied()
                .min_by(|&a, &b| self.edges[a].impulse.total_cmp(&self.edges[b].impulse).then(b.cmp(&a)))
                .expect("cycle has edges");
            self.edges.remove(weakest);
        }
    }

    /// Edge indices of some directed cycle, found by depth-first search in id order.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let index: BTreeMap<&ObjectId, usize> = self.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();
        let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (k, e) in self.edges.iter().enumerate() {
            if let (Some(&p), Some(_)) = (index.get(&e.parent), index.get(&e.child)) {
                out_edges[p].push(k);
            }
        }
        let mut mark = vec![Mark::New; self.vertices.len()];
        for start in 0..self.vertices.len() {
            if mark[start] != Mark::New {
                continue;
            }
            // Iterative DFS keeping the edge path.
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            let mut path: Vec<usize> = Vec::new();
            mark[start] = Mark::Open;
            while let Some(&(node, next)) = stack.last() {
                if next < out_edges[node].len() {
                    let k = out_edges[node][next];
                    stack.last_mut().expect("non-empty").1 += 1;
                    let child = index[&self.edges[k].child];
                    match mark[child] {
                        Mark::Open => {
                            let from = path
                                .iter()
                                .position(|&pk| index[&self.edges[pk].parent] == child)
                                .unwrap_or(path.len());
                            let mut cycle = path[from..].to_vec();
                            cycle.push(k);
                            return Some(cycle);
                        }
                        Mark::New => {
                            mark[child] = Mark::Open;
                            path.push(k);
                            stack.push((child, 0));
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[node] = Mark::Done;
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }
}

/// Builds the support graph from the contacts resolved in the world's last step.
pub fn gen_support_graph(world: &World) -> SupportGraph {
    let ground = ObjectId::ground();
    let plane = world.ground.map(|g| g.plane());
    let up = plane.map_or(nalgebra::Vector3::z(), |p| p.normal);
    let mut d: BTreeMap<ObjectId, f64> = BTreeMap::new();
    let mut v: BTreeMap<ObjectId, f64> = BTreeMap::new();
    d.insert(ground.clone(), 0.0);
    v.insert(ground.clone(), 0.0);
    for b in world.bodies() {
        d.insert(b.id.clone(), 0.0);
        v.insert(b.id.clone(), 0.0);
    }
    let mut edges = Vec::new();
    for c in world.contacts() {
        let depth: f64 = c.manifold.points.iter().map(|p| p.depth).sum();
        let total = c.total_impulse();
        if total <= 0.0 && depth <= 0.0 {
            continue;
        }
        let Ok(body_b) = world.body(&c.b) else { continue };
        let volume = if c.a.is_ground() {
            plane.map_or(0.0, |p| obb_volume_below_plane(&body_b.model, &body_b.pose, &p))
        } else {
            match world.body(&c.a) {
                Ok(body_a) => obb_intersection_volume(&body_a.model, &body_a.pose, &body_b.model, &body_b.pose),
                Err(_) => continue,
            }
        };
        for id in [&c.a, &c.b] {
            *d.get_mut(id).expect("vertex") += depth;
            *v.get_mut(id).expect("vertex") += volume;
        }
        let vertical = c.impulse_on_b().dot(&up);
        let eps = 1e-12;
        let b_is_child = if c.a.is_ground() || vertical > eps {
            true
        } else if vertical < -eps {
            false
        } else {
            let ha = world.body(&c.a).map(|b| b.cog().coords.dot(&up)).unwrap_or(0.0);
            body_b.cog().coords.dot(&up) >= ha
        };
        let (parent, child, vertical) = if b_is_child {
            (c.a.clone(), c.b.clone(), vertical)
        } else {
            (c.b.clone(), c.a.clone(), -vertical)
        };
        edges.push(SupportEdge { parent, child, impulse: total, vertical });
    }
    let vertices = d
        .into_iter()
        .map(|(id, dd)| {
            let vv = v[&id];
            SupportVertex { id, d: dd, v: vv }
        })
        .collect();
    let mut graph = SupportGraph { vertices, edges };
    graph.sort();
    graph.break_cycles();
    graph
}

/// Objects grouped by hop distance from `ground_id`; unreachable objects form
/// a final detached layer.
pub fn vertices_by_distance(graph: &SupportGraph, ground_id: &ObjectId) -> Vec<Vec<ObjectId>> {
    let mut dist: BTreeMap<&ObjectId, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    if graph.contains(ground_id) {
        dist.insert(ground_id, 0);
        queue.push_back(ground_id);
    }
    while let Some(cur) = queue.pop_front() {
        let dc = dist[cur];
        for e in graph.children(cur) {
            if !dist.contains_key(&e.child) {
                dist.insert(&e.child, dc + 1);
                queue.push_back(&e.child);
            }
        }
    }
    let depth = dist.values().copied().max().unwrap_or(0);
    let mut layers: Vec<Vec<ObjectId>> = vec![Vec::new(); depth];
    let mut detached = Vec::new();
    for vtx in &graph.vertices {
        if &vtx.id == ground_id {
            continue;
        }
        match dist.get(&vtx.id) {
            Some(&k) => layers[k - 1].push(vtx.id.clone()),
            None => detached.push(vtx.id.clone()),
        }
    }
    layers.retain(|l| !l.is_empty());
    if !detached.is_empty() {
        layers.push(detached);
    }
    layers
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransitionMode {
    Added,
    Removed,
    Perturbed,
    Static,
    SupportRetained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionLabel {
    pub mode: TransitionMode,
    pub ephemeral: bool,
}

impl TransitionLabel {
    pub fn new(mode: TransitionMode) -> Self {
        TransitionLabel { mode, ephemeral: false }
    }

    pub fn ephemeral() -> Self {
        TransitionLabel { mode: TransitionMode::Static, ephemeral: true }
    }
}

impl std::fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.mode)?;
        if self.ephemeral {
            f.write_str("+Ephemeral")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionThresholds {
    /// Translation above which a re-detected object is Perturbed (m).
    pub translation: f64,
    /// Rotation above which a re-detected object is Perturbed (rad).
    pub rotation: f64,
    /// Fraction of the smaller object volume that counts as occupying it.
    pub occupancy: f64,
    /// Geometric visibility below which an object counts as occluded.
    pub min_visible: f64,
    /// Share of geometrically visible surface points that must be confirmed
    /// by nearby cloud points for an undetected object to count as still visible.
    pub confirm_ratio: f64,
    /// Distance within which a cloud point confirms a surface point (m).
    pub confirm_distance: f64,
}

impl Default for TransitionThresholds {
    fn default() -> Self {
        TransitionThresholds { translation: 0.01, rotation: 0.087, occupancy: 0.5, min_visible: 0.05, confirm_ratio: 0.5, confirm_distance: 0.005 }
    }
}

/// Visibility of an undetected object at its previous pose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEvidence {
    /// Fraction of surface points that are unoccluded, in frustum, front-facing.
    pub geometric: f64,
    /// Fraction that are also matched by a cloud point.
    pub confirmed: f64,
}

/// Static or Perturbed by comparing poses against the thresholds.
pub fn motion_label(prev: &Pose, curr: &Pose, t: &TransitionThresholds) -> TransitionLabel {
    let (dt, dr) = pose_delta(prev, curr);
    if dt > t.translation || dr > t.rotation {
        TransitionLabel::new(TransitionMode::Perturbed)
    } else {
        TransitionLabel::new(TransitionMode::Static)
    }
}

/// Labels every current detection and every previously estimated object.
/// `detections` maps detected ids to their current pose; `occupied` lists
/// previous objects whose volume a current detection occupies.
pub fn classify_transitions(
    prev: &SceneEstimate,
    detections: &BTreeMap<ObjectId, Pose>,
    evidence: &BTreeMap<ObjectId, VisibilityEvidence>,
    occupied: &BTreeSet<ObjectId>,
    thresholds: &TransitionThresholds,
) -> BTreeMap<ObjectId, TransitionLabel> {
    let mut out = BTreeMap::new();
    for (id, pose) in detections {
        let label = match prev.objects.get(id) {
            Some(p) => motion_label(&p.pose, pose, thresholds),
            None => TransitionLabel::new(TransitionMode::Added),
        };
        out.insert(id.clone(), label);
    }
    for (id, p) in &prev.objects {
        if detections.contains_key(id) {
            continue;
        }
        let ev = evidence.get(id).copied().unwrap_or_default();
        let is_occupied = occupied.contains(id);
        let still_visible = !is_occupied
            && ev.geometric >= thresholds.min_visible
            && ev.confirmed >= thresholds.confirm_ratio * ev.geometric;
        let supports_detection = prev.graph.descendants(id).iter().any(|d| detections.contains_key(d));
        let label = if p.label.ephemeral && is_occupied {
            TransitionLabel::new(TransitionMode::Removed)
        } else if still_visible {
            TransitionLabel::new(TransitionMode::Static)
        } else if supports_detection {
            TransitionLabel::new(TransitionMode::SupportRetained)
        } else if ev.geometric < thresholds.min_visible && !is_occupied {
            TransitionLabel::ephemeral()
        } else {
            TransitionLabel::new(TransitionMode::Removed)
        };
        out.insert(id.clone(), label);
    }
    out
}

/// Whether `candidate` fills more than `threshold` of the smaller object volume of the pair.
pub fn occupies_volume(candidate: (&ObjectModel, &Pose), existing: (&ObjectModel, &Pose), threshold: f64) -> bool {
    let overlap = obb_intersection_volume(candidate.0, candidate.1, existing.0, existing.1);
    let smaller = candidate.0.shape().volume().min(existing.0.shape().volume());
    overlap / smaller > threshold
}
