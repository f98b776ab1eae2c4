//! Per-robot triangular lattice roadmaps.
//!
//! The reference path is resampled into `R` points on the path (MID layer).
//! Every segment between consecutive MID points is the base of two
//! triangles whose apexes sit at the segment midpoint offset by `±h` along
//! the left normal (ABOVE and BELOW layers). Nine directed edge families
//! link the layers, always moving forward along the path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{left_normal, rect_collides_static, OrientedRect, Point2, Polyline, Pose, Vec2};
use crate::scenario::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Layer {
    Mid,
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeVertex {
    pub layer: Layer,
    /// 1-based position along the path.
    pub index: usize,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeFamily {
    MidMid,
    MidAbove,
    MidBelow,
    AboveMid,
    BelowMid,
    AboveAbove,
    BelowBelow,
    MidNextAbove,
    MidNextBelow,
}

impl EdgeFamily {
    pub const ALL: [EdgeFamily; 9] = [
        EdgeFamily::MidMid,
        EdgeFamily::MidAbove,
        EdgeFamily::MidBelow,
        EdgeFamily::AboveMid,
        EdgeFamily::BelowMid,
        EdgeFamily::AboveAbove,
        EdgeFamily::BelowBelow,
        EdgeFamily::MidNextAbove,
        EdgeFamily::MidNextBelow,
    ];

    /// Endpoint layers and index offset of the family.
    pub fn pattern(self) -> (Layer, Layer, usize) {
        use EdgeFamily::*;
        use Layer::*;
        match self {
            MidMid => (Mid, Mid, 1),
            MidAbove => (Mid, Above, 0),
            MidBelow => (Mid, Below, 0),
            AboveMid => (Above, Mid, 1),
            BelowMid => (Below, Mid, 1),
            AboveAbove => (Above, Above, 1),
            BelowBelow => (Below, Below, 1),
            MidNextAbove => (Mid, Above, 1),
            MidNextBelow => (Mid, Below, 1),
        }
    }

    pub fn classify(from: &LatticeVertex, to: &LatticeVertex) -> Option<EdgeFamily> {
        let offset = to.index.checked_sub(from.index)?;
        EdgeFamily::ALL
            .into_iter()
            .find(|f| f.pattern() == (from.layer, to.layer, offset))
    }
}

/// A directed lattice roadmap for one robot.
#[derive(Debug, Clone)]
pub struct LatticeRoadmap {
    pub vertices: Vec<LatticeVertex>,
    pub edges: Vec<Edge>,
    pub start: usize,
    pub goal: usize,
    /// Requested base.
    pub b: f64,
    /// Effective base after rounding to a whole number of segments.
    pub b_eff: f64,
    pub h: f64,
    pub r: usize,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl LatticeRoadmap {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, v: usize) -> Point2 {
        self.vertices[v].pose.position
    }

    /// Indices into `edges` leaving `v`.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    /// Indices into `edges` entering `v`.
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.inc[v]
    }

    pub fn edge_between(&self, from: usize, to: usize) -> Option<&Edge> {
        self.out[from].iter().map(|&e| &self.edges[e]).find(|e| e.to == to)
    }

    pub fn find(&self, layer: Layer, index: usize) -> Option<usize> {
        self.vertices.iter().position(|v| v.layer == layer && v.index == index)
    }

    fn from_parts(
        vertices: Vec<LatticeVertex>,
        edges: Vec<Edge>,
        start: usize,
        goal: usize,
        b: f64,
        b_eff: f64,
        h: f64,
        r: usize,
    ) -> Self {
        let mut out = vec![Vec::new(); vertices.len()];
        let mut inc = vec![Vec::new(); vertices.len()];
        for (k, e) in edges.iter().enumerate() {
            out[e.from].push(k);
            inc[e.to].push(k);
        }
        LatticeRoadmap {
            vertices,
            edges,
            start,
            goal,
            b,
            b_eff,
            h,
            r,
            out,
            inc,
        }
    }

    /// Copy without the given edges (used to build degraded test graphs).
    pub fn without_edges(&self, drop: impl Fn(&Edge) -> bool) -> LatticeRoadmap {
        let edges = self.edges.iter().copied().filter(|e| !drop(e)).collect();
        LatticeRoadmap::from_parts(
            self.vertices.clone(),
            edges,
            self.start,
            self.goal,
            self.b,
            self.b_eff,
            self.h,
            self.r,
        )
    }
}

/// Number of segments used for base `b` on a path of length `length`.
fn segment_count(length: f64, b: f64) -> usize {
    // tolerate representation error when L is an exact multiple of b
    ((length / b) - 1e-9).ceil().max(1.0) as usize
}

/// Uniformly resamples the reference into `R = ceil(L/b) + 1` points.
pub fn resample_reference(reference: &Polyline, b: f64) -> Result<Vec<(Point2, Vec2)>> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Precondition(format!("base must be positive, got {b}")));
    }
    let total = reference.length();
    let s = segment_count(total, b);
    (0..=s)
        .map(|k| {
            let arc = if k == s { total } else { total * k as f64 / s as f64 };
            reference.point_at(arc)
        })
        .collect()
}

/// Builds the lattice for `(b, h)` and clips it against the environment.
///
/// Vertices whose footprint collides are dropped with their edges; an edge
/// is dropped when the footprint swept along it collides. The robot faces
/// along the edge while traversing it, so the swept area is one rectangle.
pub fn build_lattice(
    reference: &Polyline,
    b: f64,
    h: f64,
    env: &Environment,
    footprint: (f64, f64),
) -> Result<LatticeRoadmap> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!("height must be non-negative, got {h}")));
    }
    let (len, wid) = footprint;
    let mid = resample_reference(reference, b)?;
    let r = mid.len();
    let b_eff = reference.length() / (r - 1) as f64;

    // chord direction of lattice segment j (0-based, j < r - 1)
    let chord: Vec<Vec2> = (0..r - 1)
        .map(|j| {
            let d = mid[j + 1].0 - mid[j].0;
            d * (1.0 / d.norm())
        })
        .collect();

    let mut all = Vec::with_capacity(3 * r - 2);
    for (j, (p, _)) in mid.iter().enumerate() {
        let dir = chord[j.min(r - 2)];
        all.push(LatticeVertex {
            layer: Layer::Mid,
            index: j + 1,
            pose: Pose::new(*p, dir.angle()),
        });
    }
    for j in 0..r - 1 {
        let base = mid[j].0.midpoint(mid[j + 1].0);
        let n = left_normal(chord[j])?;
        let heading = chord[j].angle();
        all.push(LatticeVertex {
            layer: Layer::Above,
            index: j + 1,
            pose: Pose::new(base + n * h, heading),
        });
        all.push(LatticeVertex {
            layer: Layer::Below,
            index: j + 1,
            pose: Pose::new(base - n * h, heading),
        });
    }
    // topological order: by index, MID before the apexes sharing its index
    all.sort_by_key(|v| (v.index, v.layer));

    let start_id = (Layer::Mid, 1);
    let goal_id = (Layer::Mid, r);
    let collides = |pose: &Pose| rect_collides_static(&OrientedRect::at_pose(pose, len, wid), env);
    let mut keep = vec![true; all.len()];
    for (k, v) in all.iter().enumerate() {
        if collides(&v.pose) {
            let id = (v.layer, v.index);
            if id == start_id || id == goal_id {
                return Err(Error::Construction(format!(
                    "{} footprint collides with the environment",
                    if id == start_id { "start" } else { "goal" }
                )));
            }
            keep[k] = false;
        }
    }

    let mut remap = vec![usize::MAX; all.len()];
    let mut vertices = Vec::with_capacity(all.len());
    for (k, v) in all.iter().enumerate() {
        if keep[k] {
            remap[k] = vertices.len();
            vertices.push(*v);
        }
    }
    let lookup = |layer: Layer, index: usize| -> Option<usize> {
        // position in `all` is fixed by the sort: MID j at 3(j-1), apexes follow
        let base = 3 * (index - 1);
        let k = match layer {
            Layer::Mid => base,
            Layer::Above => base + 1,
            Layer::Below => base + 2,
        };
        (k < all.len() && all[k].layer == layer && all[k].index == index && keep[k]).then(|| remap[k])
    };

    let mut edges = Vec::with_capacity(9 * r);
    for j in 1..r {
        for fam in EdgeFamily::ALL {
            let (lf, lt, off) = fam.pattern();
            let to_index = j + off;
            let to_max = if lt == Layer::Mid { r } else { r - 1 };
            if to_index > to_max {
                continue;
            }
            let (Some(from), Some(to)) = (lookup(lf, j), lookup(lt, to_index)) else {
                continue;
            };
            let (a, c) = (vertices[from].pose.position, vertices[to].pose.position);
            let d = c - a;
            let length = d.norm();
            let swept = OrientedRect::at_pose(&Pose::new(a, d.angle()), len, wid).swept_along_heading(length);
            if rect_collides_static(&swept, env) {
                continue;
            }
            edges.push(Edge { from, to, length });
        }
    }

    let start = lookup(start_id.0, start_id.1).expect("start kept");
    let goal = lookup(goal_id.0, goal_id.1).expect("goal kept");
    Ok(LatticeRoadmap::from_parts(vertices, edges, start, goal, b, b_eff, h, r))
}

/// Length of the shortest start-to-goal path, or `None` when unreachable.
pub fn shortest_path_length(rm: &LatticeRoadmap) -> Option<f64> {
    shortest_distances_to_goal(rm)[rm.start]
}

/// Shortest remaining distance from every vertex to the goal.
///
/// Vertices are stored in topological order, so one backward sweep suffices.
pub fn shortest_distances_to_goal(rm: &LatticeRoadmap) -> Vec<Option<f64>> {
    let mut dist: Vec<Option<f64>> = vec![None; rm.num_vertices()];
    dist[rm.goal] = Some(0.0);
    for v in (0..rm.num_vertices()).rev() {
        for &e in rm.out_edges(v) {
            let e = &rm.edges[e];
            if let Some(d) = dist[e.to] {
                let cand = d + e.length;
                if dist[v].map_or(true, |cur| cand < cur) {
                    dist[v] = Some(cand);
                }
            }
        }
    }
    dist
}

// ---------------------------------------------------------------------------
// debug dump

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VertexDump {
    pub layer: Layer,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeDump {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoadmapDump {
    pub b: f64,
    pub b_eff: f64,
    pub h: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub start: usize,
    pub goal: usize,
    pub vertices: Vec<VertexDump>,
    pub edges: Vec<EdgeDump>,
}

impl From<&LatticeRoadmap> for RoadmapDump {
    fn from(rm: &LatticeRoadmap) -> Self {
        RoadmapDump {
            b: rm.b,
            b_eff: rm.b_eff,
            h: rm.h,
            r: rm.r,
            start: rm.start,
            goal: rm.goal,
            vertices: rm
                .vertices
                .iter()
                .map(|v| VertexDump {
                    layer: v.layer,
                    index: v.index,
                    x: v.pose.position.x,
                    y: v.pose.position.y,
                    theta: v.pose.heading,
                })
                .collect(),
            edges: rm
                .edges
                .iter()
                .map(|e| EdgeDump {
                    from: e.from,
                    to: e.to,
                    length: e.length,
                })
                .collect(),
        }
    }
}
