//! Discrete RRT* over the composite (tensor-product) roadmap.
//!
//! All robots advance in synchronized unit steps: each either traverses one
//! outgoing roadmap edge or stays put. While moving a robot faces along its
//! edge; while staying it keeps the pose of its vertex. Waiting is free, so
//! the plan cost is the summed length of the traversed edges.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    frames_overlap, frames_overlap_moving, rect_collides_static, segments_intersect, Aabb, OrientedRect, Point2,
    Pose, RectFrame, Vec2,
};
use crate::rng::{splitmix64_mix, RngStream};
use crate::roadmap::{shortest_distances_to_goal, shortest_path_length, LatticeRoadmap};
use crate::scenario::Environment;

/// Footprint dimensions shared by all robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub length: f64,
    pub width: f64,
}

impl Dims {
    pub fn new(length: f64, width: f64) -> Self {
        Dims { length, width }
    }
}

impl From<(f64, f64)> for Dims {
    fn from((length, width): (f64, f64)) -> Self {
        Dims { length, width }
    }
}

/// How a synchronized step is checked for robot-robot contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionCheck {
    /// Footprints compared at `K + 1` evenly spaced fractions of the step.
    Sampled(usize),
    /// Exact test over the whole step.
    Continuous,
}

pub const DEFAULT_BUDGET: usize = 2000;
pub const DEFAULT_GOAL_BIAS: f64 = 0.1;
pub const PLANNING_SAMPLES: usize = 8;
pub const AUDIT_SAMPLES: usize = 80;
pub const TRAJECTORY_SAMPLES: usize = 8;
/// Product state count above which the exact oracle refuses to run.
pub const ORACLE_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Number of expansions.
    pub budget: usize,
    pub goal_bias: f64,
    pub check: CollisionCheck,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            budget: DEFAULT_BUDGET,
            goal_bias: DEFAULT_GOAL_BIAS,
            check: CollisionCheck::Continuous,
        }
    }
}

/// One roadmap vertex per robot.
pub type CompositeVertex = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositePlan {
    /// `steps[0]` holds every start, the last entry every goal.
    pub steps: Vec<CompositeVertex>,
    pub cost: f64,
}

impl CompositePlan {
    pub fn num_robots(&self) -> usize {
        self.steps.first().map_or(0, |s| s.len())
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Vertex sequence of robot `i`, with repeats where it waits.
    pub fn robot_path(&self, i: usize) -> Vec<usize> {
        self.steps.iter().map(|s| s[i]).collect()
    }

    /// Traversed edge length of robot `i`, recomputed from its roadmap.
    pub fn path_length(&self, roadmaps: &[LatticeRoadmap], i: usize) -> Result<f64> {
        let mut total = 0.0;
        for w in self.steps.windows(2) {
            let (a, b) = (w[0][i], w[1][i]);
            if a != b {
                total += roadmaps[i]
                    .edge_between(a, b)
                    .ok_or_else(|| Error::Contract(format!("robot {i} moves {a}->{b} without an edge")))?
                    .length;
            }
        }
        Ok(total)
    }

    /// Appends `n` steps in which every robot stays.
    pub fn padded(&self, n: usize) -> CompositePlan {
        let mut steps = self.steps.clone();
        if let Some(last) = steps.last().cloned() {
            steps.extend(std::iter::repeat(last).take(n));
        }
        CompositePlan { steps, cost: self.cost }
    }
}

/// Where the search got to when it ran out of budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanFailure {
    pub robots_not_at_goal: usize,
    pub remaining_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Found(CompositePlan),
    Failed(PlanFailure),
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&CompositePlan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Failed(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, PlanOutcome::Found(_))
    }
}

// ---------------------------------------------------------------------------
// step model

/// Footprints are grown by this much on every side when planning, so exact
/// touching under rounding still counts as contact.
const CONTACT_SLACK: f64 = 1e-9;

fn planning_frame(position: Point2, heading: f64, dims: Dims) -> RectFrame {
    RectFrame::new(
        position,
        heading,
        dims.length + 2.0 * CONTACT_SLACK,
        dims.width + 2.0 * CONTACT_SLACK,
    )
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    frame: RectFrame,
    disp: Vec2,
    bounds: Aabb,
}

impl Motion {
    fn new(frame: RectFrame, disp: Vec2) -> Motion {
        let bounds = frame.aabb().union(&frame.translated(disp).aabb());
        Motion { frame, disp, bounds }
    }

    fn stay(rm: &LatticeRoadmap, v: usize, dims: Dims) -> Motion {
        let p = &rm.vertices[v].pose;
        Motion::new(planning_frame(p.position, p.heading, dims), Point2::default())
    }

    fn travel(rm: &LatticeRoadmap, from: usize, to: usize, dims: Dims) -> Motion {
        let a = rm.position(from);
        let d = rm.position(to) - a;
        Motion::new(planning_frame(a, d.angle(), dims), d)
    }

    fn between(rm: &LatticeRoadmap, from: usize, to: usize, dims: Dims) -> Motion {
        if from == to {
            Motion::stay(rm, from, dims)
        } else {
            Motion::travel(rm, from, to, dims)
        }
    }
}

fn motions_conflict(a: &Motion, b: &Motion, check: CollisionCheck) -> bool {
    if !a.bounds.overlaps(&b.bounds) {
        return false;
    }
    match check {
        CollisionCheck::Continuous => frames_overlap_moving(&a.frame, a.disp, &b.frame, b.disp),
        CollisionCheck::Sampled(k) => {
            let k = k.max(1);
            (0..=k).any(|s| {
                let t = s as f64 / k as f64;
                frames_overlap(&a.frame.translated(a.disp * t), &b.frame.translated(b.disp * t))
            })
        }
    }
}

fn first_conflict(motions: &[Motion], check: CollisionCheck) -> Option<(usize, usize)> {
    for i in 0..motions.len() {
        for j in i + 1..motions.len() {
            if motions_conflict(&motions[i], &motions[j], check) {
                return Some((i, j));
            }
        }
    }
    None
}

fn check_move(roadmaps: &[LatticeRoadmap], from: &[usize], to: &[usize]) -> Result<()> {
    if from.len() != roadmaps.len() || to.len() != roadmaps.len() {
        return Err(Error::Contract("composite vertex arity differs from robot count".into()));
    }
    for (i, rm) in roadmaps.iter().enumerate() {
        let (a, b) = (from[i], to[i]);
        if a >= rm.num_vertices() || b >= rm.num_vertices() {
            return Err(Error::Contract(format!("robot {i}: vertex out of range")));
        }
        if a != b && rm.edge_between(a, b).is_none() {
            return Err(Error::Contract(format!("robot {i}: {a}->{b} is neither an edge nor a stay")));
        }
    }
    Ok(())
}

/// True iff no two robots touch during the synchronized step `from -> to`.
pub fn validate_transition(
    roadmaps: &[LatticeRoadmap],
    from: &[usize],
    to: &[usize],
    dims: Dims,
    check: CollisionCheck,
) -> Result<bool> {
    check_move(roadmaps, from, to)?;
    let motions: Vec<Motion> = roadmaps
        .iter()
        .enumerate()
        .map(|(i, rm)| Motion::between(rm, from[i], to[i], dims))
        .collect();
    Ok(first_conflict(&motions, check).is_none())
}

// ---------------------------------------------------------------------------
// search

#[derive(Debug, Clone, Copy)]
struct Move {
    to: u32,
    length: f64,
    motion: Motion,
}

/// Per-robot lookup tables built once per planning call.
struct RobotTables {
    pos: Vec<Point2>,
    goal: u32,
    goal_dist: Vec<f64>,
    /// Index 0 of every list is the stay.
    moves: Vec<Vec<Move>>,
    /// (predecessor, edge length) per vertex
    preds: Vec<Vec<(u32, f64)>>,
    /// Shortest remaining roadmap distance to the goal, infinite if none.
    to_go: Vec<f64>,
    blur: f64,
}

impl RobotTables {
    fn new(rm: &LatticeRoadmap, dims: Dims) -> Self {
        let pos: Vec<Point2> = (0..rm.num_vertices()).map(|v| rm.position(v)).collect();
        let g = pos[rm.goal];
        let goal_dist = pos.iter().map(|p| p.distance(g)).collect();
        let moves = (0..rm.num_vertices())
            .map(|v| {
                let mut list = vec![Move {
                    to: v as u32,
                    length: 0.0,
                    motion: Motion::stay(rm, v, dims),
                }];
                list.extend(rm.out_edges(v).iter().map(|&e| {
                    let e = &rm.edges[e];
                    Move {
                        to: e.to as u32,
                        length: e.length,
                        motion: Motion::travel(rm, v, e.to, dims),
                    }
                }));
                list
            })
            .collect();
        let preds = (0..rm.num_vertices())
            .map(|v| {
                rm.in_edges(v)
                    .iter()
                    .map(|&e| (rm.edges[e].from as u32, rm.edges[e].length))
                    .collect()
            })
            .collect();
        RobotTables {
            pos,
            goal: rm.goal as u32,
            goal_dist,
            moves,
            preds,
            to_go: shortest_distances_to_goal(rm)
                .into_iter()
                .map(|d| d.unwrap_or(f64::INFINITY))
                .collect(),
            blur: 0.5 * rm.b_eff,
        }
    }
}

/// Cheap hasher for keys that are already small integers.
#[derive(Default)]
struct MixHasher(u64);

impl Hasher for MixHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.0 = splitmix64_mix(self.0 ^ u64::from_le_bytes(buf));
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.0 = splitmix64_mix(self.0 ^ n);
    }
}

type FastMap<K, V> = HashMap<K, V, BuildHasherDefault<MixHasher>>;

const ROOT: u32 = u32::MAX;
const EPS: f64 = 1e-12;
const MAX_STALLS: u8 = 3;

/// Search tree over composite vertices, stored flat.
struct Tree {
    n: usize,
    verts: Vec<u32>,
    parent: Vec<u32>,
    cost: Vec<f64>,
    /// Cost of the step from the parent.
    step: Vec<f64>,
    children: Vec<Vec<u32>>,
    index: FastMap<Box<[u32]>, u32>,
    /// Nodes grouped by the vertices of the first two robots.
    buckets: FastMap<u64, Vec<u32>>,
    stride: u64,
}

impl Tree {
    fn new(n: usize, root: &[u32], stride: usize) -> Tree {
        let mut t = Tree {
            n,
            verts: Vec::new(),
            parent: Vec::new(),
            cost: Vec::new(),
            step: Vec::new(),
            children: Vec::new(),
            index: FastMap::default(),
            buckets: FastMap::default(),
            stride: stride as u64,
        };
        t.insert(root, ROOT, 0.0);
        t
    }

    fn len(&self) -> usize {
        self.cost.len()
    }

    fn node(&self, k: usize) -> &[u32] {
        &self.verts[k * self.n..(k + 1) * self.n]
    }

    fn insert(&mut self, v: &[u32], parent: u32, step: f64) -> u32 {
        let id = self.len() as u32;
        let cost = if parent == ROOT { 0.0 } else { self.cost[parent as usize] + step };
        self.verts.extend_from_slice(v);
        self.parent.push(parent);
        self.cost.push(cost);
        self.step.push(step);
        self.children.push(Vec::new());
        if parent != ROOT {
            self.children[parent as usize].push(id);
        }
        self.index.insert(v.into(), id);
        self.buckets.entry(self.key(v[0], v.get(1).copied())).or_default().push(id);
        id
    }

    fn key(&self, first: u32, second: Option<u32>) -> u64 {
        first as u64 * self.stride + second.map_or(0, |s| s as u64)
    }

    /// Every node whose first two robots sit on one of the listed vertices.
    fn gather(&self, first: &[u32], second: Option<&[u32]>, out: &mut Vec<u32>) {
        out.clear();
        for &a in first {
            match second {
                Some(list) => {
                    for &b in list {
                        out.extend_from_slice(self.bucket(a, Some(b)));
                    }
                }
                None => out.extend_from_slice(self.bucket(a, None)),
            }
        }
    }

    fn bucket(&self, first: u32, second: Option<u32>) -> &[u32] {
        self.buckets
            .get(&self.key(first, second))
            .map_or(&[], |b| b.as_slice())
    }

    /// Moves `node` under `parent` and pushes the cost decrease down its
    /// subtree; every node whose cost dropped is appended to `changed`.
    fn reparent(&mut self, node: u32, parent: u32, step: f64, changed: &mut Vec<u32>) {
        let old = self.parent[node as usize];
        self.children[old as usize].retain(|&c| c != node);
        self.children[parent as usize].push(node);
        self.parent[node as usize] = parent;
        self.step[node as usize] = step;
        self.cost[node as usize] = self.cost[parent as usize] + step;
        let mut stack = vec![node];
        while let Some(k) = stack.pop() {
            changed.push(k);
            let base = self.cost[k as usize];
            for &c in &self.children[k as usize] {
                self.cost[c as usize] = base + self.step[c as usize];
                stack.push(c);
            }
        }
    }

    fn path_to(&self, mut k: u32) -> Vec<CompositeVertex> {
        let mut steps = Vec::new();
        loop {
            steps.push(self.node(k as usize).iter().map(|&v| v as usize).collect());
            k = self.parent[k as usize];
            if k == ROOT {
                break;
            }
        }
        steps.reverse();
        steps
    }
}

struct Search {
    robots: Vec<RobotTables>,
    config: PlannerConfig,
    tree: Tree,
    goal_node: Option<u32>,
    /// Sum of per-robot shortest paths; no plan can cost less.
    lower_bound: f64,
    /// Summed roadmap cost-to-go per tree node.
    to_go: Vec<f64>,
    /// Fruitless goal-directed expansions per tree node.
    stalls: Vec<u8>,
    /// Lexicographic best (robots not at goal, remaining distance).
    progress: (usize, f64),
    /// Distances to the current random target, all robots in one table.
    target: Vec<f64>,
    /// Start of each robot's block in `target`.
    offset: Vec<u32>,
    /// Tree nodes as indices into `target`.
    flat: Vec<u32>,
    choice: Vec<usize>,
    motions: Vec<Motion>,
    child: Vec<u32>,
    /// Per-robot step lengths into or out of one vertex; infinite elsewhere.
    table: Vec<Vec<f64>>,
    cands: Vec<(f64, u32)>,
    pool: Vec<u32>,
    /// Node a goal-directed expansion just reached; the next iteration keeps
    /// heading for the goal from there.
    rollout: Option<u32>,
    last: u32,
}

impl Search {
    fn new(roadmaps: &[LatticeRoadmap], dims: Dims, config: PlannerConfig) -> Search {
        let robots: Vec<RobotTables> = roadmaps.iter().map(|rm| RobotTables::new(rm, dims)).collect();
        let n = robots.len();
        let root: Vec<u32> = roadmaps.iter().map(|rm| rm.start as u32).collect();
        let lower_bound = roadmaps
            .iter()
            .map(|rm| shortest_path_length(rm).unwrap_or(f64::INFINITY))
            .sum();
        let mut s = Search {
            target: vec![0.0; robots.iter().map(|r| r.pos.len()).sum()],
            offset: robots
                .iter()
                .scan(0u32, |acc, r| {
                    let o = *acc;
                    *acc += r.pos.len() as u32;
                    Some(o)
                })
                .collect(),
            flat: Vec::new(),
            robots,
            config,
            tree: Tree::new(n, &root, roadmaps.get(1).map_or(1, |rm| rm.num_vertices())),
            goal_node: None,
            lower_bound,
            to_go: Vec::new(),
            stalls: Vec::new(),
            progress: (usize::MAX, f64::INFINITY),
            choice: vec![0; n],
            motions: Vec::with_capacity(n),
            child: vec![0; n],
            table: Vec::new(),
            cands: Vec::new(),
            pool: Vec::new(),
            rollout: None,
            last: 0,
        };
        s.table = s.robots.iter().map(|r| vec![f64::INFINITY; r.pos.len()]).collect();
        s.note_node(0);
        s
    }

    fn note_node(&mut self, id: u32) {
        let node = self.tree.node(id as usize);
        self.flat.extend(node.iter().zip(&self.offset).map(|(&v, &o)| v + o));
        let mut away = 0;
        let mut dist = 0.0;
        for (r, &v) in self.robots.iter().zip(node) {
            if v != r.goal {
                away += 1;
            }
            dist += r.goal_dist[v as usize];
        }
        let to_go: f64 = self.robots.iter().zip(node).map(|(r, &v)| r.to_go[v as usize]).sum();
        self.to_go.push(to_go);
        self.stalls.push(0);
        if (away, dist) < self.progress {
            self.progress = (away, dist);
        }
        if away == 0 {
            self.goal_node = Some(id);
        }
    }

    fn done(&self) -> bool {
        self.goal_node
            .is_some_and(|g| self.tree.cost[g as usize] <= self.lower_bound + 1e-9)
    }

    fn nearest(&self) -> u32 {
        let n = self.tree.n;
        let mut best = f64::INFINITY;
        let mut arg = 0;
        let t = &self.target[..];
        for (k, node) in self.flat.chunks_exact(n).enumerate() {
            // early exit only between groups: cheaper than a branch per robot
            let mut s = 0.0;
            for group in node.chunks(4) {
                s += group.iter().map(|&g| t[g as usize]).sum::<f64>();
                if s >= best {
                    break;
                }
            }
            if s < best {
                best = s;
                arg = k as u32;
            }
        }
        arg
    }

    /// Start of a goal-directed expansion: the node with the lowest estimated
    /// total cost, deeper nodes first on ties, skipping nodes that stalled.
    fn most_promising(&self) -> Option<u32> {
        let mut best: Option<(f64, f64, u32)> = None;
        for k in 0..self.tree.len() {
            let h = self.to_go[k];
            if self.stalls[k] >= MAX_STALLS || h == f64::INFINITY {
                continue;
            }
            let key = (self.tree.cost[k] + h, h, k as u32);
            if best.map_or(true, |b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        best.map(|b| b.2)
    }

    /// One expansion; returns whether the tree changed.
    fn expand(&mut self, rng: &mut RngStream) -> bool {
        let goal_pick = match self.rollout.take() {
            Some(k) => Some(k),
            None if rng.next_uniform() < self.config.goal_bias => self.most_promising(),
            None => None,
        };
        let changed = self.expand_from(goal_pick, rng);
        match (goal_pick, changed) {
            (Some(k), false) => self.stalls[k as usize] = self.stalls[k as usize].saturating_add(1),
            (Some(_), true) => self.rollout = Some(self.last),
            _ => {}
        }
        changed
    }

    fn expand_from(&mut self, goal_pick: Option<u32>, rng: &mut RngStream) -> bool {
        let to_goal = goal_pick.is_some();
        let near = if let Some(k) = goal_pick {
            k
        } else {
            // a roadmap vertex (free by construction) blurred by half a cell,
            // so that ties between tree nodes are not always broken alike
            for (r, &o) in self.robots.iter().zip(&self.offset) {
                let t = &mut self.target[o as usize..o as usize + r.pos.len()];
                let v = r.pos[rng.next_below(r.pos.len())];
                let p = Point2::new(
                    v.x + rng.uniform_in(-r.blur, r.blur),
                    v.y + rng.uniform_in(-r.blur, r.blur),
                );
                for (d, q) in t.iter_mut().zip(&r.pos) {
                    *d = q.distance(p);
                }
            }
            self.nearest()
        };

        let n = self.tree.n;
        for i in 0..n {
            let v = self.tree.node(near as usize)[i] as usize;
            let r = &self.robots[i];
            let mut best = 0;
            if to_goal {
                // toward the goal, "nearest" is measured along the roadmap:
                // take a move that starts a shortest remaining path
                let mut val = f64::INFINITY;
                for (m, mv) in r.moves[v].iter().enumerate().skip(1) {
                    let c = mv.length + r.to_go[mv.to as usize];
                    if c < val {
                        val = c;
                        best = m;
                    }
                }
                if !(val <= r.to_go[v] + 1e-9) {
                    best = 0;
                }
            } else {
                let o = self.offset[i] as usize;
                let t = &self.target[o..o + r.pos.len()];
                for (m, mv) in r.moves[v].iter().enumerate().skip(1) {
                    if t[mv.to as usize] < t[r.moves[v][best].to as usize] {
                        best = m;
                    }
                }
            }
            self.choice[i] = best;
        }

        // Hold robots back until the joint step is collision-free.
        loop {
            if self.choice.iter().all(|&c| c == 0) {
                return false;
            }
            self.motions.clear();
            for i in 0..n {
                let v = self.tree.node(near as usize)[i] as usize;
                self.motions.push(self.robots[i].moves[v][self.choice[i]].motion);
            }
            match first_conflict(&self.motions, self.config.check) {
                None => break,
                Some((a, b)) => {
                    let (ma, mb) = (self.choice[a] != 0, self.choice[b] != 0);
                    let hold = match (ma, mb) {
                        (true, true) => {
                            if rng.next_below(2) == 0 {
                                a
                            } else {
                                b
                            }
                        }
                        (true, false) => a,
                        (false, true) => b,
                        (false, false) => return false,
                    };
                    self.choice[hold] = 0;
                }
            }
        }

        let mut step = 0.0;
        for i in 0..n {
            let v = self.tree.node(near as usize)[i] as usize;
            let mv = &self.robots[i].moves[v][self.choice[i]];
            self.child[i] = mv.to;
            step += mv.length;
        }
        let child = std::mem::take(&mut self.child);
        let bound = self.tree.cost[near as usize] + step;
        let grew = match self.tree.index.get(&child[..]).copied() {
            Some(id) => {
                let better = id != 0 && bound < self.tree.cost[id as usize] - EPS;
                if better {
                    let (parent, step) = self.best_parent(&child, near, step);
                    let mut changed = Vec::new();
                    self.tree.reparent(id, parent, step, &mut changed);
                    self.relax(changed);
                    self.last = id;
                }
                better
            }
            None => {
                let (parent, step) = self.best_parent(&child, near, step);
                let id = self.tree.insert(&child, parent, step);
                self.note_node(id);
                self.relax(vec![id]);
                self.last = id;
                true
            }
        };
        self.child = child;
        grew
    }

    /// True iff the joint step `from -> to` (known to be legal) is collision-free.
    fn step_free(&self, from: &[u32], to: &[u32], motions: &mut Vec<Motion>) -> bool {
        motions.clear();
        for (i, r) in self.robots.iter().enumerate() {
            let mv = r.moves[from[i] as usize]
                .iter()
                .find(|m| m.to == to[i])
                .expect("legal move");
            motions.push(mv.motion);
        }
        first_conflict(motions, self.config.check).is_none()
    }

    /// Cheapest collision-free tree predecessor of `x`, falling back to the
    /// expansion's own parent.
    fn best_parent(&mut self, x: &[u32], near: u32, step: f64) -> (u32, f64) {
        let n = self.tree.n;
        let mut table = std::mem::take(&mut self.table);
        for i in 0..n {
            for &(p, l) in &self.robots[i].preds[x[i] as usize] {
                table[i][p as usize] = l;
            }
            table[i][x[i] as usize] = 0.0;
        }
        let bound = self.tree.cost[near as usize] + step;
        let mut cands = std::mem::take(&mut self.cands);
        cands.clear();
        let lead = |i: usize| -> Vec<u32> {
            let mut v: Vec<u32> = self.robots[i].preds[x[i] as usize].iter().map(|p| p.0).collect();
            v.push(x[i]);
            v
        };
        let mut pool = std::mem::take(&mut self.pool);
        self.tree.gather(&lead(0), (n > 1).then(|| lead(1)).as_deref(), &mut pool);
        for &k in &pool {
            let k = k as usize;
            let node = self.tree.node(k);
            let base = self.tree.cost[k];
            if base >= bound - EPS || k == near as usize {
                continue;
            }
            let mut s = 0.0;
            for i in 0..n {
                s += table[i][node[i] as usize];
                if s == f64::INFINITY {
                    break;
                }
            }
            if base + s < bound - EPS && node != x {
                cands.push((base + s, k as u32));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut motions = std::mem::take(&mut self.motions);
        let mut best = (near, step);
        for &(c, k) in &cands {
            if self.step_free(self.tree.node(k as usize), x, &mut motions) {
                best = (k, c - self.tree.cost[k as usize]);
                break;
            }
        }
        for i in 0..n {
            for &(p, _) in &self.robots[i].preds[x[i] as usize] {
                table[i][p as usize] = f64::INFINITY;
            }
            table[i][x[i] as usize] = f64::INFINITY;
        }
        self.table = table;
        self.cands = cands;
        self.motions = motions;
        self.pool = pool;
        best
    }

    /// Hands tree successors of each node in `work` over to it where that is
    /// cheaper, continuing with every node whose cost dropped.
    fn relax(&mut self, mut work: Vec<u32>) {
        let n = self.tree.n;
        let mut table = std::mem::take(&mut self.table);
        let mut motions = std::mem::take(&mut self.motions);
        let mut queued = vec![false; self.tree.len()];
        for &x in &work {
            queued[x as usize] = true;
        }
        let mut xv = vec![0u32; n];
        let mut changed = Vec::new();
        let mut pool = std::mem::take(&mut self.pool);
        while let Some(x) = work.pop() {
            queued[x as usize] = false;
            xv.copy_from_slice(self.tree.node(x as usize));
            for i in 0..n {
                for mv in &self.robots[i].moves[xv[i] as usize] {
                    table[i][mv.to as usize] = mv.length;
                }
            }
            let cx = self.tree.cost[x as usize];
            let lead = |i: usize| -> Vec<u32> { self.robots[i].moves[xv[i] as usize].iter().map(|m| m.to).collect() };
            self.tree.gather(&lead(0), (n > 1).then(|| lead(1)).as_deref(), &mut pool);
            for &k in &pool {
                let k = k as usize;
                if k == 0 {
                    continue;
                }
                let node = self.tree.node(k);
                let mut s = 0.0;
                for i in 0..n {
                    s += table[i][node[i] as usize];
                    if s == f64::INFINITY {
                        break;
                    }
                }
                if cx + s < self.tree.cost[k] - EPS && node != &xv[..] && self.step_free(&xv, node, &mut motions) {
                    changed.clear();
                    self.tree.reparent(k as u32, x, s, &mut changed);
                    for &c in &changed {
                        if !queued[c as usize] {
                            queued[c as usize] = true;
                            work.push(c);
                        }
                    }
                }
            }
            for i in 0..n {
                for mv in &self.robots[i].moves[xv[i] as usize] {
                    table[i][mv.to as usize] = f64::INFINITY;
                }
            }
        }
        self.table = table;
        self.motions = motions;
        self.pool = pool;
    }

    fn outcome(&self) -> PlanOutcome {
        match self.goal_node {
            Some(g) => PlanOutcome::Found(CompositePlan {
                steps: self.tree.path_to(g),
                cost: self.tree.cost[g as usize],
            }),
            None => PlanOutcome::Failed(PlanFailure {
                robots_not_at_goal: self.progress.0,
                remaining_distance: self.progress.1,
            }),
        }
    }
}

/// Grows a tree over composite vertices from the joint start.
///
/// Stops early once a joint plan matches the sum of the individual shortest
/// paths, since nothing cheaper exists.
pub fn plan_composite(
    roadmaps: &[LatticeRoadmap],
    dims: Dims,
    config: &PlannerConfig,
    rng: &mut RngStream,
) -> Result<PlanOutcome> {
    if roadmaps.is_empty() {
        return Err(Error::Contract("no roadmaps to plan over".into()));
    }
    let mut search = Search::new(roadmaps, dims, *config);
    for _ in 0..config.budget {
        if search.done() {
            break;
        }
        search.expand(rng);
    }
    Ok(search.outcome())
}

// ---------------------------------------------------------------------------
// exact oracle

/// Minimum-cost plan within `horizon` steps over the time-expanded product
/// graph, or `None` when no plan fits.
pub fn oracle_time_expanded(
    roadmaps: &[LatticeRoadmap],
    dims: Dims,
    horizon: usize,
    check: CollisionCheck,
) -> Result<Option<CompositePlan>> {
    if roadmaps.is_empty() {
        return Err(Error::Contract("no roadmaps to plan over".into()));
    }
    let sizes: Vec<usize> = roadmaps.iter().map(|rm| rm.num_vertices()).collect();
    let states = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&p| p <= ORACLE_STATE_LIMIT));
    let Some(states) = states else {
        return Err(Error::Resource {
            states: sizes.iter().map(|&s| s as f64).product::<f64>() as u64,
            limit: ORACLE_STATE_LIMIT as u64,
        });
    };
    let n = roadmaps.len();
    let tables: Vec<RobotTables> = roadmaps.iter().map(|rm| RobotTables::new(rm, dims)).collect();
    let encode = |v: &[usize]| v.iter().zip(&sizes).fold(0usize, |acc, (&x, &s)| acc * s + x);
    let decode = |mut code: usize, out: &mut [usize]| {
        for i in (0..n).rev() {
            out[i] = code % sizes[i];
            code /= sizes[i];
        }
    };
    let start: Vec<usize> = roadmaps.iter().map(|rm| rm.start).collect();
    let goal = encode(&roadmaps.iter().map(|rm| rm.goal).collect::<Vec<_>>());

    // layer t: state -> (cost, predecessor state)
    let mut layers: Vec<HashMap<usize, (f64, usize)>> = vec![HashMap::from([(encode(&start), (0.0, usize::MAX))])];
    let mut best: Option<(f64, usize)> = layers[0].get(&goal).map(|&(c, _)| (c, 0));
    let mut cur = vec![0usize; n];
    let mut choice = vec![0usize; n];
    let mut next = vec![0usize; n];
    let mut motions = Vec::with_capacity(n);
    for t in 0..horizon {
        let mut layer: HashMap<usize, (f64, usize)> = HashMap::new();
        let mut frontier: Vec<(&usize, &(f64, usize))> = layers[t].iter().collect();
        frontier.sort_unstable_by_key(|(s, _)| **s);
        for (&s, &(c, _)) in frontier {
            decode(s, &mut cur);
            choice.iter_mut().for_each(|x| *x = 0);
            // odometer over the per-robot move lists
            'combos: loop {
                motions.clear();
                let mut step = 0.0;
                for i in 0..n {
                    let mv = &tables[i].moves[cur[i]][choice[i]];
                    motions.push(mv.motion);
                    next[i] = mv.to as usize;
                    step += mv.length;
                }
                if first_conflict(&motions, check).is_none() {
                    let code = encode(&next);
                    let cand = c + step;
                    let e = layer.entry(code).or_insert((f64::INFINITY, usize::MAX));
                    if cand < e.0 {
                        *e = (cand, s);
                    }
                }
                for i in 0..n {
                    choice[i] += 1;
                    if choice[i] < tables[i].moves[cur[i]].len() {
                        continue 'combos;
                    }
                    choice[i] = 0;
                }
                break;
            }
        }
        if let Some(&(c, _)) = layer.get(&goal) {
            if best.map_or(true, |(b, _)| c < b) {
                best = Some((c, t + 1));
            }
        }
        layers.push(layer);
    }
    let _ = states;
    Ok(best.map(|(cost, t)| {
        let mut steps = Vec::with_capacity(t + 1);
        let mut s = goal;
        for k in (0..=t).rev() {
            let mut v = vec![0; n];
            decode(s, &mut v);
            steps.push(v);
            s = layers[k][&s].1;
        }
        steps.reverse();
        CompositePlan { steps, cost }
    }))
}

// ---------------------------------------------------------------------------
// trajectories

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    /// Time in step units.
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    pub robot_id: u32,
    pub samples: Vec<TimedPose>,
}

impl TimedTrajectory {
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Pose at time `t`: position interpolated linearly, heading held from the
    /// sample on the left.
    pub fn pose_at(&self, t: f64) -> Pose {
        let s = &self.samples;
        let k = s.partition_point(|p| p.t <= t);
        if k == 0 {
            return s[0].pose;
        }
        if k == s.len() {
            return s[k - 1].pose;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let f = (t - a.t) / (b.t - a.t);
        Pose {
            position: a.pose.position.lerp(b.pose.position, f),
            heading: a.pose.heading,
        }
    }
}

/// One trajectory per robot; step `k` spans `[k, k + 1]` and is sampled
/// `samples_per_step` times (at least twice), plus a closing sample.
pub fn extract_trajectories(
    plan: &CompositePlan,
    roadmaps: &[LatticeRoadmap],
    robot_ids: &[u32],
    samples_per_step: usize,
) -> Vec<TimedTrajectory> {
    let m = samples_per_step.max(2);
    (0..plan.num_robots())
        .map(|i| {
            let rm = &roadmaps[i];
            let mut samples = Vec::with_capacity(plan.num_steps() * m + 1);
            let mut last = rm.vertices[plan.steps[0][i]].pose;
            for (k, w) in plan.steps.windows(2).enumerate() {
                let (a, b) = (w[0][i], w[1][i]);
                if a == b {
                    let pose = rm.vertices[a].pose;
                    for j in 0..m {
                        samples.push(TimedPose {
                            t: k as f64 + j as f64 / m as f64,
                            pose,
                        });
                    }
                    last = pose;
                } else {
                    let (pa, pb) = (rm.position(a), rm.position(b));
                    let heading = (pb - pa).angle();
                    for j in 0..m {
                        let f = j as f64 / m as f64;
                        samples.push(TimedPose {
                            t: k as f64 + f,
                            pose: Pose::new(pa.lerp(pb, f), heading),
                        });
                    }
                    last = Pose::new(pb, heading);
                }
            }
            samples.push(TimedPose {
                t: plan.num_steps() as f64,
                pose: last,
            });
            TimedTrajectory {
                robot_id: robot_ids.get(i).copied().unwrap_or(i as u32 + 1),
                samples,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// audit

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollisionEvent {
    Robots { a: u32, b: u32, t: f64 },
    Static { robot: u32, t: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub events: Vec<CollisionEvent>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.events.is_empty()
    }
}

/// Polygon overlap from corners and edges; touching counts.
fn footprints_touch(a: &OrientedRect, b: &OrientedRect) -> bool {
    let (ca, cb) = (a.corners(), b.corners());
    if ca.iter().any(|&p| b.contains(p)) || cb.iter().any(|&p| a.contains(p)) {
        return true;
    }
    (0..4).any(|i| (0..4).any(|j| segments_intersect(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])))
}

/// Checks trajectories at `resolution` instants per step for robot-robot
/// contact and static collisions.
pub fn validate_plan(
    trajs: &[TimedTrajectory],
    env: &Environment,
    dims: Dims,
    resolution: usize,
) -> Result<AuditReport> {
    let Some(first) = trajs.first() else {
        return Ok(AuditReport::default());
    };
    if first.samples.is_empty() {
        return Err(Error::Contract("trajectory without samples".into()));
    }
    for tr in trajs {
        if tr.samples.len() != first.samples.len() || tr.samples.iter().zip(&first.samples).any(|(a, b)| a.t != b.t) {
            return Err(Error::Contract(format!(
                "robot {} does not share the time grid of robot {}",
                tr.robot_id, first.robot_id
            )));
        }
    }
    let res = resolution.max(1);
    let t0 = first.samples[0].t;
    let span = first.end_time() - t0;
    let count = (span * res as f64).round() as usize;
    let mut report = AuditReport::default();
    let mut rects = Vec::with_capacity(trajs.len());
    for j in 0..=count {
        let t = t0 + (j / res) as f64 + (j % res) as f64 / res as f64;
        rects.clear();
        for tr in trajs {
            let pose = tr.pose_at(t);
            let r = OrientedRect::at_pose(&pose, dims.length, dims.width);
            if rect_collides_static(&r, env) {
                report.events.push(CollisionEvent::Static { robot: tr.robot_id, t });
            }
            rects.push(r);
        }
        for a in 0..rects.len() {
            for b in a + 1..rects.len() {
                if footprints_touch(&rects[a], &rects[b]) {
                    report.events.push(CollisionEvent::Robots {
                        a: trajs[a].robot_id,
                        b: trajs[b].robot_id,
                        t,
                    });
                }
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// export

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDoc {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotTrackDoc {
    pub id: u32,
    pub samples: Vec<SampleDoc>,
}

/// Plan file consumed by the renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanExport {
    pub cost: f64,
    pub robots: Vec<RobotTrackDoc>,
}

impl PlanExport {
    pub fn new(cost: f64, trajs: &[TimedTrajectory]) -> PlanExport {
        PlanExport {
            cost,
            robots: trajs
                .iter()
                .map(|tr| RobotTrackDoc {
                    id: tr.robot_id,
                    samples: tr
                        .samples
                        .iter()
                        .map(|s| SampleDoc {
                            t: s.t,
                            x: s.pose.position.x,
                            y: s.pose.position.y,
                            theta: s.pose.heading,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Parses and checks a plan file: finite numbers, non-empty tracks with
    /// strictly increasing times.
    pub fn from_json(bytes: &[u8]) -> Result<PlanExport> {
        let doc: PlanExport = serde_json::from_slice(bytes)?;
        if !doc.cost.is_finite() {
            return Err(Error::validation("cost", None, "must be finite"));
        }
        for r in &doc.robots {
            if r.samples.is_empty() {
                return Err(Error::validation("samples", Some(r.id), "empty track"));
            }
            if r.samples.iter().any(|s| !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.theta.is_finite())) {
                return Err(Error::validation("samples", Some(r.id), "non-finite value"));
            }
            if r.samples.windows(2).any(|w| w[1].t <= w[0].t) {
                return Err(Error::validation("samples", Some(r.id), "times must increase strictly"));
            }
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan export serializes")
    }

    pub fn trajectories(&self) -> Vec<TimedTrajectory> {
        self.robots
            .iter()
            .map(|r| TimedTrajectory {
                robot_id: r.id,
                samples: r
                    .samples
                    .iter()
                    .map(|s| TimedPose {
                        t: s.t,
                        pose: Pose::new(Point2::new(s.x, s.y), s.theta),
                    })
                    .collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polyline;
    use crate::roadmap::{build_lattice, Layer};
    use std::f64::consts::PI;

    const DIMS: Dims = Dims { length: 3.2, width: 0.8 };
    const SAMPLED: CollisionCheck = CollisionCheck::Sampled(PLANNING_SAMPLES);

    fn env(w: f64, h: f64) -> Environment {
        Environment {
            width: w,
            height: h,
            obstacles: vec![],
        }
    }

    fn lattice(a: (f64, f64), b: (f64, f64), base: f64, h: f64, env: &Environment) -> LatticeRoadmap {
        let r = Polyline::new(vec![Point2::new(a.0, a.1), Point2::new(b.0, b.1)]).unwrap();
        build_lattice(&r, base, h, env, (DIMS.length, DIMS.width)).unwrap()
    }

    fn mid(rm: &LatticeRoadmap, i: usize) -> usize {
        rm.find(Layer::Mid, i + 1).unwrap()
    }

    fn plan(rms: &[LatticeRoadmap], budget: usize, seed: u64) -> PlanOutcome {
        let cfg = PlannerConfig {
            budget,
            ..PlannerConfig::default()
        };
        plan_composite(rms, DIMS, &cfg, &mut RngStream::new(seed)).unwrap()
    }

    fn small_crossing() -> (Environment, Vec<LatticeRoadmap>) {
        let e = env(14.0, 14.0);
        let rms = vec![
            lattice((2.0, 7.0), (12.0, 7.0), 2.0, 1.0, &e),
            lattice((7.0, 2.0), (7.0, 12.0), 2.0, 1.0, &e),
        ];
        (e, rms)
    }

    fn audit(plan: &CompositePlan, rms: &[LatticeRoadmap], e: &Environment) -> AuditReport {
        let ids: Vec<u32> = (1..=rms.len() as u32).collect();
        let trajs = extract_trajectories(plan, rms, &ids, TRAJECTORY_SAMPLES);
        validate_plan(&trajs, e, DIMS, AUDIT_SAMPLES).unwrap()
    }

    #[test]
    fn parallel_lanes_are_free() {
        let e = env(30.0, 20.0);
        let rms = [
            lattice((2.0, 6.0), (22.0, 6.0), 2.0, 1.0, &e),
            lattice((2.0, 10.0), (22.0, 10.0), 2.0, 1.0, &e),
        ];
        let from = [mid(&rms[0], 0), mid(&rms[1], 0)];
        let to = [mid(&rms[0], 1), mid(&rms[1], 1)];
        for check in [SAMPLED, CollisionCheck::Continuous] {
            assert!(validate_transition(&rms, &from, &to, DIMS, check).unwrap());
        }
    }

    #[test]
    fn swapping_on_one_segment_collides() {
        let e = env(30.0, 20.0);
        let rms = [
            lattice((5.0, 10.0), (15.0, 10.0), 10.0, 1.0, &e),
            lattice((15.0, 10.0), (5.0, 10.0), 10.0, 1.0, &e),
        ];
        let from = [mid(&rms[0], 0), mid(&rms[1], 0)];
        let to = [mid(&rms[0], 1), mid(&rms[1], 1)];
        for check in [SAMPLED, CollisionCheck::Continuous] {
            assert!(!validate_transition(&rms, &from, &to, DIMS, check).unwrap());
        }
    }

    #[test]
    fn passing_a_waiting_robot_too_close_collides() {
        let e = env(30.0, 20.0);
        let rms = [
            lattice((10.0, 10.0), (20.0, 10.0), 2.0, 1.0, &e),
            lattice((5.0, 10.5), (25.0, 10.5), 4.0, 1.0, &e),
        ];
        let stay = mid(&rms[0], 0);
        // robot 2 drives from x=13 to x=17 right beside robot 1 at x=10..
        let from = [stay, mid(&rms[1], 2)];
        let to = [stay, mid(&rms[1], 3)];
        assert!(!validate_transition(&rms, &from, &to, DIMS, SAMPLED).unwrap());
        let far = [
            lattice((10.0, 10.0), (20.0, 10.0), 2.0, 1.0, &e),
            lattice((5.0, 14.0), (25.0, 14.0), 4.0, 1.0, &e),
        ];
        assert!(validate_transition(&far, &from, &to, DIMS, SAMPLED).unwrap());
    }

    #[test]
    fn illegal_move_is_contract_error() {
        let e = env(30.0, 20.0);
        let rms = [lattice((2.0, 6.0), (22.0, 6.0), 2.0, 1.0, &e)];
        let r = validate_transition(&rms, &[mid(&rms[0], 0)], &[mid(&rms[0], 3)], DIMS, SAMPLED);
        assert!(matches!(r, Err(Error::Contract(_))));
        let r = validate_transition(&rms, &[0, 0], &[0, 0], DIMS, SAMPLED);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn single_robot_corridor_follows_mid_chain() {
        let e = env(50.0, 10.0);
        let rms = [lattice((5.0, 5.0), (45.0, 5.0), 2.0, 1.0, &e)];
        let out = plan(&rms, 500, 1);
        let p = out.plan().expect("plan");
        assert!((p.cost - 40.0).abs() < 1e-9);
        assert!((p.cost - shortest_path_length(&rms[0]).unwrap()).abs() < 1e-9);
        assert!(p.robot_path(0).iter().all(|&v| rms[0].vertices[v].layer == Layer::Mid));
    }

    #[test]
    fn empty_roadmap_list_is_contract_error() {
        let r = plan_composite(&[], DIMS, &PlannerConfig::default(), &mut RngStream::new(0));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn crossing_needs_a_wait_or_detour() {
        let (e, rms) = small_crossing();
        let naive = CompositePlan {
            steps: (0..6).map(|k| vec![mid(&rms[0], k), mid(&rms[1], k)]).collect(),
            cost: 20.0,
        };
        assert!(!audit(&naive, &rms, &e).is_clean());

        let oracle = oracle_time_expanded(&rms, DIMS, 20, CollisionCheck::Continuous).unwrap();
        assert!(oracle.is_some());
        let out = plan(&rms, 10_000, 3);
        let p = out.plan().expect("crossing plan");
        let waits = (0..2).any(|i| p.robot_path(i).windows(2).any(|w| w[0] == w[1]));
        let detours = (0..2).any(|i| p.robot_path(i).iter().any(|&v| rms[i].vertices[v].layer != Layer::Mid));
        assert!(waits || detours);
        assert!(audit(p, &rms, &e).is_clean());
    }

    #[test]
    fn swapped_goals_in_narrow_corridor_fail() {
        // the map is too thin for the side bands, so nobody can pass
        let e = env(40.0, 2.0);
        let rms = vec![
            lattice((3.0, 1.0), (37.0, 1.0), 2.0, 1.0, &e),
            lattice((37.0, 1.0), (3.0, 1.0), 2.0, 1.0, &e),
        ];
        assert!(rms.iter().all(|rm| rm.vertices.iter().all(|v| v.layer == Layer::Mid)));
        assert!(oracle_time_expanded(&rms, DIMS, 60, CollisionCheck::Continuous).unwrap().is_none());
        match plan(&rms, 2000, 5) {
            PlanOutcome::Failed(f) => {
                assert!(f.robots_not_at_goal >= 1);
                assert!(f.remaining_distance > 0.0);
            }
            PlanOutcome::Found(_) => panic!("no plan exists"),
        }
    }

    #[test]
    fn oracle_single_robot_matches_shortest_path() {
        let e = env(30.0, 20.0);
        let rms = [lattice((2.0, 6.0), (13.0, 9.0), 2.5, 1.5, &e)];
        let p = oracle_time_expanded(&rms, DIMS, 20, SAMPLED).unwrap().unwrap();
        assert!((p.cost - shortest_path_length(&rms[0]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn oracle_parallel_lanes_is_sum_of_shortest() {
        let e = env(30.0, 20.0);
        let rms = [
            lattice((2.0, 5.0), (12.0, 5.0), 2.0, 1.0, &e),
            lattice((2.0, 12.0), (14.0, 12.0), 3.0, 1.0, &e),
        ];
        let p = oracle_time_expanded(&rms, DIMS, 20, SAMPLED).unwrap().unwrap();
        let sum: f64 = rms.iter().map(|r| shortest_path_length(r).unwrap()).sum();
        assert!((p.cost - sum).abs() < 1e-9);
        assert!((p.cost - 22.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_crossing_costs_at_least_sum_of_shortest() {
        let (_, rms) = small_crossing();
        let p = oracle_time_expanded(&rms, DIMS, 20, CollisionCheck::Continuous).unwrap().unwrap();
        let sum: f64 = rms.iter().map(|r| shortest_path_length(r).unwrap()).sum();
        assert!(p.cost >= sum - 1e-9);
        for w in p.steps.windows(2) {
            assert!(validate_transition(&rms, &w[0], &w[1], DIMS, CollisionCheck::Continuous).unwrap());
        }
        let total: f64 = (0..2).map(|i| p.path_length(&rms, i).unwrap()).sum();
        assert!((total - p.cost).abs() < 1e-9);
    }

    #[test]
    fn oracle_refuses_large_products() {
        let e = env(200.0, 20.0);
        let rm = lattice((2.0, 10.0), (190.0, 10.0), 1.0, 1.0, &e);
        let rms = vec![rm.clone(), rm.clone(), rm];
        assert!(matches!(
            oracle_time_expanded(&rms, DIMS, 5, SAMPLED),
            Err(Error::Resource { .. })
        ));
    }

    fn random_scenario(rng: &mut RngStream) -> (Environment, Vec<LatticeRoadmap>) {
        let e = env(40.0, 40.0);
        let n = 2 + rng.next_below(2);
        let base = rng.uniform_in(0.0, 2.0 * PI);
        let rms = (0..n)
            .map(|k| {
                let ang = base + k as f64 * 2.0 * PI / n as f64 + rng.uniform_in(-0.4, 0.4);
                let d = Point2::from_angle(ang);
                let c = Point2::new(20.0 + rng.uniform_in(-3.0, 3.0), 20.0 + rng.uniform_in(-3.0, 3.0));
                let (a, b) = (c - d * 14.0, c + d * 14.0);
                lattice((a.x, a.y), (b.x, b.y), rng.uniform_in(1.5, 4.0), rng.uniform_in(0.5, 2.0), &e)
            })
            .collect();
        (e, rms)
    }

    #[test]
    fn returned_plans_pass_the_audit() {
        let mut rng = RngStream::new(99);
        let mut found = 0;
        for s in 0..100 {
            let (e, rms) = random_scenario(&mut rng);
            if let PlanOutcome::Found(p) = plan(&rms, 2000, s) {
                found += 1;
                let report = audit(&p, &rms, &e);
                assert!(report.is_clean(), "scenario {s}: {:?}", report.events.first());
                let sum: f64 = rms.iter().map(|r| shortest_path_length(r).unwrap()).sum();
                assert!(p.cost >= sum - 1e-9);
            }
        }
        assert!(found >= 80, "only {found} plans");
    }

    #[test]
    fn planner_never_beats_the_oracle() {
        let (_, rms) = small_crossing();
        let best = oracle_time_expanded(&rms, DIMS, 20, CollisionCheck::Continuous).unwrap().unwrap();
        for seed in 0..30 {
            if let PlanOutcome::Found(p) = plan(&rms, 3000, seed) {
                assert!(p.cost >= best.cost - 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let mut rng = RngStream::new(4);
        let (_, rms) = random_scenario(&mut rng);
        assert_eq!(plan(&rms, 1500, 8), plan(&rms, 1500, 8));
    }

    #[test]
    fn tree_costs_never_increase() {
        let (_, rms) = small_crossing();
        let cfg = PlannerConfig {
            budget: 3000,
            ..PlannerConfig::default()
        };
        let mut search = Search::new(&rms, DIMS, cfg);
        let mut rng = RngStream::new(12);
        let mut seen: Vec<f64> = search.tree.cost.clone();
        for _ in 0..cfg.budget {
            search.expand(&mut rng);
            for (k, &c) in search.tree.cost.iter().enumerate() {
                if k < seen.len() {
                    assert!(c <= seen[k] + 1e-12);
                }
            }
            seen = search.tree.cost.clone();
        }
        // the stored costs agree with the parent chain
        for k in 1..search.tree.len() {
            let p = search.tree.parent[k] as usize;
            assert!((search.tree.cost[k] - search.tree.cost[p] - search.tree.step[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn trailing_waits_are_free() {
        let (e, rms) = small_crossing();
        let p = plan(&rms, 5000, 2).plan().cloned().unwrap();
        let q = p.padded(4);
        let total: f64 = (0..2).map(|i| q.path_length(&rms, i).unwrap()).sum();
        assert!((total - p.cost).abs() < 1e-9);
        assert_eq!(q.num_steps(), p.num_steps() + 4);
        assert!(audit(&q, &rms, &e).is_clean());
    }

    #[test]
    fn trajectory_shapes() {
        let e = env(30.0, 20.0);
        let rms = [
            lattice((2.0, 5.0), (10.0, 5.0), 2.0, 1.0, &e),
            lattice((2.0, 12.0), (10.0, 12.0), 2.0, 1.0, &e),
        ];
        let w = mid(&rms[1], 0);
        let p = CompositePlan {
            steps: (0..4).map(|k| vec![mid(&rms[0], k), w]).collect(),
            cost: 6.0,
        };
        let trajs = extract_trajectories(&p, &rms, &[1, 2], 4);
        assert_eq!(trajs[0].end_time(), 3.0);
        assert_eq!(trajs[0].samples.len(), 13);
        assert!(trajs[0].samples.windows(2).all(|w| w[1].t > w[0].t));
        let held = rms[1].vertices[w].pose;
        assert!(trajs[1].samples.iter().all(|s| s.pose == held));
        let grid = |t: &TimedTrajectory| t.samples.iter().map(|s| s.t).collect::<Vec<_>>();
        assert_eq!(grid(&trajs[0]), grid(&trajs[1]));
        assert!((trajs[0].pose_at(1.5).position.x - 5.0).abs() < 1e-12);
    }

    #[test]
    fn audit_reports_collisions() {
        let track = |id, x: f64| TimedTrajectory {
            robot_id: id,
            samples: vec![
                TimedPose {
                    t: 0.0,
                    pose: Pose::new(Point2::new(x, 5.0), 0.0),
                },
                TimedPose {
                    t: 1.0,
                    pose: Pose::new(Point2::new(10.0, 5.0), 0.0),
                },
            ],
        };
        let e = env(20.0, 10.0);
        let report = validate_plan(&[track(1, 2.0), track(2, 18.0)], &e, DIMS, 10).unwrap();
        assert!(report.events.iter().any(|ev| matches!(ev, CollisionEvent::Robots { a: 1, b: 2, .. })));
        let single = validate_plan(&[track(1, 2.0)], &e, DIMS, 10).unwrap();
        assert!(single.is_clean());
        let wall = validate_plan(&[track(1, 0.5)], &e, DIMS, 10).unwrap();
        assert!(matches!(wall.events[0], CollisionEvent::Static { robot: 1, t } if t == 0.0));
    }

    #[test]
    fn audit_rejects_mismatched_grids() {
        let a = TimedTrajectory {
            robot_id: 1,
            samples: vec![
                TimedPose {
                    t: 0.0,
                    pose: Pose::new(Point2::new(5.0, 5.0), 0.0),
                },
                TimedPose {
                    t: 1.0,
                    pose: Pose::new(Point2::new(5.0, 5.0), 0.0),
                },
            ],
        };
        let mut b = a.clone();
        b.robot_id = 2;
        b.samples[1].t = 1.5;
        assert!(matches!(
            validate_plan(&[a, b], &env(20.0, 20.0), DIMS, 10),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn export_round_trip() {
        let (_, rms) = small_crossing();
        let p = plan(&rms, 3000, 1).plan().cloned().unwrap();
        let trajs = extract_trajectories(&p, &rms, &[1, 2], TRAJECTORY_SAMPLES);
        let doc = PlanExport::new(p.cost, &trajs);
        let back = PlanExport::from_json(doc.to_json().as_bytes()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.trajectories().len(), 2);
        assert!(PlanExport::from_json(b"{\"cost\":1,\"robots\":[{\"id\":1,\"samples\":[]}]}").is_err());
        assert!(PlanExport::from_json(b"{\"cost\":1,\"robots\":[],\"x\":0}").is_err());
    }
}
