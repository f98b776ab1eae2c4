//! Black-box cost of a roadmap parameter vector.
//!
//! A vector holds one `(b, h)` pair per robot, laid out as
//! `(b1, h1, b2, h2, ...)`. Evaluating it builds every robot's lattice,
//! plans jointly and returns the plan length, or a penalty above
//! [`PENALTY_BASE`] when no joint plan was found.

use crate::error::{Error, Result};
use crate::planner::{plan_composite, CompositePlan, Dims, PlanOutcome, PlannerConfig};
use crate::rng::{labels, RngStream};
use crate::roadmap::{build_lattice, shortest_path_length, LatticeRoadmap};
use crate::scenario::Scenario;

/// Penalized costs start here; no feasible plan on a desk-scale map gets close.
pub const PENALTY_BASE: f64 = 1e6;
/// Added per robot that did not reach its goal.
pub const PENALTY_PER_ROBOT: f64 = 100.0;

pub const BASE_BOUNDS: (f64, f64) = (1.0, 6.0);
pub const HEIGHT_BOUNDS: (f64, f64) = (0.5, 5.0);

/// Per-dimension box constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Bounds> {
        if low.len() != high.len() {
            return Err(Error::Contract("bound vectors differ in length".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::Contract("every bound needs finite low <= high".into()));
        }
        Ok(Bounds { low, high })
    }

    /// Roadmap bounds for `n` robots.
    pub fn roadmap(n: usize) -> Bounds {
        let mut low = Vec::with_capacity(2 * n);
        let mut high = Vec::with_capacity(2 * n);
        for _ in 0..n {
            low.extend([BASE_BOUNDS.0, HEIGHT_BOUNDS.0]);
            high.extend([BASE_BOUNDS.1, HEIGHT_BOUNDS.1]);
        }
        Bounds { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, &l), &h) in x.iter_mut().zip(&self.low).zip(&self.high) {
            *v = v.clamp(l, h);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.low).zip(&self.high).all(|((v, l), h)| l <= v && v <= h)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(&l, &h)| rng.uniform_in(l, h))
            .collect()
    }
}

/// Outcome of one objective call.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub feasible: bool,
    pub plan: Option<CompositePlan>,
    pub fe_index: u64,
}

impl Evaluation {
    pub fn penalized(cost: f64, fe_index: u64) -> Evaluation {
        Evaluation {
            cost,
            feasible: false,
            plan: None,
            fe_index,
        }
    }
}

/// Splits `x` into one `(b, h)` pair per robot.
pub fn decode(x: &[f64], scenario: &Scenario) -> Result<Vec<(f64, f64)>> {
    let n = scenario.num_robots();
    if x.len() != 2 * n {
        return Err(Error::Contract(format!(
            "parameter vector has {} entries, scenario needs {}",
            x.len(),
            2 * n
        )));
    }
    Ok(x.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

pub fn build_roadmaps(x: &[f64], scenario: &Scenario) -> Result<Vec<LatticeRoadmap>> {
    decode(x, scenario)?
        .into_iter()
        .zip(&scenario.robots)
        .map(|((b, h), r)| build_lattice(&r.reference, b, h, &scenario.env, scenario.dims()))
        .collect()
}

pub fn penalty(robots_not_at_goal: usize, remaining_distance: f64) -> f64 {
    PENALTY_BASE + PENALTY_PER_ROBOT * robots_not_at_goal as f64 + remaining_distance
}

/// Cost of `x` on `scenario`; the planner's randomness comes from `eval_seed`.
pub fn evaluate(x: &[f64], scenario: &Scenario, eval_seed: u64, config: &PlannerConfig) -> Result<Evaluation> {
    let bounds = Bounds::roadmap(scenario.num_robots());
    decode(x, scenario)?;
    if !bounds.contains(x) {
        return Err(Error::Contract("parameter vector outside the roadmap bounds".into()));
    }
    let roadmaps = build_roadmaps(x, scenario)?;
    if roadmaps.iter().any(|rm| shortest_path_length(rm).is_none()) {
        let straight: f64 = scenario
            .robots
            .iter()
            .map(|r| r.start.position.distance(r.goal.position))
            .sum();
        return Ok(Evaluation::penalized(penalty(scenario.num_robots(), straight), 0));
    }
    let mut rng = RngStream::new(eval_seed).derive(labels::PLANNER);
    let dims = Dims::from(scenario.dims());
    Ok(match plan_composite(&roadmaps, dims, config, &mut rng)? {
        PlanOutcome::Found(plan) => Evaluation {
            cost: plan.cost,
            feasible: true,
            plan: Some(plan),
            fe_index: 0,
        },
        PlanOutcome::Failed(f) => Evaluation::penalized(penalty(f.robots_not_at_goal, f.remaining_distance), 0),
    })
}

/// Anything the optimizers can minimize.
pub trait Objective: Sync {
    fn bounds(&self) -> Bounds;

    fn evaluate(&self, x: &[f64], fe_index: u64, eval_seed: u64) -> Result<Evaluation>;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Name recorded as the instance in run records.
    fn label(&self) -> &str {
        ""
    }
}

/// The roadmap-tuning objective on one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioObjective {
    pub scenario: Scenario,
    pub planner: PlannerConfig,
}

impl ScenarioObjective {
    pub fn new(scenario: Scenario, planner: PlannerConfig) -> Self {
        ScenarioObjective { scenario, planner }
    }
}

impl Objective for ScenarioObjective {
    fn bounds(&self) -> Bounds {
        Bounds::roadmap(self.scenario.num_robots())
    }

    fn evaluate(&self, x: &[f64], fe_index: u64, eval_seed: u64) -> Result<Evaluation> {
        let mut e = evaluate(x, &self.scenario, eval_seed, &self.planner)?;
        e.fe_index = fe_index;
        Ok(e)
    }

    fn label(&self) -> &str {
        &self.scenario.name
    }
}
