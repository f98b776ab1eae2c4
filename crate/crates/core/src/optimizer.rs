//! RADES and the two differential-evolution baselines.
//!
//! All three share one state machine: a population of `np` individuals,
//! greedy one-to-one replacement and a best-so-far trace per function
//! evaluation. RADES adds rank-biased donor selection and a bounded archive
//! of successful trials that a stagnating slot draws from instead of the
//! population.
//!
//! Donors, ranks and the best individuals are taken from a snapshot made at
//! the start of each generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Bounds, Evaluation, Objective};
use crate::rng::{labels, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rades,
    Derand,
    Rbde,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Rades, Algorithm::Derand, Algorithm::Rbde];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rades => "rades",
            Algorithm::Derand => "derand",
            Algorithm::Rbde => "rbde",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Precondition(format!("unknown algorithm {s:?} (expected rades, derand or rbde)")))
    }
}

/// How a stagnating RADES slot picks its archive base vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArchiveBase {
    /// Entry `i mod |archive|` in insertion order.
    #[default]
    Slot,
    /// Entry `i mod |archive|` in ascending fitness order.
    Rank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub np: usize,
    pub f: f64,
    pub cr: f64,
    /// Stagnation threshold: a slot that failed more than this many times in
    /// a row mutates from the archive.
    pub q: u32,
    pub beta: f64,
    pub max_fes: u64,
    pub archive_base: ArchiveBase,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            np: 10,
            f: 0.7,
            cr: 0.5,
            q: 128,
            beta: 2.0,
            max_fes: 300,
            archive_base: ArchiveBase::Slot,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let min_np = if algorithm == Algorithm::Rades { 3 } else { 4 };
        if self.np < min_np {
            return Err(Error::Contract(format!("{algorithm} needs a population of at least {min_np}")));
        }
        if !(self.f.is_finite() && self.f > 0.0) {
            return Err(Error::Contract(format!("scale factor {} must be positive", self.f)));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::Range {
                value: self.cr,
                low: 0.0,
                high: 1.0,
            });
        }
        if !(self.beta.is_finite() && self.beta > 1.0) {
            return Err(Error::Contract(format!("rank bias {} must exceed 1", self.beta)));
        }
        if self.max_fes < self.np as u64 {
            return Err(Error::Contract(format!(
                "max_fes {} cannot cover the initial population of {}",
                self.max_fes, self.np
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub x: Vec<f64>,
    pub fitness: f64,
    pub insertion_order: u64,
}

/// One finished run as persisted in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub instance: String,
    pub seed: u64,
    /// `(fe, best cost after that evaluation)`.
    pub trace: Vec<(u64, f64)>,
    pub best_x: Vec<f64>,
    pub best_cost: f64,
    pub feasible: bool,
    /// Set when the run aborted; the other fields are then placeholders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(algorithm: Algorithm, instance: &str, seed: u64, message: String) -> RunRecord {
        RunRecord {
            algorithm,
            instance: instance.to_string(),
            seed,
            trace: Vec::new(),
            best_x: Vec::new(),
            best_cost: 0.0,
            feasible: false,
            error: Some(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Evaluation of the best individual, including its plan when feasible.
    pub best: Evaluation,
}

/// Rank drawn by inverting a linearly decreasing rank density; 0 is the best.
pub fn rank_index(r: f64, pop_size: usize, beta: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Range {
            value: r,
            low: 0.0,
            high: 1.0,
        });
    }
    if pop_size == 0 || !(beta > 1.0) {
        return Err(Error::Contract(format!("rank_index needs pop_size >= 1 and beta > 1, got {pop_size}, {beta}")));
    }
    let p = pop_size as f64;
    let disc = (beta * beta - 4.0 * (beta - 1.0) * r).max(0.0);
    let raw = (p / (2.0 * beta - 1.0) * (beta - disc.sqrt())).floor();
    Ok((raw.max(0.0) as usize).min(pop_size - 1))
}

/// Binomial crossover mask; `jrand` is 1-based and always set.
pub fn crossover_mask(d: usize, cr: f64, jrand: usize, rng: &mut RngStream) -> Result<Vec<bool>> {
    if !(1..=d).contains(&jrand) {
        return Err(Error::Contract(format!("jrand {jrand} outside 1..={d}")));
    }
    Ok((1..=d).map(|k| rng.next_uniform() < cr || k == jrand).collect())
}

/// Takes `v` where the mask is set and `x_ref` elsewhere, then clamps.
pub fn make_trial(x_ref: &[f64], v: &[f64], mask: &[bool], bounds: &Bounds) -> Result<Vec<f64>> {
    if x_ref.len() != v.len() || v.len() != mask.len() || mask.len() != bounds.dim() {
        return Err(Error::Contract("trial operands differ in dimension".into()));
    }
    let mut u: Vec<f64> = x_ref
        .iter()
        .zip(v)
        .zip(mask)
        .map(|((&a, &b), &m)| if m { b } else { a })
        .collect();
    bounds.clamp(&mut u);
    Ok(u)
}

/// Donor pools frozen at the start of a generation.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    /// Population vectors, best first.
    pub ranked: Vec<Vec<f64>>,
    /// Archive in insertion order.
    pub archive: Vec<ArchiveEntry>,
    /// Archive, best first.
    pub archive_ranked: Vec<ArchiveEntry>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    pub config: OptimizerConfig,
    pub bounds: Bounds,
    pub seed: u64,
    pub population: Vec<Individual>,
    pub archive: Vec<ArchiveEntry>,
    pub stagnation: Vec<u32>,
    pub fe_count: u64,
    pub generation: u64,
    /// How many trials were mutated from the archive.
    pub archive_draws: u64,
    pub trace: Vec<(u64, f64)>,
    pub snapshot: Snapshot,
    best: Option<Evaluation>,
    best_x: Vec<f64>,
    next_order: u64,
    evals: RngStream,
}

fn ascending(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order
}

fn distinct_ranks<const K: usize>(len: usize, beta: f64, rng: &mut RngStream) -> Result<[usize; K]> {
    if len < K {
        return Err(Error::Contract(format!("need {K} distinct ranks from a pool of {len}")));
    }
    let mut out = [0usize; K];
    for k in 0..K {
        out[k] = loop {
            let r = rank_index(rng.next_uniform(), len, beta)?;
            if !out[..k].contains(&r) {
                break r;
            }
        };
    }
    Ok(out)
}

/// Three distinct indices below `np`, none equal to `i`.
fn uniform_donors(np: usize, i: usize, rng: &mut RngStream) -> [usize; 3] {
    let mut picked = [i; 4];
    for k in 1..4 {
        picked[k] = loop {
            let c = rng.next_below(np);
            if !picked[..k].contains(&c) {
                break c;
            }
        };
    }
    [picked[1], picked[2], picked[3]]
}

fn de_vector(base: &[f64], a: &[f64], b: &[f64], f: f64) -> Vec<f64> {
    base.iter().zip(a).zip(b).map(|((&x, &y), &z)| x + f * (y - z)).collect()
}

impl OptimizerState {
    /// Samples and evaluates the initial population; the archive starts as
    /// a copy of it.
    pub fn init(
        algorithm: Algorithm,
        objective: &dyn Objective,
        config: &OptimizerConfig,
        seed: u64,
        rng: &mut RngStream,
    ) -> Result<OptimizerState> {
        config.validate(algorithm)?;
        let bounds = objective.bounds();
        let mut s = OptimizerState {
            algorithm,
            config: config.clone(),
            seed,
            population: Vec::with_capacity(config.np),
            archive: Vec::new(),
            stagnation: vec![0; config.np],
            fe_count: 0,
            generation: 0,
            archive_draws: 0,
            trace: Vec::with_capacity(config.max_fes as usize),
            snapshot: Snapshot::default(),
            best: None,
            best_x: Vec::new(),
            next_order: 0,
            evals: RngStream::new(seed).derive(labels::EVALUATION),
            bounds,
        };
        let xs: Vec<Vec<f64>> = (0..config.np).map(|_| s.bounds.sample(rng)).collect();
        for x in xs {
            let fitness = s.evaluate(objective, &x)?;
            s.population.push(Individual { x, fitness });
        }
        if algorithm == Algorithm::Rades {
            for ind in s.population.clone() {
                s.push_archive(ind.x, ind.fitness);
            }
        }
        Ok(s)
    }

    pub fn finished(&self) -> bool {
        self.fe_count >= self.config.max_fes
    }

    pub fn best_cost(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |e| e.cost)
    }

    pub fn best_x(&self) -> &[f64] {
        &self.best_x
    }

    fn evaluate(&mut self, objective: &dyn Objective, x: &[f64]) -> Result<f64> {
        let fe = self.fe_count;
        let e = objective.evaluate(x, fe, self.evals.derive(fe).key())?;
        if !e.cost.is_finite() {
            return Err(Error::Contract(format!("objective returned non-finite cost {}", e.cost)));
        }
        self.fe_count += 1;
        let cost = e.cost;
        if cost < self.best_cost() {
            self.best_x = x.to_vec();
            self.best = Some(e);
        }
        self.trace.push((self.fe_count, self.best_cost()));
        Ok(cost)
    }

    fn push_archive(&mut self, x: Vec<f64>, fitness: f64) {
        self.archive.push(ArchiveEntry {
            x,
            fitness,
            insertion_order: self.next_order,
        });
        self.next_order += 1;
    }

    /// Freezes the donor pools for the coming generation.
    pub fn refresh_snapshot(&mut self) {
        let fit: Vec<f64> = self.population.iter().map(|p| p.fitness).collect();
        let ranked = ascending(&fit).into_iter().map(|k| self.population[k].x.clone()).collect();
        let afit: Vec<f64> = self.archive.iter().map(|a| a.fitness).collect();
        let archive_ranked = ascending(&afit).into_iter().map(|k| self.archive[k].clone()).collect();
        self.snapshot = Snapshot {
            ranked,
            archive: self.archive.clone(),
            archive_ranked,
        };
    }

    /// Mutant and crossover base for slot `i` of a RADES generation.
    pub fn mutate_rades(&mut self, i: usize, rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.config.f;
        let beta = self.config.beta;
        if self.stagnation[i] <= self.config.q {
            let pool = &self.snapshot.ranked;
            if pool.len() < 3 {
                return Err(Error::Contract("population snapshot too small".into()));
            }
            let [r1, r2] = distinct_ranks::<2>(pool.len(), beta, rng)?;
            let v = de_vector(&pool[0], &pool[r1], &pool[r2], f);
            Ok((v, self.population[i].x.clone()))
        } else {
            let snap = &self.snapshot;
            if snap.archive.is_empty() {
                return Err(Error::Contract("archive is empty".into()));
            }
            let [r1, r2] = distinct_ranks::<2>(snap.archive_ranked.len(), beta, rng)?;
            let pool = &snap.archive_ranked;
            let v = de_vector(&pool[0].x, &pool[r1].x, &pool[r2].x, f);
            let slot = i % snap.archive.len();
            let base = match self.config.archive_base {
                ArchiveBase::Slot => &snap.archive[slot].x,
                ArchiveBase::Rank => &snap.archive_ranked[slot].x,
            };
            let base = base.clone();
            self.archive_draws += 1;
            Ok((v, base))
        }
    }

    /// DE/rand/1: three distinct uniform donors, none of them slot `i`.
    pub fn mutate_derand(&self, i: usize, rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
        let np = self.population.len();
        if np < 4 {
            return Err(Error::Contract("DE/rand/1 needs at least 4 individuals".into()));
        }
        let [a, b, c] = uniform_donors(np, i, rng);
        let pop = &self.population;
        let v = de_vector(&pop[a].x, &pop[b].x, &pop[c].x, self.config.f);
        Ok((v, pop[i].x.clone()))
    }

    /// DE/rand/1 with rank-biased donors.
    pub fn mutate_rbde(&self, i: usize, rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
        let pool = &self.snapshot.ranked;
        if pool.len() < 4 {
            return Err(Error::Contract("rank-based DE needs at least 4 individuals".into()));
        }
        let [r0, r1, r2] = distinct_ranks::<3>(pool.len(), self.config.beta, rng)?;
        let v = de_vector(&pool[r0], &pool[r1], &pool[r2], self.config.f);
        Ok((v, self.population[i].x.clone()))
    }

    /// One pass over all slots, stopping early at the evaluation budget.
    pub fn step_generation(&mut self, objective: &dyn Objective, rng: &mut RngStream) -> Result<()> {
        if self.finished() {
            return Err(Error::Contract("evaluation budget already spent".into()));
        }
        self.refresh_snapshot();
        let d = self.bounds.dim();
        for i in 0..self.config.np {
            if self.finished() {
                break;
            }
            let (v, x_ref) = match self.algorithm {
                Algorithm::Rades => self.mutate_rades(i, rng)?,
                Algorithm::Derand => self.mutate_derand(i, rng)?,
                Algorithm::Rbde => self.mutate_rbde(i, rng)?,
            };
            let jrand = 1 + rng.next_below(d);
            let mask = crossover_mask(d, self.config.cr, jrand, rng)?;
            let u = make_trial(&x_ref, &v, &mask, &self.bounds)?;
            let fu = self.evaluate(objective, &u)?;
            if fu < self.population[i].fitness {
                if self.algorithm == Algorithm::Rades {
                    self.push_archive(u.clone(), fu);
                    if self.archive.len() > self.config.np {
                        let k = rng.next_below(self.archive.len());
                        self.archive.remove(k);
                    }
                }
                self.population[i] = Individual { x: u, fitness: fu };
                self.stagnation[i] = 0;
            } else {
                self.stagnation[i] += 1;
            }
        }
        self.generation += 1;
        Ok(())
    }

    pub fn into_outcome(self, instance: &str) -> RunOutcome {
        let best = self.best.expect("initial population was evaluated");
        RunOutcome {
            record: RunRecord {
                algorithm: self.algorithm,
                instance: instance.to_string(),
                seed: self.seed,
                trace: self.trace,
                best_x: self.best_x,
                best_cost: best.cost,
                feasible: best.feasible,
                error: None,
            },
            best,
        }
    }
}

/// A complete run from `seed` until `config.max_fes` evaluations.
pub fn run(algorithm: Algorithm, objective: &dyn Objective, config: &OptimizerConfig, seed: u64) -> Result<RunOutcome> {
    let mut rng = RngStream::new(seed).derive(labels::OPTIMIZER);
    let mut state = OptimizerState::init(algorithm, objective, config, seed, &mut rng)?;
    while !state.finished() {
        state.step_generation(objective, &mut rng)?;
    }
    Ok(state.into_outcome(objective.label()))
}
