//! Benchmark protocol and its statistics.
//!
//! Every (instance, run) pair gets one seed shared by all algorithms, so the
//! algorithms start from the same initial population. Cells run on a rayon
//! pool; a panicking run becomes a failed record and the rest continue.

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::objective::ScenarioObjective;
use crate::optimizer::{run, Algorithm, OptimizerConfig, RunRecord};
use crate::planner::PlannerConfig;
use crate::rng::RngStream;
use crate::scenario::Scenario;

/// Exact rank-sum distribution is used up to this many observations in total.
pub const EXACT_LIMIT: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_RUNS: usize = 20;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub optimizer: OptimizerConfig,
    pub planner: PlannerConfig,
    pub runs: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses every processor.
    pub jobs: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            optimizer: OptimizerConfig::default(),
            planner: PlannerConfig::default(),
            runs: DEFAULT_RUNS,
            master_seed: 0,
            jobs: None,
        }
    }
}

/// A scenario plus the index its run seeds are derived from.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub index: u64,
    pub scenario: Scenario,
}

pub fn run_seed(master_seed: u64, instance: u64, run: u64) -> u64 {
    RngStream::new(master_seed).derive(instance).derive(run).key()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    pub records: Vec<RunRecord>,
}

impl ResultSet {
    /// One JSON document per line, in record order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<ResultSet> {
        let mut records = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: RunRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: k + 1,
                column: e.column(),
                message: e.to_string(),
            })?;
            if !r.best_cost.is_finite() || r.best_x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: k + 1,
                    column: 0,
                    message: "non-finite value in record".into(),
                });
            }
            records.push(r);
        }
        Ok(ResultSet { records })
    }

    /// Instance names in order of first appearance.
    pub fn instances(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.instance) {
                out.push(r.instance.clone());
            }
        }
        out
    }

    /// Algorithms in order of first appearance.
    pub fn algorithms(&self) -> Vec<Algorithm> {
        let mut out = Vec::new();
        for r in &self.records {
            if !out.contains(&r.algorithm) {
                out.push(r.algorithm);
            }
        }
        out
    }

    pub fn cell(&self, instance: &str, algorithm: Algorithm) -> impl Iterator<Item = &RunRecord> {
        let instance = instance.to_string();
        self.records
            .iter()
            .filter(move |r| r.instance == instance && r.algorithm == algorithm)
    }

    /// Final costs of the successful runs in a cell.
    pub fn final_costs(&self, instance: &str, algorithm: Algorithm) -> Vec<f64> {
        self.cell(instance, algorithm)
            .filter(|r| r.is_ok())
            .map(|r| r.best_cost)
            .collect()
    }

    /// Cells that have fewer than two successful runs or any failed run.
    pub fn incomplete_cells(&self) -> Vec<(String, Algorithm)> {
        let mut out = Vec::new();
        for inst in self.instances() {
            for alg in self.algorithms() {
                let all = self.cell(&inst, alg).count();
                let ok = self.cell(&inst, alg).filter(|r| r.is_ok()).count();
                if ok < 2 || ok < all {
                    out.push((inst.clone(), alg));
                }
            }
        }
        out
    }
}

/// Runs every (instance, algorithm, run) cell. `progress` is called once per
/// finished run, from worker threads, in completion order.
pub fn run_benchmark(
    instances: &[BenchInstance],
    algorithms: &[Algorithm],
    config: &BenchConfig,
    progress: &(dyn Fn(&RunRecord) + Sync),
) -> Result<ResultSet> {
    use rayon::prelude::*;

    if config.runs < 2 {
        return Err(Error::Precondition("a benchmark needs at least 2 runs per cell".into()));
    }
    if instances.is_empty() || algorithms.is_empty() {
        return Err(Error::Precondition("nothing to benchmark".into()));
    }
    for &alg in algorithms {
        config.optimizer.validate(alg)?;
    }
    let objectives: Vec<ScenarioObjective> = instances
        .iter()
        .map(|i| ScenarioObjective::new(i.scenario.clone(), config.planner))
        .collect();
    let mut jobs = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for &alg in algorithms {
            for r in 0..config.runs {
                jobs.push((k, alg, run_seed(config.master_seed, inst.index, r as u64)));
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|&(k, alg, seed)| {
                let obj = &objectives[k];
                let name = &obj.scenario.name;
                let rec = match catch_unwind(AssertUnwindSafe(|| run(alg, obj, &config.optimizer, seed))) {
                    Ok(Ok(out)) => out.record,
                    Ok(Err(e)) => RunRecord::failed(alg, name, seed, e.to_string()),
                    Err(p) => {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "run panicked".into());
                        RunRecord::failed(alg, name, seed, format!("panic: {msg}"))
                    }
                };
                progress(&rec);
                rec
            })
            .collect::<Vec<_>>()
    };
    let records = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(ResultSet { records })
}

/// Mann-Whitney statistic of `a`: pairs (x in a, y in b) with x > y, ties
/// counting one half.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Precondition("rank-sum test needs two samples of at least 2".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Precondition("rank-sum test on NaN".into()));
    }
    Ok(())
}

fn has_ties(a: &[f64], b: &[f64]) -> bool {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.windows(2).any(|w| w[0] == w[1])
}

/// Counts of each U value for sample sizes `n` and `m` under the null.
fn exact_counts(n: usize, m: usize) -> Vec<f64> {
    // f(n, m, u) = f(n - 1, m, u - m) + f(n, m - 1, u)
    let max = n * m;
    let mut f = vec![vec![vec![0.0f64; max + 1]; m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 || j == 0 {
                f[i][j][0] = 1.0;
                continue;
            }
            for u in 0..=i * j {
                let mut c = f[i][j - 1][u];
                if u >= j {
                    c += f[i - 1][j][u - j];
                }
                f[i][j][u] = c;
            }
        }
    }
    std::mem::take(&mut f[n][m])
}

/// Two-sided p-value from the exact null distribution; requires no ties.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    if has_ties(a, b) {
        return Err(Error::Precondition("exact rank-sum test needs tie-free samples".into()));
    }
    let counts = exact_counts(a.len(), b.len());
    let total: f64 = counts.iter().sum();
    let u = mann_whitney_u(a, b) as usize;
    let low: f64 = counts[..=u].iter().sum::<f64>() / total;
    let high: f64 = counts[u..].iter().sum::<f64>() / total;
    Ok((2.0 * low.min(high)).min(1.0))
}

/// Two-sided p-value from the normal approximation with tie and continuity
/// corrections.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let total = n + m;
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut k = 0;
    while k < all.len() {
        let mut j = k;
        while j + 1 < all.len() && all[j + 1] == all[k] {
            j += 1;
        }
        let t = (j - k + 1) as f64;
        tie_sum += t * t * t - t;
        k = j + 1;
    }
    let var = n * m / 12.0 * ((total + 1.0) - tie_sum / (total * (total - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let u = mann_whitney_u(a, b);
    let z = ((u - n * m / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Two-sided rank-sum p-value: exact for small tie-free samples, normal
/// approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    if a.iter().chain(b).all(|&v| v == a[0]) {
        return Ok(1.0);
    }
    if a.len() + b.len() <= EXACT_LIMIT && !has_ties(a, b) {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Better,
    Similar,
    Worse,
}

impl Comparison {
    pub fn symbol(self) -> char {
        match self {
            Comparison::Better => '+',
            Comparison::Similar => '=',
            Comparison::Worse => '-',
        }
    }

    pub fn flip(self) -> Comparison {
        match self {
            Comparison::Better => Comparison::Worse,
            Comparison::Similar => Comparison::Similar,
            Comparison::Worse => Comparison::Better,
        }
    }
}

/// Compares two cost samples; lower costs are better.
pub fn compare(a: &[f64], b: &[f64], alpha: f64) -> Result<Comparison> {
    let p = wilcoxon_rank_sum(a, b)?;
    let (ma, mb) = (median(a), median(b));
    Ok(if p < alpha && ma < mb {
        Comparison::Better
    } else if p < alpha && ma > mb {
        Comparison::Worse
    } else {
        Comparison::Similar
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    pub instance: String,
    pub algorithms: Vec<Algorithm>,
    pub alpha: f64,
    /// `entries[a][b]` is how row algorithm `a` fares against column `b`.
    pub entries: Vec<Vec<Comparison>>,
}

impl ComparisonMatrix {
    pub fn get(&self, a: Algorithm, b: Algorithm) -> Option<Comparison> {
        let i = self.algorithms.iter().position(|&x| x == a)?;
        let j = self.algorithms.iter().position(|&x| x == b)?;
        Some(self.entries[i][j])
    }

    /// Rows by algorithm, one column per opponent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm");
        for a in &self.algorithms {
            out.push(',');
            out.push_str(a.name());
        }
        out.push('\n');
        for (a, row) in self.algorithms.iter().zip(&self.entries) {
            out.push_str(a.name());
            for c in row {
                out.push(',');
                out.push(c.symbol());
            }
            out.push('\n');
        }
        out
    }
}

pub fn pairwise_matrix(rs: &ResultSet, instance: &str, alpha: f64) -> Result<ComparisonMatrix> {
    let algorithms = rs.algorithms();
    let mut samples = Vec::new();
    for &alg in &algorithms {
        let total = rs.cell(instance, alg).count();
        let costs = rs.final_costs(instance, alg);
        if costs.len() < 2 || costs.len() < total {
            return Err(Error::Contract(format!("cell ({instance}, {alg}) is missing or incomplete")));
        }
        samples.push(costs);
    }
    let k = algorithms.len();
    let mut entries = vec![vec![Comparison::Similar; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let c = compare(&samples[i], &samples[j], alpha)?;
            entries[i][j] = c;
            entries[j][i] = c.flip();
        }
    }
    Ok(ComparisonMatrix {
        instance: instance.to_string(),
        algorithms,
        alpha,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub algorithm: Algorithm,
    pub better: usize,
    pub similar: usize,
    pub worse: usize,
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: +{} ={} -{}", self.algorithm, self.better, self.similar, self.worse)
    }
}

/// Totals over all (instance, opponent) pairs, most wins first.
pub fn summarize_counts(matrices: &[ComparisonMatrix]) -> Vec<Counts> {
    let mut map: BTreeMap<Algorithm, Counts> = BTreeMap::new();
    let mut order = Vec::new();
    for m in matrices {
        for (i, &a) in m.algorithms.iter().enumerate() {
            let c = map.entry(a).or_insert_with(|| {
                order.push(a);
                Counts {
                    algorithm: a,
                    better: 0,
                    similar: 0,
                    worse: 0,
                }
            });
            for (j, e) in m.entries[i].iter().enumerate() {
                if i == j {
                    continue;
                }
                match e {
                    Comparison::Better => c.better += 1,
                    Comparison::Similar => c.similar += 1,
                    Comparison::Worse => c.worse += 1,
                }
            }
        }
    }
    let mut out: Vec<Counts> = order.into_iter().map(|a| map[&a]).collect();
    out.sort_by(|x, y| y.better.cmp(&x.better).then(x.worse.cmp(&y.worse)));
    out
}

pub fn counts_csv(counts: &[Counts]) -> String {
    let mut out = String::from("algorithm,better,similar,worse\n");
    for c in counts {
        out.push_str(&format!("{},{},{},{}\n", c.algorithm, c.better, c.similar, c.worse));
    }
    out
}

/// Mean best-so-far cost per evaluation and algorithm over the successful
/// runs, as `fe,algorithm,mean_best` rows.
pub fn convergence_csv(rs: &ResultSet) -> String {
    let mut out = String::from("fe,algorithm,mean_best\n");
    for alg in rs.algorithms() {
        let runs: Vec<&RunRecord> = rs.records.iter().filter(|r| r.algorithm == alg && r.is_ok()).collect();
        let len = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
        for k in 0..len {
            let fe = runs[0].trace[k].0;
            let mean = runs.iter().map(|r| r.trace[k].1).sum::<f64>() / runs.len() as f64;
            out.push_str(&format!("{fe},{alg},{mean}\n"));
        }
    }
    out
}
