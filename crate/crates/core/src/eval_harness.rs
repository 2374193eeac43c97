//! Seeded benchmark: sample rides on a road network, compute the exact
//! Shapley value, and score every rule against it.
//!
//! Each `(n, iteration)` pair draws from its own ChaCha8 stream of the master
//! seed, so a report row does not depend on which other sizes were run.
//! Every metric is computed per iteration and then averaged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate, Allocation, AllocationFlag, Rule};
use crate::cost_model::{build_cost_table, optimal_order, CostModel, RideInstance, TSP_CAP};
use crate::error::{Error, Result};
use crate::exact_shapley::shapley_exact;
use crate::generate::{generate, Family};
use crate::road_graph::{
    build_distance_matrix, crop_to_nearest, load_graph_file, shortest_distances, Mode, RoadGraph,
    VertexId,
};

/// The five error measures of one estimate against the truth. `percent` is a
/// fraction (0.05 means 5%).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub percent: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub max_error: f64,
    /// Passengers left out of `percent` because their true share is zero.
    pub percent_skipped: usize,
}

/// Scores `estimate` against `truth`. A passenger whose true payment is
/// (numerically) zero is skipped in `percent`; if every passenger is skipped
/// `percent` is NaN.
pub fn metrics(estimate: &Allocation, truth: &Allocation) -> Result<MetricRecord> {
    if estimate.n != truth.n || estimate.payments.len() != truth.payments.len() {
        return Err(Error::validation(format!(
            "cannot compare allocations over {} and {} passengers",
            estimate.n, truth.n
        )));
    }
    let n = truth.payments.len() as f64;
    let scale = truth.payments.iter().map(|p| p.abs()).fold(0.0, f64::max);
    let mut rec = MetricRecord::default();
    let mut percent_sum = 0.0;
    for (x, phi) in estimate.payments.iter().zip(&truth.payments) {
        let err = (x - phi).abs();
        rec.mae += err;
        rec.mse += err * err;
        rec.max_error = rec.max_error.max(err);
        if phi.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            rec.percent_skipped += 1;
        } else {
            percent_sum += err / phi.abs();
        }
    }
    rec.mae /= n;
    rec.mse /= n;
    rec.rmse = rec.mse.sqrt();
    let counted = truth.payments.len() - rec.percent_skipped;
    rec.percent = if counted == 0 {
        f64::NAN
    } else {
        percent_sum / counted as f64
    };
    Ok(rec)
}

/// Draws rides from a fixed graph and depot.
pub struct InstanceSampler<'g> {
    graph: &'g RoadGraph,
    depot: VertexId,
    candidates: Vec<VertexId>,
    pub mode: Mode,
    pub price_per_km: f64,
}

impl<'g> InstanceSampler<'g> {
    /// Candidates are the vertices reachable from `depot`, in id order.
    pub fn new(graph: &'g RoadGraph, depot: VertexId, exclude_depot: bool) -> Result<Self> {
        let candidates = shortest_distances(graph, depot)?
            .into_keys()
            .filter(|&v| !(exclude_depot && v == depot))
            .collect();
        Ok(InstanceSampler {
            graph,
            depot,
            candidates,
            mode: Mode::LastMile,
            price_per_km: 1.0,
        })
    }

    /// `n` destinations drawn uniformly with replacement, numbered along an
    /// optimal visiting order (lexicographically smallest among ties).
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<SampledRide> {
        if n == 0 {
            return Err(Error::validation("a ride needs at least one passenger"));
        }
        if self.candidates.len() < n {
            return Err(Error::validation(format!(
                "only {} vertices reachable from depot {}, need {n}",
                self.candidates.len(),
                self.depot
            )));
        }
        let drawn: Vec<VertexId> = (0..n)
            .map(|_| self.candidates[rng.random_range(0..self.candidates.len())])
            .collect();
        let matrix = build_distance_matrix(self.graph, self.depot, &drawn, self.mode)?;
        let unordered = RideInstance::new(matrix.clone());
        let (_, order) = optimal_order(&unordered, unordered.grand_coalition())?;
        let instance =
            RideInstance::new(matrix.reordered(&order)?).with_price_per_km(self.price_per_km)?;
        let destinations = order.iter().map(|&k| drawn[k - 1]).collect();
        Ok(SampledRide {
            instance,
            destinations,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SampledRide {
    pub instance: RideInstance,
    /// Vertex of passenger `k + 1`, in drop-off order.
    pub destinations: Vec<VertexId>,
}

/// One ride with `n` passengers on `g` (last-mile, $1/km), sampling over
/// every vertex reachable from `depot`.
pub fn sample_instance(
    g: &RoadGraph,
    depot: VertexId,
    n: usize,
    rng: &mut impl Rng,
) -> Result<SampledRide> {
    InstanceSampler::new(g, depot, false)?.sample(n, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    /// Edge-list CSV.
    File(PathBuf),
    Synthetic { family: Family, size: usize, seed: u64 },
}

impl Default for GraphSource {
    /// 200 points in a 10 km square; the CLI ships this graph as `toy.csv`.
    fn default() -> Self {
        GraphSource::Synthetic {
            family: Family::Euclidean,
            size: 200,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub passenger_counts: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub graph: GraphSource,
    pub depot: VertexId,
    /// Keep only this many vertices nearest the depot before sampling.
    pub crop_to: Option<usize>,
    pub price_per_km: f64,
    /// Game whose exact Shapley value is the ground truth.
    pub cost_model: CostModel,
    pub rules: Vec<Rule>,
    pub exclude_depot: bool,
    /// Record wall-clock times. Turn off for byte-identical reports.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            passenger_counts: (3..=9).collect(),
            iterations: 100,
            seed: 0,
            graph: GraphSource::default(),
            depot: 0,
            crop_to: None,
            price_per_km: 1.0,
            cost_model: CostModel::NonPrioritized,
            rules: vec![Rule::Exact, Rule::Shapo, Rule::Depot, Rule::Shortcut, Rule::Reroute],
            exclude_depot: false,
            timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be at least 1"));
        }
        if self.passenger_counts.is_empty() {
            return Err(Error::validation("passenger_counts is empty"));
        }
        if self.rules.is_empty() {
            return Err(Error::validation("rules is empty"));
        }
        if let Some(&n) = self.passenger_counts.iter().find(|&&n| n == 0) {
            return Err(Error::validation(format!("passenger count {n} is not positive")));
        }
        if let Some(&n) = self.passenger_counts.iter().find(|&&n| n > TSP_CAP) {
            return Err(Error::Capacity {
                what: "benchmark passenger count",
                size: n,
                cap: TSP_CAP,
            });
        }
        if !(self.price_per_km.is_finite() && self.price_per_km > 0.0) {
            return Err(Error::validation("price_per_km must be positive"));
        }
        Ok(())
    }

    /// Loads (or generates) the graph, resolving a relative file against `base`,
    /// and applies `crop_to`.
    pub fn load_graph(&self, base: &Path) -> Result<RoadGraph> {
        let g = match &self.graph {
            GraphSource::File(path) => load_graph_file(base.join(path))?,
            GraphSource::Synthetic { family, size, seed } => generate(*family, *size, *seed)?,
        };
        match self.crop_to {
            Some(k) => crop_to_nearest(&g, self.depot, k),
            None => Ok(g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rule: Rule,
    pub n: usize,
    pub percent: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub max_error: f64,
    /// `None` when timing is off.
    pub mean_seconds: Option<f64>,
    pub percent_skipped: usize,
    /// Iterations where the rule fell back to an equal split.
    pub fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, rule: Rule, n: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.rule == rule && r.n == n)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rule", "n", "percent", "mae", "mse", "rmse", "max_error", "mean_seconds"])?;
        for r in &self.rows {
            // Debug formatting round-trips exactly and switches to exponents
            // for tiny values.
            w.write_record([
                r.rule.to_string(),
                r.n.to_string(),
                format!("{:?}", r.percent),
                format!("{:?}", r.mae),
                format!("{:?}", r.mse),
                format!("{:?}", r.rmse),
                format!("{:?}", r.max_error),
                r.mean_seconds.map(|s| format!("{s:?}")).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::from(csv::Error::from(e.into_error())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Stream of the master seed used for iteration `iteration` at size `n`.
pub fn iteration_rng(seed: u64, n: usize, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | iteration as u64);
    rng
}

/// Runs `cfg`, resolving a relative graph file against the working directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let g = cfg.load_graph(Path::new("."))?;
    run_experiment_on(cfg, &g)
}

/// Runs `cfg` on an already loaded graph (`cfg.graph` and `cfg.crop_to` are
/// ignored).
pub fn run_experiment_on(cfg: &ExperimentConfig, graph: &RoadGraph) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut sampler = InstanceSampler::new(graph, cfg.depot, cfg.exclude_depot)?;
    sampler.mode = cfg.cost_model.mode();
    sampler.price_per_km = cfg.price_per_km;

    let mut rows = Vec::new();
    for &n in &cfg.passenger_counts {
        let mut acc: BTreeMap<Rule, Accumulator> = BTreeMap::new();
        for iteration in 0..cfg.iterations {
            let context = |source: Error| Error::Experiment {
                n,
                iteration,
                seed: cfg.seed,
                source: Box::new(source),
            };
            let mut rng = iteration_rng(cfg.seed, n, iteration);
            let ride = sampler.sample(n, &mut rng).map_err(context)?;
            let inst = &ride.instance;

            let (truth, truth_seconds) = timed(cfg.timing, || {
                build_cost_table(inst, cfg.cost_model).and_then(|table| shapley_exact(&table))
            })
            .map_err(context)?;

            for &rule in &cfg.rules {
                let (estimate, seconds) = if rule == Rule::Exact {
                    (truth.clone(), truth_seconds)
                } else {
                    timed(cfg.timing, || allocate(inst, rule, cfg.cost_model)).map_err(context)?
                };
                let m = metrics(&estimate, &truth).map_err(context)?;
                acc.entry(rule)
                    .or_default()
                    .add(&m, seconds, estimate.has_flag(AllocationFlag::EqualSplitFallback));
            }
        }
        for &rule in &cfg.rules {
            if let Some(a) = acc.get(&rule) {
                rows.push(a.row(rule, n, cfg.timing));
            }
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
    })
}

/// Shortest batch worth timing; one clock read costs ~0.1 us, which is the
/// same order as the fastest rules.
const MIN_BATCH_SECONDS: f64 = 50e-6;
/// Batches timed per call site; the fastest one is kept.
const BATCHES: usize = 3;

/// Runs `f` and reports seconds per call. Fast calls are repeated in doubling
/// batches until a batch lasts [`MIN_BATCH_SECONDS`], so clock overhead is
/// amortized; the best of [`BATCHES`] such batches filters out scheduler
/// noise. Every rule is timed the same way.
fn timed<T>(timing: bool, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    if !timing {
        return Ok((f()?, 0.0));
    }
    let mut batch = |reps: u32| -> Result<f64> {
        let start = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(f()?);
        }
        Ok(start.elapsed().as_secs_f64())
    };
    let mut reps = 1u32;
    let mut elapsed = batch(reps)?;
    while elapsed < MIN_BATCH_SECONDS && reps < 1 << 20 {
        reps *= 2;
        elapsed = batch(reps)?;
    }
    let mut best = elapsed;
    for _ in 1..BATCHES {
        best = best.min(batch(reps)?);
    }
    Ok((f()?, best / reps as f64))
}

#[derive(Default)]
struct Accumulator {
    iterations: usize,
    percent_iterations: usize,
    sum: MetricRecord,
    seconds: f64,
    fallbacks: usize,
}

impl Accumulator {
    fn add(&mut self, m: &MetricRecord, seconds: f64, fallback: bool) {
        self.iterations += 1;
        if !m.percent.is_nan() {
            self.percent_iterations += 1;
            self.sum.percent += m.percent;
        }
        self.sum.mae += m.mae;
        self.sum.mse += m.mse;
        self.sum.rmse += m.rmse;
        self.sum.max_error += m.max_error;
        self.sum.percent_skipped += m.percent_skipped;
        self.seconds += seconds;
        self.fallbacks += fallback as usize;
    }

    fn row(&self, rule: Rule, n: usize, timing: bool) -> ReportRow {
        let k = self.iterations as f64;
        ReportRow {
            rule,
            n,
            percent: if self.percent_iterations == 0 {
                f64::NAN
            } else {
                self.sum.percent / self.percent_iterations as f64
            },
            mae: self.sum.mae / k,
            mse: self.sum.mse / k,
            rmse: self.sum.rmse / k,
            max_error: self.sum.max_error / k,
            mean_seconds: timing.then(|| self.seconds / k),
            percent_skipped: self.sum.percent_skipped,
            fallbacks: self.fallbacks,
        }
    }
}
