//! Independent oracles and the randomized equivalence suite behind
//! `fairshare verify`.
//!
//! The oracles share no code with the fast paths: Shapley values come from
//! averaging marginals over every join order, path costs from enumerating
//! every visiting order, and the closed-form weights from tallying the
//! neighbour structure of every permutation in exact rational arithmetic.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost_model::{
    build_cost_table, build_cost_table_with, optimal_open_path_cost, Coalition,
    CoalitionCostTable, CostModel, GrandCoalition, RideInstance,
};
use crate::exact_shapley::shapley_values;
use crate::road_graph::{DistanceMatrix, Mode};
use crate::shapo::{beta_ratio, chain_neighbors, shapo_values};

/// Deviation above which a check fails.
pub const TOLERANCE: f64 = 1e-9;

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Calls `visit` with every permutation of `1..=n`, in lexicographic order.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (1..=n).collect();
    loop {
        visit(&perm);
        let Some(k) = (1..n).rev().find(|&k| perm[k - 1] < perm[k]) else {
            return;
        };
        let pivot = k - 1;
        let swap = (k..n).rev().find(|&j| perm[j] > perm[pivot]).unwrap();
        perm.swap(pivot, swap);
        perm[k..].reverse();
    }
}

/// Shapley values as the average marginal cost over all `n!` join orders.
pub fn permutation_shapley(table: &CoalitionCostTable) -> Vec<f64> {
    let n = table.n;
    let mut sums = vec![0.0; n];
    let mut count = 0u64;
    for_each_permutation(n, |perm| {
        let mut s = Coalition::empty();
        for &i in perm {
            let next = s.with(i);
            sums[i - 1] += table.cost(next) - table.cost(s);
            s = next;
        }
        count += 1;
    });
    sums.into_iter().map(|x| x / count as f64).collect()
}

/// Cheapest visiting order of every coalition by exhaustive search, summing
/// each path from the depot outwards: `((d(0,a) + d(a,b)) + ...) + dummy leg`.
pub fn brute_force_prefix_costs(m: &DistanceMatrix) -> Vec<f64> {
    fn extend(m: &DistanceMatrix, mask: usize, at: usize, sum: f64, best: &mut [f64]) {
        let with_dummy = sum + m.get(at, m.dummy());
        if with_dummy < best[mask] {
            best[mask] = with_dummy;
        }
        for next in 1..=m.n() {
            if mask & (1 << (next - 1)) == 0 {
                extend(m, mask | 1 << (next - 1), next, sum + m.get(at, next), best);
            }
        }
    }
    let mut best = vec![f64::INFINITY; 1 << m.n()];
    best[0] = 0.0;
    for first in 1..=m.n() {
        extend(m, 1 << (first - 1), first, m.get(0, first), &mut best);
    }
    best
}

/// As [`brute_force_prefix_costs`], but summing each path from its far end:
/// `d(0,a) + (d(a,b) + (... + dummy leg))`.
pub fn brute_force_suffix_costs(m: &DistanceMatrix) -> Vec<f64> {
    fn prepend(m: &DistanceMatrix, mask: usize, head: usize, sum: f64, best: &mut [f64]) {
        let total = m.get(0, head) + sum;
        if total < best[mask] {
            best[mask] = total;
        }
        for prev in 1..=m.n() {
            if mask & (1 << (prev - 1)) == 0 {
                prepend(m, mask | 1 << (prev - 1), prev, m.get(prev, head) + sum, best);
            }
        }
    }
    let mut best = vec![f64::INFINITY; 1 << m.n()];
    best[0] = 0.0;
    for last in 1..=m.n() {
        prepend(m, 1 << (last - 1), last, m.get(last, m.dummy()), &mut best);
    }
    best
}

/// Weight of `d(p, q)` in each passenger's Shapley value for the chain game,
/// tallied over all `n!` join orders. Keys are `(i, p, q)` with `p < q`;
/// `q = n + 1` is the dummy destination.
pub fn counted_betas(n: usize) -> BTreeMap<(usize, usize, usize), Ratio<i64>> {
    let mut tally: BTreeMap<(usize, usize, usize), i64> = BTreeMap::new();
    let mut count = 0i64;
    for_each_permutation(n, |perm| {
        for &i in perm {
            let (l, r) = chain_neighbors(i, perm);
            *tally.entry((i, l, i)).or_default() += 1;
            *tally.entry((i, i, r)).or_default() += 1;
            *tally.entry((i, l, r)).or_default() -= 1;
        }
        count += 1;
    });
    tally
        .into_iter()
        .map(|(key, c)| (key, Ratio::new(c, count)))
        .collect()
}

/// Random instance families for the equivalence checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// Distances between uniform points in a 10 km square.
    Euclidean,
    /// Independent uniform symmetric entries; no triangle inequality.
    NonMetric,
}

/// The random matrix checked for `(seed, n, kind)`; failures quote these so
/// the case can be rebuilt.
pub fn random_matrix(seed: u64, n: usize, kind: MatrixKind, mode: Mode) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * n as u64 + (kind == MatrixKind::NonMetric) as u64);
    let size = n + 1;
    let rows: Vec<Vec<f64>> = match kind {
        MatrixKind::Euclidean => {
            let pts: Vec<(f64, f64)> = (0..size)
                .map(|_| (rng.random_range(0.0..10_000.0), rng.random_range(0.0..10_000.0)))
                .collect();
            pts.iter()
                .map(|a| pts.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect())
                .collect()
        }
        MatrixKind::NonMetric => {
            let mut rows = vec![vec![0.0; size]; size];
            for a in 0..size {
                for b in a + 1..size {
                    let d = rng.random_range(0.0..10_000.0);
                    rows[a][b] = d;
                    rows[b][a] = d;
                }
            }
            rows
        }
    };
    DistanceMatrix::from_rows(&rows, mode, false).expect("generated rows are a valid matrix")
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyConfig {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_max: 8,
            trials: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub seed: u64,
    pub n: usize,
    /// Passenger (or coalition mask, for path checks) that deviated.
    pub i: usize,
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckSummary>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }
}

struct Check<'a> {
    summary: CheckSummary,
    failures: &'a mut Vec<Failure>,
}

impl<'a> Check<'a> {
    fn new(name: &'static str, failures: &'a mut Vec<Failure>) -> Self {
        Check {
            summary: CheckSummary {
                name,
                cases: 0,
                max_deviation: 0.0,
            },
            failures,
        }
    }

    fn compare(&mut self, seed: u64, n: usize, i: usize, deviation: f64) {
        self.summary.max_deviation = self.summary.max_deviation.max(deviation);
        if deviation > TOLERANCE || deviation.is_nan() {
            self.failures.push(Failure {
                check: self.summary.name,
                seed,
                n,
                i,
                deviation,
            });
        }
    }

    fn values(&mut self, seed: u64, n: usize, got: &[f64], want: &[f64]) {
        self.summary.cases += 1;
        for (k, (a, b)) in got.iter().zip(want).enumerate() {
            self.compare(seed, n, k + 1, relative_error(*a, *b));
        }
    }

    /// Bitwise equality; any difference counts as infinite deviation.
    fn identical(&mut self, seed: u64, n: usize, got: &[f64], want: &[f64]) {
        self.summary.cases += 1;
        for (mask, (a, b)) in got.iter().zip(want).enumerate() {
            if a != b {
                self.compare(seed, n, mask, f64::INFINITY);
            }
        }
    }
}

const KINDS: [MatrixKind; 2] = [MatrixKind::Euclidean, MatrixKind::NonMetric];

/// Runs every equivalence suite for `n = 1..=n_max` with `trials` random
/// matrices per family and size.
pub fn run_verification(cfg: &VerifyConfig) -> VerifyReport {
    let mut report = VerifyReport::default();
    if cfg.trials == 0 {
        report
            .warnings
            .push("trials = 0: the randomized checks ran no cases and pass vacuously".into());
    }
    let n_max = cfg.n_max.min(crate::cost_model::TSP_CAP);
    if n_max < cfg.n_max {
        report
            .warnings
            .push(format!("n-max {} lowered to the cap {n_max}", cfg.n_max));
    }
    let seeds = |trial: usize| cfg.seed.wrapping_add(trial as u64);

    for (name, mode) in [
        ("shapo vs exact (last-mile)", Mode::LastMile),
        ("shapo vs exact (routing game)", Mode::RoutingGame),
    ] {
        let mut check = Check::new(name, &mut report.failures);
        for n in 1..=n_max {
            for trial in 0..cfg.trials {
                for kind in KINDS {
                    let seed = seeds(trial);
                    let inst = RideInstance::new(random_matrix(seed, n, kind, mode));
                    let table = build_cost_table(&inst, CostModel::new(true, mode))
                        .expect("n is within the cap");
                    let exact = shapley_values(&table).expect("n is within the cap");
                    check.values(seed, n, &shapo_values(&inst.matrix), &exact);
                }
            }
        }
        report.checks.push(check.summary);
    }

    let mut check = Check::new("subset formula vs permutation average", &mut report.failures);
    for n in 1..=n_max.min(9) {
        for trial in 0..cfg.trials {
            for kind in KINDS {
                let seed = seeds(trial);
                let m = random_matrix(seed, n, kind, Mode::LastMile);
                let inst = RideInstance::new(m);
                for prioritized in [true, false] {
                    let table = build_cost_table(&inst, CostModel::new(prioritized, Mode::LastMile))
                        .expect("n is within the cap");
                    let exact = shapley_values(&table).expect("n is within the cap");
                    check.values(seed, n, &exact, &permutation_shapley(&table));
                }
            }
        }
    }
    report.checks.push(check.summary);

    let mut check = Check::new("held-karp vs enumeration", &mut report.failures);
    for n in 1..=n_max.min(9) {
        for trial in 0..cfg.trials {
            for kind in KINDS {
                for mode in [Mode::LastMile, Mode::RoutingGame] {
                    let seed = seeds(trial);
                    let inst = RideInstance::new(random_matrix(seed, n, kind, mode));
                    let table = build_cost_table_with(
                        &inst,
                        CostModel::new(false, mode),
                        GrandCoalition::Optimal,
                    )
                    .expect("n is within the cap");
                    check.identical(seed, n, &table.costs, &brute_force_prefix_costs(&inst.matrix));
                    let single: Vec<f64> = (0..1usize << n)
                        .map(|mask| {
                            optimal_open_path_cost(&inst, Coalition::from_bits(mask as u32))
                                .expect("n is within the cap")
                        })
                        .collect();
                    check.identical(seed, n, &single, &brute_force_suffix_costs(&inst.matrix));
                }
            }
        }
    }
    report.checks.push(check.summary);

    let mut check = Check::new("closed-form weights vs counting", &mut report.failures);
    for n in 2..=n_max.min(9) {
        let counted = counted_betas(n);
        check.summary.cases += 1;
        for i in 1..=n {
            for p in 0..=i {
                for q in i..=n + 1 {
                    if p == q {
                        continue;
                    }
                    let want = counted.get(&(i, p, q)).copied().unwrap_or_default();
                    let got = beta_ratio(i, p, q, n, Mode::RoutingGame).expect("indices are valid");
                    let last_mile = (q <= n)
                        .then(|| beta_ratio(i, p, q, n, Mode::LastMile).expect("indices are valid"));
                    if got != want || last_mile.is_some_and(|b| b != want) {
                        check.compare(0, n, i, f64::INFINITY);
                    }
                }
            }
        }
    }
    report.checks.push(check.summary);

    let mut check = Check::new("shapo vs airport rule on a line", &mut report.failures);
    for n in 1..=n_max {
        for trial in 0..cfg.trials {
            let seed = seeds(trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let (m, want) = airport_instance(&mut rng, n);
            check.values(seed, n, &shapo_values(&m), &want);
        }
    }
    report.checks.push(check.summary);

    report
}

/// Collinear stops at increasing distance from the depot, with the airport
/// rule's payments: each segment is split equally among everyone beyond it.
pub fn airport_instance(rng: &mut impl Rng, n: usize) -> (DistanceMatrix, Vec<f64>) {
    let mut xs: Vec<f64> = vec![0.0];
    for _ in 0..n {
        let last = *xs.last().unwrap();
        xs.push(last + rng.random_range(1.0..2_000.0));
    }
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|a| xs.iter().map(|b| (a - b).abs()).collect())
        .collect();
    let m = DistanceMatrix::from_rows(&rows, Mode::LastMile, false).unwrap();
    let mut share = 0.0;
    let want = (1..=n)
        .map(|k| {
            share += (xs[k] - xs[k - 1]) / (n - k + 1) as f64;
            share
        })
        .collect();
    (m, want)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete_and_ordered() {
        let mut seen = Vec::new();
        for_each_permutation(3, |p| seen.push(p.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![1, 2, 3]);
        assert_eq!(seen[5], vec![3, 2, 1]);
        let mut one = 0;
        for_each_permutation(1, |_| one += 1);
        assert_eq!(one, 1);
    }

    #[test]
    fn counted_weights_for_two_passengers() {
        let b = counted_betas(2);
        assert_eq!(b[&(1, 0, 1)], Ratio::new(1, 1));
        assert_eq!(b[&(1, 0, 2)], Ratio::new(-1, 2));
        assert_eq!(b[&(1, 1, 2)], Ratio::new(1, 2));
    }

    #[test]
    fn small_run_passes() {
        let report = run_verification(&VerifyConfig {
            n_max: 5,
            trials: 5,
            seed: 3,
        });
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.max_deviation() < TOLERANCE);
        assert!(report.warnings.is_empty());
        assert!(report.checks.iter().all(|c| c.cases > 0));
    }

    #[test]
    fn zero_trials_is_vacuous() {
        let report = run_verification(&VerifyConfig {
            n_max: 3,
            trials: 0,
            seed: 0,
        });
        assert!(report.passed());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn a_wrong_value_is_reported() {
        let mut failures = Vec::new();
        let mut check = Check::new("t", &mut failures);
        check.values(9, 2, &[1.0, 2.0], &[1.0, 2.5]);
        assert_eq!(failures.len(), 1);
        assert_eq!((failures[0].seed, failures[0].n, failures[0].i), (9, 2, 2));
    }
}
