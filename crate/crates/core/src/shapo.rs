//! Closed-form Shapley value for a fixed drop-off order.
//!
//! When every coalition is driven in the given order, passenger `i`'s marginal
//! cost in a join order depends only on its chain neighbours among the
//! passengers already present: the nearest earlier-dropped one `l` (or the
//! depot) and the nearest later-dropped one `r` (or the dummy destination).
//! It adds `d(l, i) + d(i, r) - d(l, r)`. Counting, for each pair `(p, q)`,
//! the fraction of join orders in which `p` and `q` are those neighbours gives
//! a rational weight `beta(i, p, q)`, and
//!
//! ```text
//! phi(i) = sum_{p <= i <= q, p != q} beta(i, p, q) * d(p, q)
//! ```
//!
//! which [`shapo_values`] evaluates for all passengers in `O(n^2)` total.
//! In routing-game mode the dummy destination
//! is the depot, so pairs with `q = n + 1` carry the return leg.
//!
//! The same allocation, applied to a ride whose coalitions are *not* bound to
//! the order, is the SHAPO proxy for the non-prioritized game.

use num_rational::Ratio;

use crate::allocation::{Allocation, Rule};
use crate::cost_model::{CostModel, RideInstance};
use crate::error::{Error, Result};
use crate::road_graph::{DistanceMatrix, Mode};

/// Weight of `d(p, q)` in passenger `i`'s payment, as `f64`.
pub fn beta(i: usize, p: usize, q: usize, n: usize, mode: Mode) -> Result<f64> {
    check_indices(i, p, q, n, mode)?;
    let (num, den) = beta_parts(i, p, q, n);
    Ok(num as f64 / den as f64)
}

/// Weight of `d(p, q)` in passenger `i`'s payment, exactly.
pub fn beta_ratio(i: usize, p: usize, q: usize, n: usize, mode: Mode) -> Result<Ratio<i64>> {
    check_indices(i, p, q, n, mode)?;
    let (num, den) = beta_parts(i, p, q, n);
    Ok(Ratio::new(num, den))
}

fn check_indices(i: usize, p: usize, q: usize, n: usize, mode: Mode) -> Result<()> {
    let q_max = match mode {
        Mode::LastMile => n,
        Mode::RoutingGame => n + 1,
    };
    if i == 0 || i > n || p > i || q < i || p == q || q > q_max {
        return Err(Error::validation(format!(
            "beta({i}, {p}, {q}) is undefined for n = {n} in {mode} mode \
             (need 0 <= p <= i <= q <= {q_max}, p != q, 1 <= i <= n)"
        )));
    }
    Ok(())
}

/// `(numerator, denominator)` for indices already known to be valid.
fn beta_parts(i: usize, p: usize, q: usize, n: usize) -> (i64, i64) {
    let (i, p, q, n) = (i as i64, p as i64, q as i64, n as i64);
    if q == n + 1 {
        return if p == i {
            (1, n - i + 1)
        } else if p == 0 {
            // i joins before every other passenger. Multiplies d(0, n+1) = 0.
            (-1, n)
        } else {
            (-1, (n - p) * (n - p + 1))
        };
    }
    match (p, q) {
        (0, q) if q == i => (1, i),
        (0, q) => (-1, q * (q - 1)),
        (p, q) if q == i => (1, (i - p) * (i - p + 1)),
        (p, q) if p == i => (1, (q - i) * (q - i + 1)),
        (p, q) => {
            let span = q - p;
            (-2, (span - 1) * span * (span + 1))
        }
    }
}

const TABLE: usize = 64;

const fn weight_table(kind: u8) -> [f64; TABLE] {
    let mut t = [0.0; TABLE];
    let mut g = 1;
    while g < TABLE {
        let x = g as f64;
        t[g] = match kind {
            0 => 1.0 / x,
            1 => 1.0 / (x * (x + 1.0)),
            _ => 2.0 / ((x - 1.0) * x * (x + 1.0)),
        };
        g += 1;
    }
    t
}

static RECIPROCAL: [f64; TABLE] = weight_table(0);
static ADJACENT: [f64; TABLE] = weight_table(1);
static STRADDLE: [f64; TABLE] = weight_table(2);

/// `1/g`.
#[inline]
fn reciprocal(g: usize) -> f64 {
    if g < TABLE {
        RECIPROCAL[g]
    } else {
        1.0 / g as f64
    }
}

/// `1/(g(g+1))`: weight of a pair one of whose ends is the payer.
#[inline]
fn adjacent(g: usize) -> f64 {
    if g < TABLE {
        ADJACENT[g]
    } else {
        let x = g as f64;
        1.0 / (x * (x + 1.0))
    }
}

/// `2/((s-1)s(s+1))`: weight of a pair straddling the payer, `s >= 2`.
#[inline]
fn straddle(s: usize) -> f64 {
    if s < TABLE {
        STRADDLE[s]
    } else {
        let x = s as f64;
        2.0 / ((x - 1.0) * x * (x + 1.0))
    }
}

/// Payments in meters for every passenger of `m`, using `m`'s dummy column.
///
/// Every weight depends only on index gaps, and a long pair `(p, q)` with
/// `q - p >= 2` adds the same amount to each passenger strictly between its
/// ends. A difference array over those pairs gives all payments in `O(n^2)`.
pub fn shapo_values(m: &DistanceMatrix) -> Vec<f64> {
    let n = m.n();
    let size = m.size();
    let delta = m.as_slice();
    let row = |a: usize| &delta[a * size..(a + 1) * size];

    let mut on_stack = [0.0; TABLE];
    let mut on_heap = Vec::new();
    let between: &mut [f64] = if size <= TABLE {
        &mut on_stack[..size]
    } else {
        on_heap.resize(size, 0.0);
        &mut on_heap
    };

    let depot = row(0);
    for q in 2..=n {
        let dq = row(q);
        let mut closing = depot[q] * adjacent(q - 1);
        between[1] -= closing;
        for p in 1..q - 1 {
            let share = dq[p] * straddle(q - p);
            between[p + 1] -= share;
            closing += share;
        }
        between[q] += closing;
    }
    let routing = m.mode() == Mode::RoutingGame;
    if routing {
        // The dummy row is the depot row; pairs (p, n+1) for 0 < p < n.
        let mut closing = 0.0;
        for p in 1..n {
            let share = depot[p] * adjacent(n - p);
            between[p + 1] -= share;
            closing += share;
        }
        between[n + 1] += closing;
    }

    let mut running = 0.0;
    (1..=n)
        .map(|i| {
            let di = row(i);
            let mut own = depot[i] * reciprocal(i);
            for p in 1..i {
                own += di[p] * adjacent(i - p);
            }
            for q in i + 1..=n {
                own += di[q] * adjacent(q - i);
            }
            if routing {
                own += di[n + 1] * reciprocal(n - i + 1);
            }
            running += between[i];
            own + running
        })
        .collect()
}

/// Prioritized Shapley allocation of `inst` in `mode`.
pub fn shapo_allocate(inst: &RideInstance, mode: Mode) -> Allocation {
    let rule = match mode {
        Mode::LastMile => Rule::Shapo,
        Mode::RoutingGame => Rule::ShapoRouting,
    };
    let values = if inst.mode() == mode {
        shapo_values(&inst.matrix)
    } else {
        shapo_values(&inst.matrix.with_mode(mode))
    };
    Allocation::from_meters(
        rule,
        CostModel::new(true, mode),
        values,
        inst.price_per_km,
    )
}

/// The chain neighbours `(l, r)` of passenger `i` among those preceding it in
/// the join order `perm` (a permutation of `1..=n`). `l = 0` stands for the
/// depot and `r = n + 1` for the dummy destination.
pub fn chain_neighbors(i: usize, perm: &[usize]) -> (usize, usize) {
    let n = perm.len();
    let at = perm
        .iter()
        .position(|&x| x == i)
        .unwrap_or_else(|| panic!("passenger {i} is not in the join order"));
    let before = &perm[..at];
    let l = before.iter().copied().filter(|&x| x < i).max().unwrap_or(0);
    let r = before.iter().copied().filter(|&x| x > i).min().unwrap_or(n + 1);
    (l, r)
}

/// Marginal chain cost of `i` joining its predecessors in `perm`, computed
/// from its neighbours alone.
pub fn marginal_via_neighbors(i: usize, perm: &[usize], m: &DistanceMatrix) -> f64 {
    let (l, r) = chain_neighbors(i, perm);
    m.get(l, i) + m.get(i, r) - m.get(l, r)
}
