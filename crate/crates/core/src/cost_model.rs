//! Coalition costs.
//!
//! Passenger `u_i` (1-based) is dropped `i`-th in the given order and lives at
//! matrix index `i`. A [`Coalition`] stores passenger `u_i` in bit `i - 1`, so
//! a cost table is indexed directly by the coalition bits.
//!
//! Every cost ends with a leg to the dummy destination `n + 1`. That leg is
//! free in last-mile mode and is the return to the depot in routing-game mode,
//! so one code path serves both.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::road_graph::{DistanceMatrix, Mode};

/// Largest passenger count for the prioritized chain cost table.
pub const PRIORITIZED_CAP: usize = 24;
/// Largest coalition handled by the exact path-TSP solver.
pub const TSP_CAP: usize = 20;

/// A ride: distances plus the currency rate applied at the allocation boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct RideInstance {
    pub matrix: DistanceMatrix,
    /// Currency per kilometer; matrix entries are meters.
    pub price_per_km: f64,
}

impl RideInstance {
    pub fn new(matrix: DistanceMatrix) -> Self {
        RideInstance {
            matrix,
            price_per_km: 1.0,
        }
    }

    pub fn with_price_per_km(mut self, price_per_km: f64) -> Result<Self> {
        if !price_per_km.is_finite() || price_per_km <= 0.0 {
            return Err(Error::validation(format!(
                "price per km must be positive, got {price_per_km}"
            )));
        }
        self.price_per_km = price_per_km;
        Ok(self)
    }

    /// Convenience for hand-entered `(n+1) x (n+1)` matrices.
    pub fn from_rows(rows: &[Vec<f64>], mode: Mode) -> Result<Self> {
        Ok(Self::new(DistanceMatrix::from_rows(rows, mode, false)?))
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn mode(&self) -> Mode {
        self.matrix.mode()
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        RideInstance {
            matrix: self.matrix.with_mode(mode),
            price_per_km: self.price_per_km,
        }
    }

    /// Meters to currency.
    pub fn to_currency(&self, meters: f64) -> f64 {
        meters * self.price_per_km / 1000.0
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::full(self.n())
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(u32);

impl Coalition {
    pub const fn empty() -> Self {
        Coalition(0)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= PRIORITIZED_CAP, "coalitions hold at most {PRIORITIZED_CAP} passengers");
        Coalition(((1u64 << n) - 1) as u32)
    }

    pub const fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    /// Coalition of 1-based passenger indices.
    pub fn from_passengers(passengers: impl IntoIterator<Item = usize>) -> Self {
        passengers
            .into_iter()
            .fold(Coalition::empty(), |c, p| c.with(p))
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, passenger: usize) -> bool {
        passenger >= 1 && self.0 & (1 << (passenger - 1)) != 0
    }

    pub fn with(self, passenger: usize) -> Self {
        assert!((1..=PRIORITIZED_CAP).contains(&passenger), "passenger index {passenger} out of range");
        Coalition(self.0 | 1 << (passenger - 1))
    }

    pub fn without(self, passenger: usize) -> Self {
        if passenger == 0 {
            return self;
        }
        Coalition(self.0 & !(1 << (passenger - 1)))
    }

    /// Highest-indexed (last dropped) member.
    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 32 - self.0.leading_zeros() as usize)
    }

    /// Members in ascending passenger order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let p = bits.trailing_zeros() as usize + 1;
                bits &= bits - 1;
                p
            })
        })
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// Fixed drop-off order preserved in every coalition.
    Prioritized,
    /// Each coalition takes its optimal open path.
    NonPrioritized,
    RoutingGamePrioritized,
    RoutingGameNonPrioritized,
}

impl CostModel {
    pub fn new(prioritized: bool, mode: Mode) -> Self {
        match (prioritized, mode) {
            (true, Mode::LastMile) => CostModel::Prioritized,
            (false, Mode::LastMile) => CostModel::NonPrioritized,
            (true, Mode::RoutingGame) => CostModel::RoutingGamePrioritized,
            (false, Mode::RoutingGame) => CostModel::RoutingGameNonPrioritized,
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            CostModel::Prioritized | CostModel::NonPrioritized => Mode::LastMile,
            _ => Mode::RoutingGame,
        }
    }

    pub fn is_prioritized(self) -> bool {
        matches!(self, CostModel::Prioritized | CostModel::RoutingGamePrioritized)
    }

    /// Same prioritization, other mode.
    pub fn in_mode(self, mode: Mode) -> Self {
        CostModel::new(self.is_prioritized(), mode)
    }

    fn cap(self) -> usize {
        if self.is_prioritized() {
            PRIORITIZED_CAP
        } else {
            TSP_CAP
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Prioritized => "prioritized",
            CostModel::NonPrioritized => "non-prioritized",
            CostModel::RoutingGamePrioritized => "routing-game-prioritized",
            CostModel::RoutingGameNonPrioritized => "routing-game-non-prioritized",
        })
    }
}

impl std::str::FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::validation(format!("unknown cost model {s:?}")))
    }
}

/// How the non-prioritized game prices the grand coalition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrandCoalition {
    /// The ride actually driven: the chain cost of the given order.
    #[default]
    GivenOrder,
    /// The optimal path, like every other coalition.
    Optimal,
}

/// `c(S)` for every coalition, indexed by [`Coalition::bits`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionCostTable {
    pub model: CostModel,
    pub n: usize,
    pub price_per_km: f64,
    pub costs: Vec<f64>,
}

impl CoalitionCostTable {
    /// Wraps an arbitrary cost vector (meters). The empty coalition must cost 0.
    pub fn from_costs(model: CostModel, n: usize, price_per_km: f64, costs: Vec<f64>) -> Result<Self> {
        if n == 0 || n > PRIORITIZED_CAP {
            return Err(Error::Capacity {
                what: "coalition cost table",
                size: n,
                cap: PRIORITIZED_CAP,
            });
        }
        if costs.len() != 1 << n {
            return Err(Error::validation(format!(
                "cost table has {} entries, expected 2^{n} = {}",
                costs.len(),
                1usize << n
            )));
        }
        if costs[0] != 0.0 {
            return Err(Error::validation("the empty coalition must cost 0"));
        }
        Ok(CoalitionCostTable {
            model,
            n,
            price_per_km,
            costs,
        })
    }

    pub fn cost(&self, s: Coalition) -> f64 {
        self.costs[s.bits() as usize]
    }

    pub fn grand_cost(&self) -> f64 {
        *self.costs.last().expect("table is never empty")
    }
}

/// `v(S)`: the chain from the depot through the members of `s` in ascending
/// passenger order, closed by the dummy leg.
pub fn chain_cost(inst: &RideInstance, s: Coalition) -> f64 {
    let m = &inst.matrix;
    let mut at = 0;
    let mut total = 0.0;
    for p in s.members() {
        total += m.get(at, p);
        at = p;
    }
    if at != 0 {
        total += m.get(at, m.dummy());
    }
    total
}

fn check_tsp_size(size: usize) -> Result<()> {
    if size > TSP_CAP {
        return Err(Error::Capacity {
            what: "path-TSP coalition",
            size,
            cap: TSP_CAP,
        });
    }
    Ok(())
}

/// Exact minimum over visiting orders of the path from the depot through
/// every member of `s` (plus the dummy leg), by Held-Karp.
pub fn optimal_open_path_cost(inst: &RideInstance, s: Coalition) -> Result<f64> {
    check_tsp_size(s.len())?;
    let members: Vec<usize> = s.members().collect();
    Ok(SuffixTable::solve(&inst.matrix, &members).best)
}

/// An optimal visiting order of `s`, with its cost. Among equal-cost orders
/// the lexicographically smallest passenger sequence wins.
pub fn optimal_order(inst: &RideInstance, s: Coalition) -> Result<(f64, Vec<usize>)> {
    check_tsp_size(s.len())?;
    let members: Vec<usize> = s.members().collect();
    let table = SuffixTable::solve(&inst.matrix, &members);
    Ok((table.best, table.reconstruct(&inst.matrix, &members)))
}

/// `rest[mask * k + j]`: the cheapest way to leave member `j`, visit every
/// member in `mask` (which excludes `j`) and finish with the dummy leg.
struct SuffixTable {
    k: usize,
    rest: Vec<f64>,
    best: f64,
}

impl SuffixTable {
    fn solve(m: &DistanceMatrix, members: &[usize]) -> Self {
        let k = members.len();
        if k == 0 {
            return SuffixTable {
                k,
                rest: Vec::new(),
                best: 0.0,
            };
        }
        let full = (1usize << k) - 1;
        let mut rest = vec![f64::INFINITY; (full + 1) * k];
        for j in 0..k {
            rest[j] = m.get(members[j], m.dummy());
        }
        for mask in 1..=full {
            for j in (0..k).filter(|j| mask & (1 << j) == 0) {
                let mut best = f64::INFINITY;
                let mut bits = mask;
                while bits != 0 {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let c = m.get(members[j], members[t]) + rest[(mask ^ (1 << t)) * k + t];
                    if c < best {
                        best = c;
                    }
                }
                rest[mask * k + j] = best;
            }
        }
        let best = (0..k)
            .map(|j| m.get(0, members[j]) + rest[(full ^ (1 << j)) * k + j])
            .fold(f64::INFINITY, f64::min);
        SuffixTable { k, rest, best }
    }

    fn reconstruct(&self, m: &DistanceMatrix, members: &[usize]) -> Vec<usize> {
        let k = self.k;
        let mut order = Vec::with_capacity(k);
        let mut remaining = (1usize << k) - 1;
        let mut from = 0;
        let mut target = self.best;
        while remaining != 0 {
            let after = |t: usize| self.rest[(remaining ^ (1 << t)) * k + t];
            let value = |t: usize| m.get(from, members[t]) + after(t);
            let tol = 1e-12 * target.abs().max(1.0);
            let open = (0..k).filter(|t| remaining & (1 << t) != 0);
            let t = open
                .clone()
                .find(|&t| value(t) <= target + tol)
                .or_else(|| open.min_by(|&a, &b| value(a).total_cmp(&value(b))))
                .expect("remaining is non-empty");
            target = after(t);
            order.push(members[t]);
            from = members[t];
            remaining ^= 1 << t;
        }
        order
    }
}

/// All `2^n` coalition costs under `model`, pricing the non-prioritized grand
/// coalition by the given order.
pub fn build_cost_table(inst: &RideInstance, model: CostModel) -> Result<CoalitionCostTable> {
    build_cost_table_with(inst, model, GrandCoalition::default())
}

pub fn build_cost_table_with(
    inst: &RideInstance,
    model: CostModel,
    grand: GrandCoalition,
) -> Result<CoalitionCostTable> {
    let n = inst.n();
    if model.mode() != inst.mode() {
        return Err(Error::validation(format!(
            "cost model {model} needs a {} matrix, instance is {}",
            model.mode(),
            inst.mode()
        )));
    }
    if n > model.cap() {
        return Err(Error::Capacity {
            what: "coalition cost table",
            size: n,
            cap: model.cap(),
        });
    }
    let costs = if model.is_prioritized() {
        prioritized_costs(&inst.matrix)
    } else {
        let mut costs = open_path_costs(&inst.matrix);
        if grand == GrandCoalition::GivenOrder {
            costs[(1 << n) - 1] = chain_cost(inst, inst.grand_coalition());
        }
        costs
    };
    CoalitionCostTable::from_costs(model, n, inst.price_per_km, costs)
}

/// Each mask extends the mask without its highest member by one chain leg.
fn prioritized_costs(m: &DistanceMatrix) -> Vec<f64> {
    let n = m.n();
    let dummy = m.dummy();
    let mut open = vec![0.0; 1 << n];
    let mut costs = vec![0.0; 1 << n];
    for mask in 1usize..1 << n {
        let last = usize::BITS as usize - mask.leading_zeros() as usize;
        let prefix = mask ^ (1 << (last - 1));
        let prev = if prefix == 0 {
            0
        } else {
            usize::BITS as usize - prefix.leading_zeros() as usize
        };
        open[mask] = open[prefix] + m.get(prev, last);
        costs[mask] = open[mask] + m.get(last, dummy);
    }
    costs
}

/// One Held-Karp sweep: `ending[mask * n + j]` is the cheapest path from the
/// depot covering `mask` and stopping at member `j`.
fn open_path_costs(m: &DistanceMatrix) -> Vec<f64> {
    let n = m.n();
    let dummy = m.dummy();
    let mut ending = vec![f64::INFINITY; n << n];
    let mut costs = vec![0.0; 1 << n];
    for mask in 1usize..1 << n {
        let mut cheapest = f64::INFINITY;
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let prefix = mask ^ (1 << j);
            let reach = if prefix == 0 {
                m.get(0, j + 1)
            } else {
                let mut best = f64::INFINITY;
                let mut rest = prefix;
                while rest != 0 {
                    let t = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    let c = ending[prefix * n + t] + m.get(t + 1, j + 1);
                    if c < best {
                        best = c;
                    }
                }
                best
            };
            ending[mask * n + j] = reach;
            let done = reach + m.get(j + 1, dummy);
            if done < cheapest {
                cheapest = done;
            }
        }
        costs[mask] = cheapest;
    }
    costs
}
