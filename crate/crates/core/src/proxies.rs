//! Baseline allocation rules. Each splits the given-order ride cost `c(D)`
//! proportionally to a per-passenger weight, falling back to an equal split
//! (flagged) when the weights sum to zero.

use crate::allocation::{Allocation, AllocationFlag, Rule};
use crate::cost_model::{chain_cost, optimal_open_path_cost, CostModel, RideInstance};
use crate::error::Result;

/// Proportional to the distance from the depot.
pub fn depot_distance(inst: &RideInstance) -> Allocation {
    let m = &inst.matrix;
    let weights: Vec<f64> = (1..=inst.n()).map(|i| m.get(0, i)).collect();
    proportional(inst, Rule::Depot, &weights)
}

/// Proportional to the detour saved by skipping each stop on the given path:
/// `d(i-1, i) + d(i, i+1) - d(i-1, i+1)`, with the dummy destination after
/// the last stop.
pub fn shortcut_distance(inst: &RideInstance) -> Allocation {
    let m = &inst.matrix;
    let weights: Vec<f64> = (1..=inst.n())
        .map(|i| m.get(i - 1, i) + m.get(i, i + 1) - m.get(i - 1, i + 1))
        .collect();
    proportional(inst, Rule::Shortcut, &weights)
}

/// Proportional to `c(D) - c_opt(D \ {i})`, re-optimizing the route for each
/// left-out passenger. Solves `n` path-TSPs.
pub fn rerouted_margin(inst: &RideInstance) -> Result<Allocation> {
    let full = inst.grand_coalition();
    let total = chain_cost(inst, full);
    let weights = (1..=inst.n())
        .map(|i| Ok(total - optimal_open_path_cost(inst, full.without(i))?))
        .collect::<Result<Vec<f64>>>()?;
    let negative = weights.iter().any(|&w| w < -1e-9 * total.max(1.0));
    let allocation = proportional(inst, Rule::Reroute, &weights);
    Ok(if negative {
        allocation.with_flag(AllocationFlag::NegativeMargin)
    } else {
        allocation
    })
}

fn proportional(inst: &RideInstance, rule: Rule, weights: &[f64]) -> Allocation {
    let total = chain_cost(inst, inst.grand_coalition());
    let sum: f64 = weights.iter().sum();
    let scale = weights.iter().fold(total.abs(), |acc, w| acc.max(w.abs()));
    let model = CostModel::new(false, inst.mode());
    if sum.abs() <= 1e-12 * scale || scale == 0.0 {
        let share = vec![total / weights.len() as f64; weights.len()];
        return Allocation::from_meters(rule, model, share, inst.price_per_km)
            .with_flag(AllocationFlag::EqualSplitFallback);
    }
    let meters: Vec<f64> = weights.iter().map(|w| w / sum * total).collect();
    Allocation::from_meters(rule, model, meters, inst.price_per_km)
}
