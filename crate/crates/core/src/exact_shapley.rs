//! Ground-truth Shapley values from a complete coalition cost table.
//!
//! `phi(i) = sum over S not containing i of |S|! (n - |S| - 1)! / n! * (c(S + i) - c(S))`.
//!
//! Numerics: factorials up to 20! are exact in `f64` (their odd parts stay
//! below 2^53), so every weight is a single correctly rounded division.

use crate::allocation::{Allocation, Rule};
use crate::cost_model::{CoalitionCostTable, TSP_CAP};
use crate::error::{Error, Result};

pub fn shapley_exact(table: &CoalitionCostTable) -> Result<Allocation> {
    let values = shapley_values(table)?;
    Ok(Allocation::from_meters(
        Rule::Exact,
        table.model,
        values,
        table.price_per_km,
    ))
}

/// Shapley values in table units (meters).
pub fn shapley_values(table: &CoalitionCostTable) -> Result<Vec<f64>> {
    let n = table.n;
    if n > TSP_CAP {
        return Err(Error::Capacity {
            what: "exact Shapley game",
            size: n,
            cap: TSP_CAP,
        });
    }
    if table.costs.len() != 1 << n {
        return Err(Error::validation(format!(
            "cost table has {} entries, expected 2^{n}",
            table.costs.len()
        )));
    }
    let mut factorial = [1.0f64; TSP_CAP + 1];
    for k in 1..=TSP_CAP {
        factorial[k] = factorial[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..n)
        .map(|s| factorial[s] * factorial[n - s - 1] / factorial[n])
        .collect();

    let costs = &table.costs;
    let values = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            let mut phi = 0.0;
            for mask in (0..1usize << n).filter(|m| m & bit == 0) {
                phi += weight[mask.count_ones() as usize] * (costs[mask | bit] - costs[mask]);
            }
            phi
        })
        .collect();
    Ok(values)
}
