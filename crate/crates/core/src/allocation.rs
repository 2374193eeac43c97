use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cost_model::{build_cost_table, CostModel, RideInstance};
use crate::error::{Error, Result};
use crate::road_graph::Mode;
use crate::{exact_shapley, proxies, shapo};

/// Allocation rule identifiers, as used on the command line and in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Exact,
    Shapo,
    ShapoRouting,
    Depot,
    Shortcut,
    Reroute,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Exact,
        Rule::Shapo,
        Rule::ShapoRouting,
        Rule::Depot,
        Rule::Shortcut,
        Rule::Reroute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Exact => "exact",
            Rule::Shapo => "shapo",
            Rule::ShapoRouting => "shapo-routing",
            Rule::Depot => "depot",
            Rule::Shortcut => "shortcut",
            Rule::Reroute => "reroute",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown rule {s:?}")))
    }
}

/// Conditions the caller should know about when reading an allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationFlag {
    /// The rule's proportionality weights summed to zero; cost was split equally.
    EqualSplitFallback,
    /// Some re-routed margin was negative (the given order is not optimal).
    NegativeMargin,
}

/// Per-passenger payments in currency. `payments[k]` belongs to passenger `k + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub rule: Rule,
    pub n: usize,
    pub payments: Vec<f64>,
    pub total: f64,
    pub cost_model: CostModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<AllocationFlag>,
}

impl Allocation {
    /// Converts per-passenger meters to currency at `price_per_km`.
    pub fn from_meters(rule: Rule, cost_model: CostModel, meters: Vec<f64>, price_per_km: f64) -> Self {
        let mut payments = meters;
        for p in &mut payments {
            *p = *p * price_per_km / 1000.0;
        }
        Allocation {
            rule,
            n: payments.len(),
            total: payments.iter().sum(),
            payments,
            cost_model,
            flags: Vec::new(),
        }
    }

    pub fn with_flag(mut self, flag: AllocationFlag) -> Self {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
        self
    }

    pub fn has_flag(&self, flag: AllocationFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("allocation serializes")
    }
}

/// Runs `rule` on `inst`. `exact_model` picks the game for [`Rule::Exact`]
/// (its mode is taken from the instance). `shapo-routing` always works on the
/// round-trip matrix.
pub fn allocate(inst: &RideInstance, rule: Rule, exact_model: CostModel) -> Result<Allocation> {
    match rule {
        Rule::Exact => {
            let model = exact_model.in_mode(inst.mode());
            exact_shapley::shapley_exact(&build_cost_table(inst, model)?)
        }
        Rule::Shapo => Ok(shapo::shapo_allocate(inst, inst.mode())),
        Rule::ShapoRouting => Ok(shapo::shapo_allocate(inst, Mode::RoutingGame)),
        Rule::Depot => Ok(proxies::depot_distance(inst)),
        Rule::Shortcut => Ok(proxies::shortcut_distance(inst)),
        Rule::Reroute => proxies::rerouted_margin(inst),
    }
}
