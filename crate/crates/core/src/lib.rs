//! Cost allocation for last-mile shared rides.
//!
//! Every passenger leaves the same origin (the depot) and is dropped at their
//! own destination. The crate computes how the ride cost should be split:
//!
//! * [`exact_shapley`]: ground-truth Shapley values over a full coalition
//!   cost table.
//! * [`shapo`]: the closed-form Shapley value for a fixed drop-off order,
//!   `O(n^2)` overall, also usable as a proxy when the order is not fixed.
//! * [`proxies`]: depot-distance, shortcut-distance and re-routed-margin
//!   baselines.
//!
//! [`road_graph`] turns an edge list into the distance matrix everything else
//! consumes, [`cost_model`] defines coalition costs, and [`eval_harness`]
//! runs the seeded benchmark comparing the rules against the exact value.

pub mod allocation;
pub mod cost_model;
pub mod error;
pub mod eval_harness;
pub mod exact_shapley;
pub mod generate;
pub mod instance_file;
pub mod proxies;
pub mod road_graph;
pub mod shapo;
pub mod verify;

pub use allocation::{allocate, Allocation, AllocationFlag, Rule};
pub use cost_model::{
    build_cost_table, build_cost_table_with, chain_cost, optimal_open_path_cost, optimal_order,
    Coalition, CoalitionCostTable, CostModel, GrandCoalition, RideInstance,
};
pub use error::{Error, Result};
pub use eval_harness::{
    metrics, run_experiment, sample_instance, ExperimentConfig, ExperimentReport, MetricRecord,
};
pub use exact_shapley::shapley_exact;
pub use road_graph::{
    build_distance_matrix, crop_to_nearest, load_graph, shortest_distances, DistanceMatrix, Mode,
    RoadGraph, VertexId,
};
pub use shapo::{beta, beta_ratio, marginal_via_neighbors, shapo_allocate};
