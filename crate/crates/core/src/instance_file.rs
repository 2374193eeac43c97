//! JSON ride descriptions consumed by the command line.
//!
//! A file names either a road graph plus depot and destinations, or an inline
//! `(n+1) x (n+1)` matrix over the depot and destinations:
//!
//! ```json
//! {"graph": "toy.csv", "depot": 0, "vertices": [4, 9], "mode": "last-mile", "price_per_km": 1.0}
//! {"delta": [[0, 1000, 2000], [1000, 0, 1000], [2000, 1000, 0]]}
//! ```
//!
//! A relative `graph` path is resolved against the instance file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost_model::{CostModel, RideInstance};
use crate::error::{Error, Result};
use crate::road_graph::{build_distance_matrix, load_graph_file, Mode, VertexId};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depot: Option<VertexId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<VertexId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_price")]
    pub price_per_km: f64,
    /// Game the `exact` rule is computed over; defaults to non-prioritized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<CostModel>,
}

fn default_price() -> f64 {
    1.0
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    /// Builds the ride. `base` anchors a relative graph path.
    pub fn to_instance(&self, base: &Path) -> Result<RideInstance> {
        let matrix = match (&self.graph, &self.delta) {
            (Some(graph), None) => {
                let (Some(depot), Some(vertices)) = (self.depot, &self.vertices) else {
                    return Err(Error::validation(
                        "an instance with `graph` also needs `depot` and `vertices`",
                    ));
                };
                let g = load_graph_file(base.join(graph))?;
                build_distance_matrix(&g, depot, vertices, self.mode)?
            }
            (None, Some(delta)) => {
                if self.depot.is_some() || self.vertices.is_some() {
                    return Err(Error::validation(
                        "`depot` and `vertices` only apply to graph instances",
                    ));
                }
                crate::road_graph::DistanceMatrix::from_rows(delta, self.mode, false)?
            }
            _ => {
                return Err(Error::validation(
                    "instance needs exactly one of `graph` (with `depot`, `vertices`) or `delta`",
                ))
            }
        };
        RideInstance::new(matrix).with_price_per_km(self.price_per_km)
    }

    pub fn exact_model(&self) -> CostModel {
        self.cost_model
            .unwrap_or(CostModel::NonPrioritized)
            .in_mode(self.mode)
    }
}
