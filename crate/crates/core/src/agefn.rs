//! Age functions given as constants or piecewise-linear node tables.

use serde::{Deserialize, Serialize};

use crate::discretization::{AgeGrid, AgeProfile};
use crate::error::{Error, Result};

/// Either `{"const": x}` or `{"nodes": [...], "values": [...]}`.
///
/// Node tables are linearly interpolated and held constant outside their
/// range. A repeated node encodes a jump; the function is right-continuous
/// there, so `nodes [0, 2, 2, 10]`, `values [1, 1, 0, 0]` vanishes at `a = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum AgeFunction {
    Const {
        #[serde(rename = "const")]
        value: f64,
    },
    Table {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
}

impl AgeFunction {
    pub fn constant(value: f64) -> Self {
        AgeFunction::Const { value }
    }

    /// `value` on `[lo, hi)`, zero elsewhere on `[0, a_max]`.
    pub fn indicator(lo: f64, hi: f64, value: f64, a_max: f64) -> Self {
        let mut nodes = vec![0.0];
        let mut values = vec![if lo <= 0.0 { value } else { 0.0 }];
        if lo > 0.0 {
            nodes.extend([lo, lo]);
            values.extend([0.0, value]);
        }
        nodes.extend([hi, hi, a_max.max(hi)]);
        values.extend([value, 0.0, 0.0]);
        AgeFunction::Table { nodes, values }
    }

    pub fn validate(&self, pointer: &str) -> Result<()> {
        match self {
            AgeFunction::Const { value } if !value.is_finite() => {
                Err(Error::config(pointer, "constant must be finite"))
            }
            AgeFunction::Const { .. } => Ok(()),
            AgeFunction::Table { nodes, values } => {
                if nodes.is_empty() || nodes.len() != values.len() {
                    return Err(Error::config(
                        pointer,
                        "nodes and values must be nonempty and of equal length",
                    ));
                }
                if nodes.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::config(format!("{pointer}/nodes"), "nodes must be nondecreasing"));
                }
                if nodes.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::config(pointer, "nodes and values must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Checks that a table covers `[0, a_max]`.
    pub fn validate_domain(&self, pointer: &str, a_max: f64) -> Result<()> {
        self.validate(pointer)?;
        if let AgeFunction::Table { nodes, .. } = self {
            let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
            if lo > 0.0 || hi < a_max * (1.0 - 1e-12) {
                return Err(Error::config(
                    format!("{pointer}/nodes"),
                    format!("table covers [{lo}, {hi}] but must cover [0, {a_max}]"),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: f64) -> f64 {
        match self {
            AgeFunction::Const { value } => *value,
            AgeFunction::Table { nodes, values } => {
                let n = nodes.len();
                if a < nodes[0] {
                    return values[0];
                }
                // last index with nodes[k] <= a (right-continuous at repeated nodes)
                let k = nodes.partition_point(|&x| x <= a);
                if k >= n {
                    return values[n - 1];
                }
                let (x0, x1) = (nodes[k - 1], nodes[k]);
                let (y0, y1) = (values[k - 1], values[k]);
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
                }
            }
        }
    }

    pub fn sample(&self, grid: AgeGrid) -> AgeProfile {
        AgeProfile::from_fn(grid, |a| self.eval(a))
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            AgeFunction::Const { value } => value.abs(),
            AgeFunction::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}
