//! JSON operator files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "coefficients": [
//!     {"i": 1, "j": 1, "k": 1, "p": 0.5},
//!     {"i": 1, "j": 1, "k": 2, "p": 0.5},
//!     {"i": 1, "j": 2, "k": 2, "p": 1.0},
//!     {"i": 2, "j": 2, "k": 2, "p": 1.0}
//!   ],
//!   "metadata": {"name": "example"}
//! }
//! ```
//!
//! Indices are 1-based and omitted coefficients are 0. A pair listed in
//! one order only (canonically `i <= j`) is mirrored; a pair listed in both
//! orders must agree unless symmetrization is requested, which averages.
//! `{"n": 2, "va": {"a": 0.5}}` is shorthand for `V_a`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::abscont::va_operator;
use crate::error::{QsoError, Result};
use crate::operator::{HeredityTensor, QsoOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaSpec {
    pub a: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpecFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients: Vec<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va: Option<VaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl OperatorSpecFile {
    /// Parses `text`; `path` is only used in error messages.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let spec: OperatorSpecFile = serde_json::from_str(text).map_err(|e| QsoError::Parse {
            path: path.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if spec.va.is_some() && !spec.coefficients.is_empty() {
            return Err(QsoError::Parse {
                path: path.to_string(),
                line: 1,
                column: 1,
                message: "\"va\" and \"coefficients\" are mutually exclusive".into(),
            });
        }
        Ok(spec)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| QsoError::Parse {
            path: shown.clone(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text, &shown)
    }

    /// Builds the validated operator.
    pub fn to_operator(&self, symmetrize: bool) -> Result<QsoOperator> {
        if let Some(va) = &self.va {
            if self.n != 2 {
                return Err(QsoError::DimensionMismatch { expected: 2, got: self.n });
            }
            return va_operator(va.a);
        }
        let n = self.n;
        let mut t = HeredityTensor::zeros(n)?;
        let mut seen = BTreeSet::new();
        let mut listed_pairs = BTreeSet::new();
        for c in &self.coefficients {
            for idx in [c.i, c.j, c.k] {
                if idx < 1 || idx > n {
                    return Err(QsoError::IndexOutOfRange { index: idx, lo: 1, hi: n });
                }
            }
            if !seen.insert((c.i, c.j, c.k)) {
                return Err(QsoError::InvalidArgument(format!("coefficient P[{}{},{}] listed twice", c.i, c.j, c.k)));
            }
            listed_pairs.insert((c.i - 1, c.j - 1));
            t.set_entry(c.i - 1, c.j - 1, c.k - 1, c.p);
        }
        // a pair listed in one order only is mirrored
        for i in 0..n {
            for j in i + 1..n {
                let (fwd, back) = (listed_pairs.contains(&(i, j)), listed_pairs.contains(&(j, i)));
                let (from, to) = match (fwd, back) {
                    (true, false) => ((i, j), (j, i)),
                    (false, true) => ((j, i), (i, j)),
                    _ => continue,
                };
                for k in 0..n {
                    let v = t.get(from.0, from.1, k);
                    t.set_entry(to.0, to.1, k, v);
                }
            }
        }
        QsoOperator::new(t, symmetrize)
    }

    /// Sparse canonical listing of an operator: nonzero `P[ij,k]`, `i <= j`.
    pub fn from_operator(op: &QsoOperator, metadata: Option<Metadata>) -> Self {
        let n = op.dim();
        let mut coefficients = Vec::new();
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let p = op.coef(i, j, k);
                    if p != 0.0 {
                        coefficients.push(Coefficient { i: i + 1, j: j + 1, k: k + 1, p });
                    }
                }
            }
        }
        OperatorSpecFile { n, coefficients, va: None, metadata }
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json(self)
    }
}
