//! The worked examples shipped as operator files, built in code.

use crate::error::Result;
use crate::operator::{HeredityTensor, QsoOperator};
use crate::spec_file::{Metadata, OperatorSpecFile, VaSpec};

/// `V_a` for the given `a`.
pub fn va(a: f64) -> Result<QsoOperator> {
    crate::abscont::va_operator(a)
}

/// Builds an `n = 3` operator from the six pair rows `P[11,.]`, `P[12,.]`,
/// `P[13,.]`, `P[22,.]`, `P[23,.]`, `P[33,.]`.
fn from_rows(rows: [[f64; 3]; 6]) -> QsoOperator {
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut t = HeredityTensor::zeros(3).expect("n = 3");
    for ((i, j), row) in pairs.into_iter().zip(rows) {
        for (k, p) in row.into_iter().enumerate() {
            t.set(i, j, k, p);
        }
    }
    QsoOperator::new(t, false).expect("fixture rows are stochastic")
}

/// A b-bistochastic operator on `S^2` whose vertex `(0,0,1)` is attracting
/// but not the only fixed point: `(1,0,0)` and `(0,1,0)` are fixed too.
pub fn attracting_not_unique() -> QsoOperator {
    from_rows([
        [1.0, 0.0, 0.0],
        [0.3, 0.4, 0.3],
        [0.3, 0.2, 0.5],
        [0.0, 1.0, 0.0],
        [0.0, 0.3, 0.7],
        [0.0, 0.0, 1.0],
    ])
}

/// `(0,0,1)` is the unique fixed point although `P[13,1] = 1/2` breaks the
/// sufficient uniqueness conditions.
pub fn sufficiency_only() -> QsoOperator {
    from_rows([
        [0.5, 0.3, 0.2],
        [0.25, 0.5, 0.25],
        [0.5, 0.0, 0.5],
        [0.0, 0.6, 0.4],
        [0.0, 0.25, 0.75],
        [0.0, 0.0, 1.0],
    ])
}

/// Unique fixed point `(0,0,1)` but not a strict contraction.
pub fn unique_not_contraction() -> QsoOperator {
    from_rows([
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
    ])
}

/// Every shipped fixture with its file stem.
pub fn all() -> Vec<(&'static str, QsoOperator)> {
    vec![
        ("va_0", va(0.0).expect("valid a")),
        ("va_half", va(0.5).expect("valid a")),
        ("va_two_thirds", va(2.0 / 3.0).expect("valid a")),
        ("attracting_not_unique", attracting_not_unique()),
        ("sufficiency_only", sufficiency_only()),
        ("unique_not_contraction", unique_not_contraction()),
    ]
}

/// Where each fixture comes from in the source material, and its role.
pub fn locations() -> Vec<(&'static str, &'static str)> {
    vec![
        ("va_0", "two-type family V_a at a = 0; trivial member of the absolute-continuity family"),
        ("va_half", "two-type family V_a at a = 1/2; mixing and absolute-continuity worked case"),
        ("va_two_thirds", "two-type family V_a at a = 2/3; unique fixed point without strict contraction"),
        ("attracting_not_unique", "worked example: attracting vertex (0,0,1) that is not the unique fixed point"),
        ("sufficiency_only", "remark after the uniqueness theorem: the sufficient conditions fail yet (0,0,1) is unique"),
        ("unique_not_contraction", "contraction discussion: three-type operator with a unique fixed point that is not a strict contraction"),
    ]
}

/// The operator files as shipped: `V_a` members use the `va` shorthand.
pub fn shipped_specs() -> Vec<(&'static str, OperatorSpecFile)> {
    let va_a = [("va_0", 0.0), ("va_half", 0.5), ("va_two_thirds", 2.0 / 3.0)];
    let locs = locations();
    all()
        .into_iter()
        .map(|(name, op)| {
            let description = locs.iter().find(|(n, _)| *n == name).map(|(_, d)| d.to_string());
            let metadata = Some(Metadata { name: Some(name.to_string()), description });
            let spec = match va_a.iter().find(|(n, _)| *n == name) {
                Some(&(_, a)) => OperatorSpecFile { n: 2, coefficients: Vec::new(), va: Some(VaSpec { a }), metadata },
                None => OperatorSpecFile::from_operator(&op, metadata),
            };
            (name, spec)
        })
        .collect()
}

/// `manifest.json` contents: file name to location.
pub fn manifest_json() -> String {
    let map: std::collections::BTreeMap<String, &str> =
        locations().into_iter().map(|(name, loc)| (format!("{name}.json"), loc)).collect();
    crate::report::to_json(&map)
}
