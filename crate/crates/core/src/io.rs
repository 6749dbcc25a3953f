//! Channel description files.
//!
//! ```json
//! {
//!   "k": 2, "n": 2, "m": 2,
//!   "T_YX": [[0.9, 0.1], [0.1, 0.9]],
//!   "T_ZX": [["0.8", "0.2"], ["0.2", "0.8"]],
//!   "T_ZY": [[0.875, 0.125], [0.125, 0.875]],
//!   "family": {"kind": "bsc", "alpha1": 0.1, "alpha2": 0.2}
//! }
//! ```
//!
//! Matrices are listed row by row (`n` rows of `k` entries for `T_YX`), in
//! the column-stochastic convention: entry `(j, i)` is `Pr(out = j | in = i)`.
//! Symbol `i` of the file is symbol `i + 1` in 1-based notation. Entries may
//! be JSON numbers or decimal strings. Column sums must be within `1e-9` of
//! one and are renormalized on load. `T_ZY` and `family` are optional.

use serde_json::{json, Map, Value};

use crate::channel::{self, DbcModel, Family};
use crate::error::{DbcError, Result};
use crate::prob::{ProbVector, StochasticMatrix};

/// Column-sum tolerance accepted in files.
pub const FILE_SUM_TOL: f64 = 1e-9;

fn parse_err(field: &str, message: impl Into<String>) -> DbcError {
    DbcError::Parse {
        field: field.to_string(),
        message: message.into(),
    }
}

fn number(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| parse_err(field, "number out of range")),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|e| parse_err(field, format!("{s:?}: {e}"))),
        other => Err(parse_err(field, format!("expected a number, found {other}"))),
    }
}

fn size(obj: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .filter(|&x| x > 0)
            .map(|x| Some(x as usize))
            .ok_or_else(|| parse_err(key, "expected a positive integer")),
    }
}

fn matrix(obj: &Map<String, Value>, key: &str, rows: Option<usize>, cols: Option<usize>) -> Result<Option<StochasticMatrix>> {
    let Some(v) = obj.get(key) else {
        return Ok(None);
    };
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(key, "expected an array of rows"))?;
    let mut out = Vec::with_capacity(arr.len());
    for (j, row) in arr.iter().enumerate() {
        let r = row
            .as_array()
            .ok_or_else(|| parse_err(&format!("{key}[{j}]"), "expected an array"))?;
        let mut parsed = Vec::with_capacity(r.len());
        for (i, x) in r.iter().enumerate() {
            parsed.push(number(x, &format!("{key}[{j}][{i}]"))?);
        }
        out.push(parsed);
    }
    if let Some(r) = rows {
        if out.len() != r {
            return Err(DbcError::mismatch(r, out.len(), format!("rows of {key}")));
        }
    }
    if let Some(c) = cols {
        if let Some((j, bad)) = out.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(DbcError::mismatch(c, bad.len(), format!("{key} row {j}")));
        }
    }
    StochasticMatrix::from_rows_tol(key, &out, FILE_SUM_TOL).map(Some)
}

/// Rebuilds the named family to check the matrices against it.
fn family_model(f: &Family) -> Result<DbcModel> {
    match f {
        Family::Bsc { alpha1, alpha2 } => channel::make_broadcast_bsc(*alpha1, *alpha2),
        Family::Z { alpha1, alpha2 } => channel::make_broadcast_z(*alpha1, *alpha2),
        Family::Bec { a1, a2 } => channel::make_broadcast_bec(*a1, *a2),
        Family::GroupAdditive {
            table,
            noise1,
            noise2,
        } => channel::make_group_additive(
            table,
            &ProbVector::new(noise1.clone())?,
            &ProbVector::new(noise2.clone())?,
        ),
        Family::Multiplicative {
            table,
            alpha1,
            alpha_delta,
            sub_noise1,
            sub_noise2,
        } => channel::make_multiplicative(
            table,
            *alpha1,
            *alpha_delta,
            &ProbVector::new(sub_noise1.clone())?,
            &ProbVector::new(sub_noise2.clone())?,
        ),
    }
}

/// Parses a channel description.
pub fn parse_channel(text: &str) -> Result<DbcModel> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        parse_err(
            "document",
            format!("line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    let obj = v
        .as_object()
        .ok_or_else(|| parse_err("document", "expected a JSON object"))?;
    let k = size(obj, "k")?;
    let n = size(obj, "n")?;
    let m = size(obj, "m")?;
    let t_yx = matrix(obj, "T_YX", n, k)?.ok_or_else(|| parse_err("T_YX", "missing"))?;
    let t_zx = matrix(obj, "T_ZX", m, k)?.ok_or_else(|| parse_err("T_ZX", "missing"))?;
    let t_zy = matrix(obj, "T_ZY", m, n)?;
    let mut model = DbcModel::new(t_yx, t_zx, t_zy)?;
    if let Some(f) = obj.get("family") {
        let fam: Family = serde_json::from_value(f.clone()).map_err(|e| parse_err("family", e.to_string()))?;
        let reference = family_model(&fam)?;
        let gap = reference
            .t_yx
            .max_abs_diff(&model.t_yx)
            .max(reference.t_zx.max_abs_diff(&model.t_zx));
        if gap > FILE_SUM_TOL {
            return Err(parse_err(
                "family",
                format!("matrices differ from the declared family by {gap:.3e}"),
            ));
        }
        model.family = Some(fam);
    }
    Ok(model)
}

pub fn read_channel(path: &std::path::Path) -> Result<DbcModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_err("path", format!("{}: {e}", path.display())))?;
    parse_channel(&text)
}

/// Serializes a model in the file format.
pub fn channel_to_json(model: &DbcModel) -> String {
    let mut obj = json!({
        "k": model.k(),
        "n": model.n(),
        "m": model.m(),
        "T_YX": model.t_yx.to_rows(),
        "T_ZX": model.t_zx.to_rows(),
    });
    if let Some(t) = &model.t_zy {
        obj["T_ZY"] = json!(t.to_rows());
    }
    if let Some(f) = &model.family {
        obj["family"] = serde_json::to_value(f).expect("family serializes");
    }
    serde_json::to_string_pretty(&obj).expect("model serializes")
}
