//! JSON model documents.
//!
//! ```json
//! {"type": "discrete_hmm", "initial": [..], "transition": [[..]], "emission": [[..]]}
//! {"type": "linear_gaussian", "A": [[..]], "C": [[..]], "Q": [[..]], "R": [[..]],
//!  "mu0": [..], "sigma0": [[..]]}
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};
use statespace::{DiscreteHmm, LinearGaussianModel, Model};

use crate::error::{CliError, CliResult};

const DISCRETE_KEYS: &[&str] = &["type", "initial", "transition", "emission"];
const GAUSSIAN_KEYS: &[&str] = &["type", "A", "C", "Q", "R", "mu0", "sigma0"];

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn closest(key: &str, allowed: &[&'static str]) -> Option<&'static str> {
    allowed
        .iter()
        .map(|&k| (strsim::levenshtein(key, k), k))
        .filter(|&(d, k)| d <= 2.max(k.len() / 3))
        .min_by_key(|&(d, _)| d)
        .map(|(_, k)| k)
}

fn number(v: &Value, at: &str) -> CliResult<f64> {
    v.as_f64()
        .ok_or_else(|| data(format!("{at}: expected a number, found {}", kind_of(v))))
}

fn vector(v: &Value, at: &str) -> CliResult<Vec<f64>> {
    let items = v
        .as_array()
        .ok_or_else(|| data(format!("{at}: expected an array, found {}", kind_of(v))))?;
    items
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{at}[{i}]")))
        .collect()
}

fn matrix(v: &Value, at: &str) -> CliResult<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| {
        data(format!(
            "{at}: expected an array of rows, found {}",
            kind_of(v)
        ))
    })?;
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| vector(r, &format!("{at}[{i}]")))
        .collect::<CliResult<_>>()?;
    let ncols = parsed.first().map_or(0, Vec::len);
    if let Some(i) = parsed.iter().position(|r| r.len() != ncols) {
        return Err(data(format!(
            "{at}[{i}]: row has {} entries, expected {ncols}",
            parsed[i].len()
        )));
    }
    Ok(DMatrix::from_fn(parsed.len(), ncols, |i, j| parsed[i][j]))
}

fn field<'a>(doc: &'a Map<String, Value>, key: &str) -> CliResult<&'a Value> {
    doc.get(key)
        .ok_or_else(|| data(format!("missing field \"{key}\"")))
}

/// Parses and validates a model document held in memory.
pub fn parse_model_str(text: &str) -> CliResult<Model> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| data(format!("malformed JSON: {e}")))?;
    let doc = value
        .as_object()
        .ok_or_else(|| data(format!("expected a JSON object, found {}", kind_of(&value))))?;
    let kind = field(doc, "type")?;
    let allowed = match kind.as_str() {
        Some("discrete_hmm") => DISCRETE_KEYS,
        Some("linear_gaussian") => GAUSSIAN_KEYS,
        _ => {
            return Err(data(format!(
                "type: expected \"discrete_hmm\" or \"linear_gaussian\", found {kind}"
            )))
        }
    };
    for key in doc.keys() {
        if !allowed.contains(&key.as_str()) {
            let hint = closest(key, allowed)
                .map(|k| format!("; did you mean \"{k}\"?"))
                .unwrap_or_default();
            return Err(data(format!("unknown key \"{key}\"{hint}")));
        }
    }
    let invalid = |e: statespace::Error| data(e.to_string());
    if allowed == DISCRETE_KEYS {
        let initial = vector(field(doc, "initial")?, "initial")?;
        let transition = matrix(field(doc, "transition")?, "transition")?;
        let emission = matrix(field(doc, "emission")?, "emission")?;
        Ok(DiscreteHmm::new(initial, transition, emission)
            .map_err(invalid)?
            .into())
    } else {
        let m = |k: &str| -> CliResult<DMatrix<f64>> { matrix(field(doc, k)?, k) };
        let mu0 = DVector::from_vec(vector(field(doc, "mu0")?, "mu0")?);
        Ok(
            LinearGaussianModel::new(m("A")?, m("C")?, m("Q")?, m("R")?, mu0, m("sigma0")?)
                .map_err(invalid)?
                .into(),
        )
    }
}

pub fn parse_model(path: &Path) -> CliResult<Model> {
    let text =
        std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    parse_model_str(&text).map_err(|e| e.context(path.display()))
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect::<Vec<f64>>().into())
            .collect(),
    )
}

/// The document form of `model`; [`parse_model_str`] inverts it exactly.
pub fn model_to_json(model: &Model) -> Value {
    match model {
        Model::Discrete(h) => json!({
            "type": "discrete_hmm",
            "initial": h.initial,
            "transition": rows(&h.transition),
            "emission": rows(&h.emission),
        }),
        Model::Gaussian(g) => json!({
            "type": "linear_gaussian",
            "A": rows(&g.a),
            "C": rows(&g.c),
            "Q": rows(&g.q),
            "R": rows(&g.r),
            "mu0": g.mu0.iter().copied().collect::<Vec<f64>>(),
            "sigma0": rows(&g.sigma0),
        }),
    }
}
