//! Text layout for tabular CMDPs.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! format = spdice-cmdp-v1
//! n_states = 2
//! n_actions = 2
//! gamma = 9.4999999999999996e-1
//! cost_threshold = 1.0000000000000001e-1
//! p0 = <n_states values>
//! reward = <n_states * n_actions values, row-major [s][a]>
//! cost = <n_states * n_actions values, row-major [s][a]>
//! transition = <n_states * n_actions * n_states values, row-major [s][a][s']>
//! ```
//!
//! Reals are written with 17 significant digits, so a write/read cycle is
//! bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::cmdp::TabularCmdp;
use crate::error::{Error, Result};
use crate::table::Table;

pub const CMDP_FORMAT_TAG: &str = "spdice-cmdp-v1";

/// Formats a real with 17 significant digits (`inf`/`-inf`/`NaN` as-is).
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub(crate) fn parse_real(token: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("not a real number: {token:?}")))
}

fn join(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_real(*v));
    }
    out
}

pub fn write_cmdp(cmdp: &TabularCmdp) -> String {
    use crate::cmdp::Dynamics;
    let mut out = String::new();
    out.push_str("# tabular constrained MDP\n");
    let _ = writeln!(out, "format = {CMDP_FORMAT_TAG}");
    let _ = writeln!(out, "n_states = {}", cmdp.n_states());
    let _ = writeln!(out, "n_actions = {}", cmdp.n_actions());
    let _ = writeln!(out, "gamma = {}", fmt_real(cmdp.gamma()));
    let _ = writeln!(out, "cost_threshold = {}", fmt_real(cmdp.cost_threshold()));
    let _ = writeln!(out, "p0 = {}", join(cmdp.p0()));
    let _ = writeln!(out, "reward = {}", join(cmdp.reward().as_slice()));
    let _ = writeln!(out, "cost = {}", join(cmdp.cost().as_slice()));
    let _ = writeln!(out, "transition = {}", join(cmdp.transition()));
    out
}

pub fn read_cmdp(text: &str) -> Result<TabularCmdp> {
    let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, "expected `key = value`"))?;
        let key = key.trim();
        if fields.insert(key, (i + 1, value.trim())).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate key {key:?}")));
        }
    }
    let last_line = text.lines().count();
    let get = |key: &str| -> Result<(usize, &str)> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(last_line, format!("missing key {key:?}")))
    };
    if let Some(&(line, tag)) = fields.get("format") {
        if tag != CMDP_FORMAT_TAG {
            return Err(Error::parse(line, format!("unknown format tag {tag:?}")));
        }
    }
    let int = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| Error::parse(line, format!("{key} must be a non-negative integer")))
    };
    let real = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        parse_real(v, line)
    };
    let array = |key: &str, expected: usize| -> Result<Vec<f64>> {
        let (line, v) = get(key)?;
        let values = v
            .split_whitespace()
            .map(|t| parse_real(t, line))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != expected {
            return Err(Error::parse(
                line,
                format!("{key} has {} values, expected {expected}", values.len()),
            ));
        }
        Ok(values)
    };

    let ns = int("n_states")?;
    let na = int("n_actions")?;
    let gamma = real("gamma")?;
    let threshold = real("cost_threshold")?;
    let p0 = array("p0", ns)?;
    let reward = Table::from_vec(ns, na, array("reward", ns * na)?)?;
    let cost = Table::from_vec(ns, na, array("cost", ns * na)?)?;
    let transition = array("transition", ns * na * ns)?;
    TabularCmdp::new(ns, na, transition, reward, cost, p0, gamma, threshold)
}
