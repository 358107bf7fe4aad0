//! Sampling hints attached to a catalog record.

use std::collections::BTreeMap;

use crate::error::ParseError;
use crate::expr::{parse, Env, Expr};

/// `expr > min` on every pre-scan point.
#[derive(Debug, Clone)]
pub struct Requirement {
    pub text: String,
    pub expr: Expr,
    pub min: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Hints {
    pub param_ranges: BTreeMap<String, (f64, f64)>,
    pub offsets: BTreeMap<String, (f64, f64)>,
    pub scales: BTreeMap<String, f64>,
    pub base_points: BTreeMap<String, f64>,
    pub domain: BTreeMap<String, (f64, f64)>,
    pub requires: Vec<Requirement>,
    pub tol: Option<f64>,
}

pub(crate) enum HintError {
    Parse(ParseError),
    Format(String),
}

fn number(s: &str) -> Result<f64, HintError> {
    s.trim()
        .parse()
        .map_err(|_| HintError::Format(format!("expected a number, got {s:?}")))
}

fn range(s: &str) -> Result<(f64, f64), HintError> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| HintError::Format(format!("expected [lo, hi], got {s:?}")))?;
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| HintError::Format(format!("expected [lo, hi], got {s:?}")))?;
    let (lo, hi) = (number(lo)?, number(hi)?);
    if lo > hi {
        return Err(HintError::Format(format!("empty range {s:?}")));
    }
    Ok((lo, hi))
}

impl Hints {
    pub(crate) fn parse(text: &str, env: &Env) -> Result<Hints, HintError> {
        let mut h = Hints::default();
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(rest) = item.strip_prefix("require ") {
                let (e, v) = rest
                    .rsplit_once(" > ")
                    .ok_or_else(|| HintError::Format(format!("require needs `> value`: {item:?}")))?;
                h.requires.push(Requirement {
                    text: e.trim().to_string(),
                    expr: parse(e, env).map_err(HintError::Parse)?,
                    min: number(v)?,
                });
                continue;
            }
            let mut words = item.splitn(3, ' ');
            let first = words.next().unwrap_or("");
            let second = words.next().unwrap_or("");
            let rest = words.next().unwrap_or("");
            match (first, second) {
                ("tol", v) => h.tol = Some(number(v)?),
                ("base", k) => {
                    h.base_points.insert(k.to_string(), number(rest)?);
                }
                ("domain", v) => {
                    h.domain.insert(v.to_string(), range(rest)?);
                }
                (f, "offset") => {
                    h.offsets.insert(f.to_string(), range(rest)?);
                }
                (f, "scale") => {
                    h.scales.insert(f.to_string(), number(rest)?);
                }
                (p, "in") => {
                    h.param_ranges.insert(p.to_string(), range(rest)?);
                }
                _ => return Err(HintError::Format(format!("unrecognised hint {item:?}"))),
            }
        }
        Ok(h)
    }
}
