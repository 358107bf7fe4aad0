use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub index: usize,
    pub seed: u64,
    pub status: String,
    pub attempts: usize,
    pub params: BTreeMap<String, f64>,
    pub points: usize,
    pub max_rel_residual: f64,
    pub max_abs_residual: f64,
    pub xcheck_max_dev: Option<f64>,
    pub resampled: usize,
    pub indeterminate: usize,
    pub root_solves: usize,
    pub messages: Vec<String>,
}

impl ScenarioStats {
    pub fn new(index: usize, seed: u64) -> Self {
        ScenarioStats {
            index,
            seed,
            status: "ok".into(),
            attempts: 0,
            params: BTreeMap::new(),
            points: 0,
            max_rel_residual: 0.0,
            max_abs_residual: 0.0,
            xcheck_max_dev: None,
            resampled: 0,
            indeterminate: 0,
            root_solves: 0,
            messages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub term: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub scenario: usize,
    pub point: Vec<f64>,
    pub abs: f64,
    pub rel: f64,
    pub scale: f64,
    pub terms: Vec<TermValue>,
}

/// Outcome on one RootOf branch. Branch 0 follows the catalog seed; branch
/// 1 takes the next real root the bracket scan meets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: usize,
    pub points: usize,
    pub max_rel_residual: Option<f64>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl BranchReport {
    pub(crate) fn from_stats(branch: usize, s: &ScenarioStats, tol: f64) -> Self {
        BranchReport::merge(
            branch,
            &[BranchReport {
                branch,
                points: s.points,
                max_rel_residual: (s.points > 0).then_some(s.max_rel_residual),
                verdict: Verdict::Indeterminate,
                note: s.messages.first().cloned(),
            }],
            tol,
        )
    }

    pub(crate) fn merge(branch: usize, parts: &[BranchReport], tol: f64) -> Self {
        let points = parts.iter().map(|p| p.points).sum();
        let max_rel = parts
            .iter()
            .filter_map(|p| p.max_rel_residual)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let verdict = match max_rel {
            None => Verdict::Indeterminate,
            Some(r) if r > tol => Verdict::Fail,
            Some(_) => Verdict::Pass,
        };
        let note = if points == 0 {
            Some(
                parts
                    .iter()
                    .find_map(|p| p.note.clone())
                    .unwrap_or_else(|| "no second real root found".into()),
            )
        } else {
            None
        };
        BranchReport {
            branch,
            points,
            max_rel_residual: max_rel,
            verdict,
            note,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub tol_rel: f64,
    pub xcheck_tol: f64,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    pub verdict: Verdict,
    pub max_rel_residual: f64,
    pub xcheck_max_dev: Option<f64>,
    pub scenarios: Vec<ScenarioStats>,
    pub resampled_points: usize,
    pub indeterminate_points: usize,
    /// Largest `|Φ(z)|` accepted by a RootOf solve.
    pub max_root_residual: f64,
    pub worst: Option<WorstPoint>,
    pub branches: Vec<BranchReport>,
    pub engine: EngineInfo,
}
