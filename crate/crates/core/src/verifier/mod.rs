//! Numerical verification of the catalog: sample scenarios, evaluate the
//! PDE residual of the claimed solution, cross-check derivatives against
//! finite differences, and issue verdicts.

mod check;
mod report;
mod scenario;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use check::{Compiled, CrossCheck, Residual, FD_STEP, FD_STEP_HIGH};
pub use report::{BranchReport, EngineInfo, ScenarioStats, TermValue, Verdict, VerificationReport, WorstPoint};
pub use scenario::{
    grid, mix, sample_scenario, sample_scenario_with, solution_value, SampleOptions, Scenario, DEFAULT_DOMAIN,
    MARGIN, MAX_ATTEMPTS,
};

use crate::catalog::PdeFamily;
use crate::error::EvalError;
use crate::numeric::{Evaluator, NumericConfig};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_XCHECK_TOL: f64 = 1e-4;
/// Relative residuals below this are not distinguishable from rounding and
/// quadrature error, so they never produce a FAIL.
pub const NUMERIC_FLOOR: f64 = 1e-8;
/// Domain-error retries allowed per requested point.
const RESAMPLE_FACTOR: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub n_scenarios: usize,
    pub n_points: usize,
    /// `None` uses the family's own default.
    pub tol_rel: Option<f64>,
    pub xcheck_tol: f64,
    /// Points per scenario that also get the finite-difference check.
    pub xcheck_points: usize,
    pub seed: u64,
    pub overrides: BTreeMap<String, f64>,
    pub domain_scale: f64,
    /// Added to every base point of the sampled scenarios.
    pub base_shift: f64,
    /// Probe the second real RootOf branch when the solution has one.
    pub probe_branches: bool,
    pub numeric: NumericConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_scenarios: 5,
            n_points: 20,
            tol_rel: None,
            xcheck_tol: DEFAULT_XCHECK_TOL,
            xcheck_points: 4,
            seed: 0,
            overrides: BTreeMap::new(),
            domain_scale: 1.0,
            base_shift: 0.0,
            probe_branches: true,
            numeric: NumericConfig::default(),
        }
    }
}

impl VerifyConfig {
    pub fn tol_for(&self, fam: &PdeFamily) -> f64 {
        self.tol_rel.or(fam.hints.tol).unwrap_or(DEFAULT_TOL)
    }

    fn sample_options(&self) -> SampleOptions {
        SampleOptions {
            n_points: self.n_points,
            overrides: self.overrides.clone(),
            domain_scale: self.domain_scale,
            base_shift: self.base_shift,
        }
    }
}

/// Configuration for the finite-difference evaluations: quadrature noise
/// is amplified by `h^-k`, so integrals are resolved more tightly.
fn fd_config(cfg: &NumericConfig) -> NumericConfig {
    NumericConfig {
        quad_rel_tol: cfg.quad_rel_tol.min(1e-13),
        quad_abs_tol: cfg.quad_abs_tol.min(1e-15),
        ..cfg.clone()
    }
}

/// Residual of the claimed solution at `point`: `(abs, rel)`.
pub fn residual_at(fam: &PdeFamily, scenario: &Scenario, point: &[f64]) -> Result<(f64, f64), EvalError> {
    let c = Compiled::new(fam, scenario)?;
    let mut ev = c.evaluator(&NumericConfig::default());
    let r = c.residual(&mut ev, point)?;
    Ok((r.abs, r.rel))
}

/// Residual with every partial of the unknown taken from finite
/// differences instead of jets.
pub fn residual_fd_at(fam: &PdeFamily, scenario: &Scenario, point: &[f64]) -> Result<(f64, f64), EvalError> {
    let c = Compiled::new(fam, scenario)?;
    let mut ev = c.evaluator(&fd_config(&NumericConfig::default()));
    let partials = c.fd_partials(&mut ev, point)?;
    let r = c.residual_from(&mut ev, point, &partials)?;
    Ok((r.abs, r.rel))
}

/// Largest relative deviation between jet and finite-difference partials
/// over the PDE's derivative set.
pub fn crosscheck_derivatives(fam: &PdeFamily, scenario: &Scenario, point: &[f64]) -> Result<f64, EvalError> {
    let c = Compiled::new(fam, scenario)?;
    let cfg = NumericConfig::default();
    let mut ev = c.evaluator(&cfg);
    let mut fd = c.evaluator(&fd_config(&cfg));
    Ok(c.crosscheck(&mut ev, &mut fd, point)?.max_dev)
}

struct PointRecord {
    point: Vec<f64>,
    res: Residual,
}

struct ScenarioOutcome {
    stats: ScenarioStats,
    worst: Option<PointRecord>,
    root_residual: f64,
    branch: Option<BranchReport>,
}

fn run_points(
    c: &Compiled,
    ev: &mut Evaluator,
    fd: Option<&mut Evaluator>,
    scenario: &Scenario,
    cfg: &VerifyConfig,
    stats: &mut ScenarioStats,
) -> Option<PointRecord> {
    let mut worst: Option<PointRecord> = None;
    let mut fd = fd;
    let mut taken = 0;
    let mut extra = 0;
    let mut queue: std::collections::VecDeque<Vec<f64>> = scenario.points.iter().cloned().collect();
    let mut xchecked = 0;
    while taken < cfg.n_points {
        let point = match queue.pop_front() {
            Some(p) => p,
            None => {
                if extra >= cfg.n_points * RESAMPLE_FACTOR {
                    break;
                }
                extra += 1;
                scenario.resample_point(extra)
            }
        };
        match c.residual(ev, &point) {
            Ok(res) => {
                taken += 1;
                stats.points += 1;
                stats.max_rel_residual = stats.max_rel_residual.max(res.rel);
                stats.max_abs_residual = stats.max_abs_residual.max(res.abs);
                if xchecked < cfg.xcheck_points {
                    if let Some(fd) = fd.as_deref_mut() {
                        match c.crosscheck(ev, fd, &point) {
                            Ok(x) => {
                                xchecked += 1;
                                let m = stats.xcheck_max_dev.unwrap_or(0.0);
                                stats.xcheck_max_dev = Some(m.max(x.max_dev));
                            }
                            Err(e) if e.is_domain() => {}
                            Err(e) => stats.messages.push(format!("cross-check at {point:?}: {e}")),
                        }
                    }
                }
                if worst.as_ref().map_or(true, |w| res.rel > w.res.rel) {
                    worst = Some(PointRecord { point, res });
                }
            }
            Err(e) if e.is_domain() => stats.resampled += 1,
            Err(e) => {
                taken += 1;
                stats.indeterminate += 1;
                if stats.messages.len() < 4 {
                    stats.messages.push(format!("{point:?}: {e}"));
                }
            }
        }
    }
    if taken < cfg.n_points {
        stats
            .messages
            .push(format!("only {taken} of {} points evaluable", cfg.n_points));
        stats.indeterminate += cfg.n_points - taken;
    }
    worst
}

fn run_scenario(fam: &PdeFamily, index: usize, cfg: &VerifyConfig) -> ScenarioOutcome {
    let seed = mix(cfg.seed, index as u64);
    let mut stats = ScenarioStats::new(index, seed);
    let scenario = match sample_scenario_with(fam, seed, &cfg.sample_options()) {
        Ok(s) => s,
        Err(e) => {
            stats.status = "sampling_exhausted".into();
            stats.messages.push(e.to_string());
            stats.indeterminate = cfg.n_points;
            return ScenarioOutcome {
                stats,
                worst: None,
                root_residual: 0.0,
                branch: None,
            };
        }
    };
    stats.attempts = scenario.attempts;
    stats.params = scenario.params.clone();
    let c = match Compiled::new(fam, &scenario) {
        Ok(c) => c,
        Err(e) => {
            stats.status = "compile_error".into();
            stats.messages.push(e.to_string());
            stats.indeterminate = cfg.n_points;
            return ScenarioOutcome {
                stats,
                worst: None,
                root_residual: 0.0,
                branch: None,
            };
        }
    };
    let mut ev = c.evaluator(&cfg.numeric);
    let mut fd = c.evaluator(&fd_config(&cfg.numeric));
    let worst = run_points(&c, &mut ev, Some(&mut fd), &scenario, cfg, &mut stats);
    let root_residual = ev.stats.max_root_residual.max(fd.stats.max_root_residual);
    stats.root_solves = ev.stats.root_solves + fd.stats.root_solves;

    let branch = if cfg.probe_branches && fam.solution.contains_root_of() {
        let mut alt = c.evaluator(&cfg.numeric);
        alt.branch = 1;
        let mut bstats = ScenarioStats::new(index, seed);
        run_points(&c, &mut alt, None, &scenario, cfg, &mut bstats);
        Some(BranchReport::from_stats(1, &bstats, cfg.tol_for(fam)))
    } else {
        None
    };
    ScenarioOutcome {
        stats,
        worst,
        root_residual,
        branch,
    }
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var("PDEGENSOL_THREADS").ok()?.parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

/// Run `cfg.n_scenarios` scenarios in parallel and aggregate a verdict.
pub fn verify_family(fam: &PdeFamily, cfg: &VerifyConfig) -> VerificationReport {
    let run = || -> Vec<ScenarioOutcome> {
        (0..cfg.n_scenarios)
            .into_par_iter()
            .map(|i| run_scenario(fam, i, cfg))
            .collect()
    };
    let outcomes = match thread_pool() {
        Some(pool) => pool.install(run),
        None => run(),
    };
    aggregate(fam, cfg, outcomes)
}

fn aggregate(fam: &PdeFamily, cfg: &VerifyConfig, outcomes: Vec<ScenarioOutcome>) -> VerificationReport {
    let tol = cfg.tol_for(fam);
    let mut max_rel = 0.0f64;
    let mut xdev: Option<f64> = None;
    let mut resampled = 0;
    let mut indeterminate = 0;
    let mut root_residual = 0.0f64;
    let mut worst: Option<(usize, PointRecord)> = None;
    let mut scenarios = Vec::new();
    let mut branch_stats: Vec<BranchReport> = Vec::new();
    for o in outcomes {
        max_rel = max_rel.max(o.stats.max_rel_residual);
        if let Some(d) = o.stats.xcheck_max_dev {
            xdev = Some(xdev.unwrap_or(0.0).max(d));
        }
        resampled += o.stats.resampled;
        indeterminate += o.stats.indeterminate;
        root_residual = root_residual.max(o.root_residual);
        if let Some(w) = o.worst {
            if worst.as_ref().map_or(true, |(_, b)| w.res.rel > b.res.rel) {
                worst = Some((o.stats.index, w));
            }
        }
        if let Some(b) = o.branch {
            branch_stats.push(b);
        }
        scenarios.push(o.stats);
    }
    let xcheck_ok = xdev.map_or(false, |d| d <= cfg.xcheck_tol);
    let verdict = if !xcheck_ok {
        Verdict::Indeterminate
    } else if max_rel > tol {
        if max_rel > NUMERIC_FLOOR {
            Verdict::Fail
        } else {
            Verdict::Indeterminate
        }
    } else if indeterminate > 0 {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    let worst = worst.map(|(scenario, w)| WorstPoint {
        scenario,
        point: w.point,
        abs: w.res.abs,
        rel: w.res.rel,
        scale: w.res.scale,
        terms: fam
            .pde_lhs
            .additive_terms()
            .iter()
            .zip(&w.res.terms)
            .map(|(t, v)| TermValue {
                term: t.to_string(),
                value: *v,
            })
            .collect(),
    });
    let mut branches = Vec::new();
    if fam.solution.contains_root_of() && cfg.probe_branches {
        branches.push(BranchReport {
            branch: 0,
            points: scenarios.iter().map(|s| s.points).sum(),
            max_rel_residual: Some(max_rel),
            verdict,
            note: None,
        });
        branches.push(BranchReport::merge(1, &branch_stats, tol));
    }
    VerificationReport {
        family: fam.id.clone(),
        verdict,
        max_rel_residual: max_rel,
        xcheck_max_dev: xdev,
        scenarios,
        resampled_points: resampled,
        indeterminate_points: indeterminate,
        max_root_residual: root_residual,
        worst,
        branches,
        engine: EngineInfo {
            tol_rel: tol,
            xcheck_tol: cfg.xcheck_tol,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    }
}

/// Verdicts with the configured base points and with every base point
/// moved by `shift`. `None` when the solution has no base-point integral.
/// Arbitrary functions absorb a change of base point, so the two should
/// agree.
pub fn base_point_invariance(fam: &PdeFamily, cfg: &VerifyConfig, shift: f64) -> Option<(Verdict, Verdict)> {
    if fam.solution.base_point_keys().is_empty() {
        return None;
    }
    let moved = VerifyConfig {
        base_shift: cfg.base_shift + shift,
        ..cfg.clone()
    };
    Some((verify_family(fam, cfg).verdict, verify_family(fam, &moved).verdict))
}
