//! Scenario sampling: concrete parameters, function stand-ins, base points
//! and evaluation points for one family.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{FunctionSpec, PdeFamily};
use crate::error::{EvalError, SamplingError};
use crate::expr::Expr;
use crate::numeric::{Bindings, Evaluator, FunctionInstance, Guard, Monomial, NumericConfig, Program, Sinusoid};

pub const DEFAULT_DOMAIN: (f64, f64) = (0.2, 1.2);
/// Fraction of each domain side kept clear of evaluation points.
pub const MARGIN: f64 = 0.05;
pub const MAX_ATTEMPTS: usize = 50;

const DEFAULT_OFFSET: (f64, f64) = (0.5, 1.5);
const PARAM_MAGNITUDE: (f64, f64) = (0.3, 2.0);
/// Smallest admissible |value| of a constant-only constraint expression.
const CONSTANT_NONZERO: f64 = 1e-3;
/// Smallest admissible |value| of a constraint expression that varies over
/// the domain.
const FIELD_NONZERO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub family: String,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub functions: BTreeMap<String, FunctionInstance>,
    pub base_points: BTreeMap<String, f64>,
    /// Per-variable sampling box, in variable order.
    pub domain: Vec<(f64, f64)>,
    pub points: Vec<Vec<f64>>,
    /// Sampling attempts used (1 when the first draw was admissible).
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    pub n_points: usize,
    /// Parameter values pinned instead of sampled.
    pub overrides: BTreeMap<String, f64>,
    /// Multiplies both ends of every domain interval.
    pub domain_scale: f64,
    /// Added to every base point after it is chosen.
    pub base_shift: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            n_points: 20,
            overrides: BTreeMap::new(),
            domain_scale: 1.0,
            base_shift: 0.0,
        }
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Scenario {
    pub fn bindings(&self) -> Bindings {
        Bindings {
            params: self.params.clone(),
            functions: self.functions.clone(),
            base_points: self.base_points.clone(),
        }
    }

    /// The box evaluation points are drawn from.
    pub fn inner_box(&self) -> Vec<(f64, f64)> {
        inner(&self.domain)
    }

    /// Replacement point number `k`, for points that hit a domain error.
    pub fn resample_point(&self, k: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, 0x5eed_0000 + k as u64));
        draw_point(&mut rng, &self.inner_box())
    }
}

fn inner(domain: &[(f64, f64)]) -> Vec<(f64, f64)> {
    domain
        .iter()
        .map(|&(lo, hi)| {
            let m = MARGIN * (hi - lo);
            (lo + m, hi - m)
        })
        .collect()
}

fn draw_point(rng: &mut ChaCha8Rng, b: &[(f64, f64)]) -> Vec<f64> {
    b.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn sample_function(rng: &mut ChaCha8Rng, spec: &FunctionSpec, fam: &PdeFamily) -> FunctionInstance {
    let scale = fam.hints.scales.get(&spec.name).copied().unwrap_or(1.0);
    let offset = uniform(rng, fam.hints.offsets.get(&spec.name).copied().unwrap_or(DEFAULT_OFFSET));
    let mut terms = Vec::new();
    if spec.arity == 1 {
        for d in 1..=3u8 {
            terms.push(Monomial {
                coef: scale * rng.gen_range(-0.5..0.5),
                exps: vec![d],
            });
        }
    } else {
        for i in 0..spec.arity {
            for j in i..spec.arity {
                for deg in [1, 2] {
                    let mut exps = vec![0u8; spec.arity];
                    if deg == 1 {
                        if j != i {
                            continue;
                        }
                        exps[i] = 1;
                    } else {
                        exps[i] += 1;
                        exps[j] += 1;
                    }
                    terms.push(Monomial {
                        coef: scale * rng.gen_range(-0.5..0.5),
                        exps,
                    });
                }
            }
        }
    }
    let sinusoid = if rng.gen_bool(0.5) {
        Some(Sinusoid {
            amplitude: scale * rng.gen_range(-0.2..0.2),
            frequencies: (0..spec.arity).map(|_| rng.gen_range(0.5..2.0)).collect(),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        })
    } else {
        None
    };
    FunctionInstance {
        arity: spec.arity,
        offset,
        terms,
        sinusoid,
    }
}

/// Points covering the inner box: `per_dim` per axis.
pub fn grid(b: &[(f64, f64)], per_dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &(lo, hi) in b {
        let mut next = Vec::new();
        for p in &out {
            for k in 0..per_dim {
                let v = if per_dim == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * k as f64 / (per_dim - 1) as f64
                };
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn scan_grid(b: &[(f64, f64)]) -> Vec<Vec<f64>> {
    if b.len() <= 2 {
        grid(b, 3)
    } else {
        let mut g = grid(b, 2);
        g.push(b.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect());
        g
    }
}

fn check_grid(
    e: &Expr,
    vars: &[&str],
    bind: &Bindings,
    points: &[Vec<f64>],
    guard: Guard,
    mut ok: impl FnMut(f64) -> bool,
) -> Result<(), String> {
    let prog = Program::compile(&[e], vars, bind, None).map_err(|e| e.to_string())?;
    let mut ev = Evaluator::new(&prog, NumericConfig::default());
    ev.guard = guard;
    for p in points {
        match ev.value(0, p) {
            Ok(v) if ok(v) => {}
            Ok(v) => return Err(format!("{e} = {v} at {p:?}")),
            Err(err) => return Err(format!("{e} at {p:?}: {err}")),
        }
    }
    Ok(())
}

/// One draw; `Err` carries the rejection reason.
fn attempt(fam: &PdeFamily, rng: &mut ChaCha8Rng, seed: u64, opts: &SampleOptions) -> Result<Scenario, String> {
    let mut params = BTreeMap::new();
    for p in &fam.params {
        let v = match (opts.overrides.get(p), fam.hints.param_ranges.get(p)) {
            (Some(&v), _) => v,
            (None, Some(&r)) => uniform(rng, r),
            (None, None) => {
                let m = uniform(rng, PARAM_MAGNITUDE);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            }
        };
        params.insert(p.clone(), v);
    }
    let mut functions = BTreeMap::new();
    for f in &fam.functions {
        functions.insert(f.name.clone(), sample_function(rng, f, fam));
    }
    let domain: Vec<(f64, f64)> = fam
        .vars
        .iter()
        .map(|v| {
            let (lo, hi) = fam.hints.domain.get(v).copied().unwrap_or(DEFAULT_DOMAIN);
            (lo * opts.domain_scale, hi * opts.domain_scale)
        })
        .collect();
    let mut base_points = BTreeMap::new();
    for key in fam.solution.base_point_keys() {
        let v = match fam.hints.base_points.get(&key) {
            Some(&v) => v,
            None => fam.vars.iter().position(|v| *v == key).map(|i| domain[i].0).unwrap_or(0.0),
        };
        base_points.insert(key, v + opts.base_shift);
    }
    let bind = Bindings {
        params: params.clone(),
        functions: functions.clone(),
        base_points: base_points.clone(),
    };
    let vars = fam.var_refs();
    let ib = inner(&domain);
    let scan = scan_grid(&ib);
    let fine = if vars.len() <= 2 { grid(&ib, 5) } else { grid(&ib, 3) };

    for c in &fam.constraints {
        if c.expr.free_variables().iter().any(|n| fam.vars.contains(n)) {
            check_grid(&c.expr, &vars, &bind, &fine, Guard::STANDARD, |v| v.abs() >= FIELD_NONZERO)
                .map_err(|m| format!("constraint {} != 0: {m}", c.text))?;
        } else {
            check_grid(&c.expr, &vars, &bind, &scan[..1], Guard::STANDARD, |v| v.abs() >= CONSTANT_NONZERO)
                .map_err(|m| format!("constraint {} != 0: {m}", c.text))?;
        }
    }
    for r in &fam.hints.requires {
        check_grid(&r.expr, &vars, &bind, &fine, Guard::STANDARD, |v| v > r.min)
            .map_err(|m| format!("require {} > {}: {m}", r.text, r.min))?;
    }
    check_grid(&fam.solution, &vars, &bind, &scan, Guard::STRICT, f64::is_finite)
        .map_err(|m| format!("pre-scan: {m}"))?;

    let points = (0..opts.n_points).map(|_| draw_point(rng, &ib)).collect();
    Ok(Scenario {
        family: fam.id.clone(),
        seed,
        params,
        functions,
        base_points,
        domain,
        points,
        attempts: 0,
    })
}

/// A scenario for `fam`, deterministic in `(fam, seed, opts)`.
pub fn sample_scenario_with(fam: &PdeFamily, seed: u64, opts: &SampleOptions) -> Result<Scenario, SamplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, fnv(&fam.id)));
    let mut last = String::new();
    for k in 1..=MAX_ATTEMPTS {
        match attempt(fam, &mut rng, seed, opts) {
            Ok(mut s) => {
                s.attempts = k;
                return Ok(s);
            }
            Err(m) => last = m,
        }
    }
    Err(SamplingError::Exhausted {
        family: fam.id.clone(),
        attempts: MAX_ATTEMPTS,
        last,
    })
}

pub fn sample_scenario(fam: &PdeFamily, seed: u64) -> Result<Scenario, SamplingError> {
    sample_scenario_with(fam, seed, &SampleOptions::default())
}

/// Value of the solution at `point` under `scenario`.
pub fn solution_value(fam: &PdeFamily, scenario: &Scenario, point: &[f64]) -> Result<f64, EvalError> {
    let bind = scenario.bindings();
    let prog = Program::compile(&[&fam.solution], &fam.var_refs(), &bind, None)?;
    let mut ev = Evaluator::new(&prog, NumericConfig::default());
    ev.value(0, point)
}
