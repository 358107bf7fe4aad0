//! Residual and derivative cross-check at a point, for one scenario.

use std::collections::HashMap;

use crate::catalog::{PdeFamily, UNKNOWN};
use crate::error::EvalError;
use crate::expr::Expr;
use crate::numeric::{Evaluator, IndexSet, MultiIndex, NumericConfig, Program};

use super::scenario::Scenario;

/// Relative step of the finite-difference stencils (times the box width)
/// for partials up to second order. Third and higher partials, where
/// rounding dominates the small-step error, use `FD_STEP_HIGH`.
pub const FD_STEP: f64 = 0.005;
pub const FD_STEP_HIGH: f64 = 0.02;

/// Residual of the PDE at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub abs: f64,
    /// Largest additive term magnitude.
    pub scale: f64,
    pub rel: f64,
    pub terms: Vec<f64>,
}

/// Jet and finite-difference partials of the solution at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub max_dev: f64,
    pub partials: Vec<(MultiIndex, f64, f64)>,
}

/// A family compiled against one scenario's bindings. Entry 0 is the
/// solution; entries `1..` are the additive terms of the PDE.
pub struct Compiled<'f> {
    pub fam: &'f PdeFamily,
    pub prog: Program,
    pub terms: Vec<Expr>,
    /// Partials of the solution needed by the PDE (value included).
    pub set: IndexSet,
    pub steps: Vec<f64>,
}

impl<'f> Compiled<'f> {
    pub fn new(fam: &'f PdeFamily, scenario: &Scenario) -> Result<Self, EvalError> {
        let terms = fam.pde_lhs.additive_terms();
        let mut exprs: Vec<&Expr> = vec![&fam.solution];
        exprs.extend(terms.iter());
        let bind = scenario.bindings();
        let prog = Program::compile(&exprs, &fam.var_refs(), &bind, Some(UNKNOWN))?;
        let mut gens = fam.derivative_set.clone();
        gens.push(MultiIndex::zero());
        gens.extend(prog.externals().iter().copied());
        let set = IndexSet::closure(fam.vars.len(), &gens);
        let steps = scenario.domain.iter().map(|&(lo, hi)| FD_STEP * (hi - lo) / 4.0).collect();
        Ok(Compiled {
            fam,
            prog,
            terms,
            set,
            steps,
        })
    }

    pub fn evaluator(&self, cfg: &NumericConfig) -> Evaluator<'_> {
        Evaluator::new(&self.prog, cfg.clone())
    }

    /// Partials of the solution at `point` from the jet engine, indexed
    /// like `self.set`.
    pub fn jet_partials(&self, ev: &mut Evaluator, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let j = ev.eval(0, point, &self.set)?;
        Ok(self.set.indices().iter().map(|m| j.partial(&self.set, m)).collect())
    }

    /// Evaluate the PDE terms with the unknown's partials taken from
    /// `partials` (indexed like `self.set`).
    pub fn residual_from(&self, ev: &mut Evaluator, point: &[f64], partials: &[f64]) -> Result<Residual, EvalError> {
        let ext: Vec<f64> = self
            .prog
            .externals()
            .iter()
            .map(|m| {
                self.set
                    .position(m)
                    .map(|i| partials[i])
                    .ok_or_else(|| EvalError::Invalid(format!("partial {m:?} not carried")))
            })
            .collect::<Result<_, _>>()?;
        ev.set_externals(&ext);
        let mut terms = Vec::with_capacity(self.terms.len());
        for k in 0..self.terms.len() {
            terms.push(ev.value(1 + k, point)?);
        }
        let sum: f64 = terms.iter().sum();
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let abs = sum.abs();
        Ok(Residual {
            abs,
            scale,
            rel: abs / scale.max(1e-12),
            terms,
        })
    }

    pub fn residual(&self, ev: &mut Evaluator, point: &[f64]) -> Result<Residual, EvalError> {
        let partials = self.jet_partials(ev, point)?;
        self.residual_from(ev, point, &partials)
    }

    /// Partials in `self.set` by central differences at steps h, h/2 and
    /// h/4, combined by two Richardson levels (error O(h⁶)). `self.steps`
    /// holds h/4 for the low-order partials.
    pub fn fd_partials(&self, ev: &mut Evaluator, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        // Values keyed by offsets in units of `self.steps`.
        let mut cache: HashMap<Vec<i32>, f64> = HashMap::new();
        let mut out = Vec::with_capacity(self.set.len());
        for m in self.set.indices() {
            if m.degree() == 0 {
                out.push(self.stencil(ev, point, m, 1, &mut cache)?);
                continue;
            }
            let k = if m.degree() >= 3 { (FD_STEP_HIGH / FD_STEP) as i32 } else { 1 };
            let d1 = self.stencil(ev, point, m, 4 * k, &mut cache)?;
            let d2 = self.stencil(ev, point, m, 2 * k, &mut cache)?;
            let d3 = self.stencil(ev, point, m, k, &mut cache)?;
            let r1 = (4.0 * d2 - d1) / 3.0;
            let r2 = (4.0 * d3 - d2) / 3.0;
            out.push((16.0 * r2 - r1) / 15.0);
        }
        Ok(out)
    }

    fn stencil(
        &self,
        ev: &mut Evaluator,
        point: &[f64],
        m: &MultiIndex,
        units: i32,
        cache: &mut HashMap<Vec<i32>, f64>,
    ) -> Result<f64, EvalError> {
        let n = point.len();
        // Tensor product of one-dimensional central stencils.
        let mut combos: Vec<(Vec<i32>, f64)> = vec![(vec![0; n], 1.0)];
        for (i, &k) in m.0.iter().take(n).enumerate() {
            let h = self.steps[i] * units as f64;
            let s1 = central(k);
            let mut next = Vec::new();
            for (off, w) in &combos {
                for &(o, c) in s1 {
                    let mut off = off.clone();
                    off[i] = o * units;
                    next.push((off, w * c / h.powi(k as i32)));
                }
            }
            combos = next;
        }
        let mut acc = 0.0;
        for (off, w) in combos {
            let v = match cache.get(&off) {
                Some(v) => *v,
                None => {
                    let q: Vec<f64> = point
                        .iter()
                        .zip(&off)
                        .zip(&self.steps)
                        .map(|((p, &o), s)| p + o as f64 * s)
                        .collect();
                    let v = ev.value(0, &q)?;
                    cache.insert(off.clone(), v);
                    v
                }
            };
            acc += w * v;
        }
        Ok(acc)
    }

    /// Compare jet partials over the PDE's derivative set with finite
    /// differences. The deviation of each partial is relative to the larger
    /// of the two values, floored at 10⁻³ of the largest partial.
    pub fn crosscheck(&self, ev: &mut Evaluator, fd_ev: &mut Evaluator, point: &[f64]) -> Result<CrossCheck, EvalError> {
        let jet = self.jet_partials(ev, point)?;
        let fd = self.fd_partials(fd_ev, point)?;
        let big = jet.iter().chain(&fd).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut max_dev = 0.0f64;
        let mut partials = Vec::new();
        for (i, m) in self.set.indices().iter().enumerate() {
            let (j, f) = (jet[i], fd[i]);
            let denom = j.abs().max(f.abs()).max(1e-3 * big).max(1e-12);
            let dev = (j - f).abs() / denom;
            if self.fam.derivative_set.contains(m) {
                max_dev = max_dev.max(dev);
            }
            partials.push((*m, j, f));
        }
        Ok(CrossCheck { max_dev, partials })
    }
}

/// Offsets and weights of the central difference for a `k`-th derivative
/// (step 1).
fn central(k: u8) -> &'static [(i32, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
    }
}
