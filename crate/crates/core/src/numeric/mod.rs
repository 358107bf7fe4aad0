//! Numeric evaluation: jets, quadrature, root finding and the compiled
//! expression evaluator.

mod eval;
pub mod function;
pub mod jet;
pub mod quad;
pub mod root;

use serde::{Deserialize, Serialize};

pub use eval::{Bindings, EvalStats, Evaluator, Guard, Program};
pub use function::{FunctionInstance, FunctionKind, Monomial, Sinusoid};
pub use jet::{IndexSet, Jet, MultiIndex};
pub use quad::integrate;
pub use root::{find_root, Root};

use crate::error::EvalError;
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    pub quad_max_depth: usize,
    pub nest_limit: usize,
    pub root_tol: f64,
    pub root_max_iter: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            quad_rel_tol: 1e-10,
            quad_abs_tol: 1e-12,
            quad_max_depth: 30,
            nest_limit: 5,
            root_tol: 1e-12,
            root_max_iter: 100,
        }
    }
}

/// One-shot evaluation of `e` at `point` (coordinates in `vars` order).
///
/// Compiles on every call; use [`Program`] and [`Evaluator`] for repeated
/// evaluation.
pub fn eval_jet(
    e: &Expr,
    vars: &[&str],
    point: &[f64],
    bind: &Bindings,
    set: &IndexSet,
    cfg: &NumericConfig,
) -> Result<Jet, EvalError> {
    let prog = Program::compile(&[e], vars, bind, None)?;
    let mut ev = Evaluator::new(&prog, cfg.clone());
    ev.eval(0, point, set)
}
