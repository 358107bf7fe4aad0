pub mod catalog;
pub mod error;
pub mod expr;
pub mod numeric;
pub mod verifier;

pub use catalog::{build_residual, get_family, list_families, PdeFamily};
pub use error::{CatalogError, EvalError, ParseError, ParseErrorKind, SamplingError, SubstError};
pub use expr::{differentiate, parse, simplify, substitute, Binding, Env, Expr};
pub use numeric::{eval_jet, Bindings, FunctionInstance, IndexSet, Jet, MultiIndex, NumericConfig};
pub use verifier::{verify_family, Scenario, Verdict, VerificationReport, VerifyConfig};
