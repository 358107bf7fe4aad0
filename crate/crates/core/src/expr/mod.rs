//! Immutable expression trees.
//!
//! An [`Expr`] is a cheaply clonable handle to a shared [`Node`]. Trees are
//! never mutated after construction; every transformation (substitution,
//! differentiation, simplification) builds a new tree and shares untouched
//! subtrees with its input.
//!
//! Besides the usual algebra the tree carries three binding forms:
//!
//! * [`Node::Integral`]: a definite integral whose lower limit is either an
//!   expression or a named *base point* that the numeric layer resolves per
//!   scenario. Indefinite integrals are written as integrals from a base point.
//! * [`Node::RootOf`]: a value defined implicitly as a root of its defining
//!   expression in the bound indeterminate.
//! * [`Node::Let`]: a local function definition `W(p1, .., pn) = bound` that
//!   is visible in `body`. A zero-parameter let is a named constant.

mod diff;
mod parse;
mod print;
mod simplify;
mod subst;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub use diff::{differentiate, differentiate_multi};
pub use parse::{parse, Env};
pub use simplify::simplify;
pub use subst::{substitute, Binding};

/// Identifier used for variables, parameters and functions.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Elementary functions of one argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
}

impl UnaryFn {
    pub fn keyword(self) -> &'static str {
        match self {
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => UnaryFn::Exp,
            "ln" | "log" => UnaryFn::Ln,
            "sqrt" => UnaryFn::Sqrt,
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "tan" => UnaryFn::Tan,
            _ => return None,
        })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryFn::Exp => x.exp(),
            UnaryFn::Ln => x.ln(),
            UnaryFn::Sqrt => x.sqrt(),
            UnaryFn::Sin => x.sin(),
            UnaryFn::Cos => x.cos(),
            UnaryFn::Tan => x.tan(),
        }
    }
}

/// Lower limit of an integral.
#[derive(Debug, Clone, PartialEq)]
pub enum Limit {
    /// Scenario-configured base point, keyed by the integration variable it
    /// stands in for (`x`, `t`, `Z`, ...).
    Base(Name),
    At(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Independent variable or bound dummy.
    Var(Name),
    Param(Name),
    /// Application of a named function. `derivs[i]` is the number of times
    /// the function is differentiated in its `i`-th argument before being
    /// applied; all zeros for a plain application.
    Func {
        name: Name,
        derivs: Vec<u8>,
        args: Vec<Expr>,
    },
    Neg(Expr),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Unary(UnaryFn, Expr),
    Integral {
        dummy: Name,
        integrand: Expr,
        lower: Limit,
        upper: Expr,
    },
    RootOf {
        dummy: Name,
        defining: Expr,
        seed: Option<Expr>,
    },
    Let {
        name: Name,
        params: Vec<Name>,
        bound: Expr,
        body: Expr,
    },
}

/// Shared handle to an immutable expression node. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Identity of the shared node, stable for the lifetime of the handle.
    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(v: f64) -> Self {
        Expr::new(Node::Const(v))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn var(n: &str) -> Self {
        Expr::new(Node::Var(name(n)))
    }

    pub fn param(n: &str) -> Self {
        Expr::new(Node::Param(name(n)))
    }

    pub fn func(n: &str, args: Vec<Expr>) -> Self {
        Expr::new(Node::Func {
            name: name(n),
            derivs: vec![0; args.len()],
            args,
        })
    }

    pub fn unary(f: UnaryFn, e: Expr) -> Self {
        Expr::new(Node::Unary(f, e))
    }

    pub fn exp(e: Expr) -> Self {
        Expr::unary(UnaryFn::Exp, e)
    }

    pub fn ln(e: Expr) -> Self {
        Expr::unary(UnaryFn::Ln, e)
    }

    pub fn sqrt(e: Expr) -> Self {
        Expr::unary(UnaryFn::Sqrt, e)
    }

    pub fn neg(e: Expr) -> Self {
        Expr::new(Node::Neg(e))
    }

    pub fn add(terms: Vec<Expr>) -> Self {
        Expr::new(Node::Add(terms))
    }

    pub fn mul(factors: Vec<Expr>) -> Self {
        Expr::new(Node::Mul(factors))
    }

    pub fn div(n: Expr, d: Expr) -> Self {
        Expr::new(Node::Div(n, d))
    }

    pub fn pow(b: Expr, e: Expr) -> Self {
        Expr::new(Node::Pow(b, e))
    }

    pub fn integral(dummy: &str, integrand: Expr, lower: Limit, upper: Expr) -> Self {
        Expr::new(Node::Integral {
            dummy: name(dummy),
            integrand,
            lower,
            upper,
        })
    }

    pub fn root_of(dummy: &str, defining: Expr, seed: Option<Expr>) -> Self {
        Expr::new(Node::RootOf {
            dummy: name(dummy),
            defining,
            seed,
        })
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(v)
    }

    /// Sum that skips literal zeros; collapses to the single term or `0`.
    pub fn sum(terms: Vec<Expr>) -> Self {
        let mut kept: Vec<Expr> = terms.into_iter().filter(|t| !t.is_const(0.0)).collect();
        match kept.len() {
            0 => Expr::zero(),
            1 => kept.pop().unwrap(),
            _ => Expr::add(kept),
        }
    }

    /// Product that short-circuits on a literal zero and skips literal ones.
    pub fn product(factors: Vec<Expr>) -> Self {
        if factors.iter().any(|f| f.is_const(0.0)) {
            return Expr::zero();
        }
        let mut kept: Vec<Expr> = factors.into_iter().filter(|f| !f.is_const(1.0)).collect();
        match kept.len() {
            0 => Expr::one(),
            1 => kept.pop().unwrap(),
            _ => Expr::mul(kept),
        }
    }

    pub fn negated(self) -> Self {
        match self.node() {
            Node::Const(v) => Expr::constant(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::neg(self),
        }
    }

    pub fn quotient(n: Expr, d: Expr) -> Self {
        if n.is_const(0.0) {
            Expr::zero()
        } else if d.is_const(1.0) {
            n
        } else {
            Expr::div(n, d)
        }
    }

    /// Children in evaluation order (limits and seeds included).
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => vec![],
            Node::Func { args, .. } => args.iter().collect(),
            Node::Neg(e) | Node::Unary(_, e) => vec![e],
            Node::Add(v) | Node::Mul(v) => v.iter().collect(),
            Node::Div(a, b) | Node::Pow(a, b) => vec![a, b],
            Node::Integral {
                integrand,
                lower,
                upper,
                ..
            } => {
                let mut out = vec![integrand];
                if let Limit::At(l) = lower {
                    out.push(l);
                }
                out.push(upper);
                out
            }
            Node::RootOf { defining, seed, .. } => {
                let mut out = vec![defining];
                if let Some(s) = seed {
                    out.push(s);
                }
                out
            }
            Node::Let { bound, body, .. } => vec![bound, body],
        }
    }

    /// Free names of the expression: variables, parameters and applied
    /// function names, excluding anything bound by an enclosing binder.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    /// Whether `v` occurs free.
    pub fn depends_on(&self, v: &str) -> bool {
        occurs_free(self, v)
    }

    /// Number of nodes in the tree (shared subtrees counted per use).
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Maximum static nesting of integral nodes. Calls to let-bound functions
    /// count the nesting of the bound expression at the call site.
    pub fn integral_nesting(&self) -> usize {
        nesting(self, &mut Vec::new())
    }

    /// Whether any RootOf node appears (including inside let bounds).
    pub fn contains_root_of(&self) -> bool {
        matches!(self.node(), Node::RootOf { .. })
            || self.children().iter().any(|c| c.contains_root_of())
    }

    pub fn contains_integral(&self) -> bool {
        matches!(self.node(), Node::Integral { .. })
            || self.children().iter().any(|c| c.contains_integral())
    }

    /// Base-point keys referenced by integrals in the tree.
    pub fn base_point_keys(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            if let Node::Integral {
                lower: Limit::Base(k),
                ..
            } = e.node()
            {
                out.insert(k.to_string());
            }
            for c in e.children() {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Flatten nested sums and products; used when comparing trees modulo
    /// associativity.
    pub fn flattened(&self) -> Expr {
        let rebuilt = self.map_children(|c| c.flattened());
        match rebuilt.node() {
            Node::Add(ts) => {
                let mut out = Vec::new();
                for t in ts {
                    match t.node() {
                        Node::Add(inner) => out.extend(inner.iter().cloned()),
                        _ => out.push(t.clone()),
                    }
                }
                Expr::add(out)
            }
            Node::Mul(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    match f.node() {
                        Node::Mul(inner) => out.extend(inner.iter().cloned()),
                        _ => out.push(f.clone()),
                    }
                }
                Expr::mul(out)
            }
            _ => rebuilt,
        }
    }

    /// Rebuild the node with every child passed through `f`. Binder names are
    /// kept as they are.
    pub fn map_children(&self, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        let node = match self.node() {
            Node::Const(_) | Node::Var(_) | Node::Param(_) => return self.clone(),
            Node::Func { name, derivs, args } => Node::Func {
                name: name.clone(),
                derivs: derivs.clone(),
                args: args.iter().map(&mut f).collect(),
            },
            Node::Neg(e) => Node::Neg(f(e)),
            Node::Unary(u, e) => Node::Unary(*u, f(e)),
            Node::Add(v) => Node::Add(v.iter().map(&mut f).collect()),
            Node::Mul(v) => Node::Mul(v.iter().map(&mut f).collect()),
            Node::Div(a, b) => Node::Div(f(a), f(b)),
            Node::Pow(a, b) => Node::Pow(f(a), f(b)),
            Node::Integral {
                dummy,
                integrand,
                lower,
                upper,
            } => Node::Integral {
                dummy: dummy.clone(),
                integrand: f(integrand),
                lower: match lower {
                    Limit::Base(k) => Limit::Base(k.clone()),
                    Limit::At(l) => Limit::At(f(l)),
                },
                upper: f(upper),
            },
            Node::RootOf {
                dummy,
                defining,
                seed,
            } => Node::RootOf {
                dummy: dummy.clone(),
                defining: f(defining),
                seed: seed.as_ref().map(&mut f),
            },
            Node::Let {
                name,
                params,
                bound,
                body,
            } => Node::Let {
                name: name.clone(),
                params: params.clone(),
                bound: f(bound),
                body: f(body),
            },
        };
        Expr::new(node)
    }

    /// Top-level additive terms: sums are flattened through negation, so
    /// `a - (b + c)` yields `[a, -b, -c]`.
    pub fn additive_terms(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        collect_terms(self, false, &mut out);
        out
    }
}

fn collect_terms(e: &Expr, negate: bool, out: &mut Vec<Expr>) {
    match e.node() {
        Node::Add(ts) => {
            for t in ts {
                collect_terms(t, negate, out);
            }
        }
        Node::Neg(inner) => collect_terms(inner, !negate, out),
        _ => out.push(if negate { Expr::neg(e.clone()) } else { e.clone() }),
    }
}

fn collect_free(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<String>) {
    let is_bound = |n: &Name, bound: &Vec<Name>| bound.iter().any(|b| b == n);
    match e.node() {
        Node::Const(_) => {}
        Node::Var(n) | Node::Param(n) => {
            if !is_bound(n, bound) {
                out.insert(n.to_string());
            }
        }
        Node::Func { name, args, .. } => {
            if !is_bound(name, bound) {
                out.insert(name.to_string());
            }
            for a in args {
                collect_free(a, bound, out);
            }
        }
        Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        } => {
            if let Limit::At(l) = lower {
                collect_free(l, bound, out);
            }
            collect_free(upper, bound, out);
            bound.push(dummy.clone());
            collect_free(integrand, bound, out);
            bound.pop();
        }
        Node::RootOf {
            dummy,
            defining,
            seed,
        } => {
            if let Some(s) = seed {
                collect_free(s, bound, out);
            }
            bound.push(dummy.clone());
            collect_free(defining, bound, out);
            bound.pop();
        }
        Node::Let {
            name,
            params,
            bound: b,
            body,
        } => {
            let n = params.len();
            bound.extend(params.iter().cloned());
            collect_free(b, bound, out);
            bound.truncate(bound.len() - n);
            bound.push(name.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        _ => {
            for c in e.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

fn occurs_free(e: &Expr, v: &str) -> bool {
    match e.node() {
        Node::Const(_) => false,
        Node::Var(n) | Node::Param(n) => &**n == v,
        Node::Func { name, args, .. } => &**name == v || args.iter().any(|a| occurs_free(a, v)),
        Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        } => {
            matches!(lower, Limit::At(l) if occurs_free(l, v))
                || occurs_free(upper, v)
                || (&**dummy != v && occurs_free(integrand, v))
        }
        Node::RootOf {
            dummy,
            defining,
            seed,
        } => {
            seed.as_ref().is_some_and(|s| occurs_free(s, v))
                || (&**dummy != v && occurs_free(defining, v))
        }
        Node::Let {
            name,
            params,
            bound,
            body,
        } => {
            (!params.iter().any(|p| &**p == v) && occurs_free(bound, v))
                || (&**name != v && occurs_free(body, v))
        }
        _ => e.children().iter().any(|c| occurs_free(c, v)),
    }
}

fn nesting(e: &Expr, lets: &mut Vec<(Name, usize)>) -> usize {
    match e.node() {
        Node::Integral {
            integrand,
            lower,
            upper,
            ..
        } => {
            let mut m = 1 + nesting(integrand, lets);
            if let Limit::At(l) = lower {
                m = m.max(nesting(l, lets));
            }
            m.max(nesting(upper, lets))
        }
        Node::Func { name, args, .. } => {
            let own = lets
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, d)| *d)
                .unwrap_or(0);
            args.iter().map(|a| nesting(a, lets)).fold(own, usize::max)
        }
        Node::Let {
            name, bound, body, ..
        } => {
            let d = nesting(bound, lets);
            lets.push((name.clone(), d));
            let m = nesting(body, lets);
            lets.pop();
            m
        }
        _ => e
            .children()
            .iter()
            .map(|c| nesting(c, lets))
            .max()
            .unwrap_or(0),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(self, f)
    }
}
