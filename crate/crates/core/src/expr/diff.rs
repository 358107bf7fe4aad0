//! Symbolic partial differentiation.
//!
//! Integrals are differentiated with the Leibniz rule and RootOf nodes with
//! the implicit function theorem. Calls of arbitrary and let-bound functions
//! use the chain rule on the function's derivative multi-index.

use super::subst::substitute_free;
use super::{Expr, Limit, Name, Node, UnaryFn};

/// Exact partial derivative of `e` with respect to the free variable `v`.
///
/// The result is not simplified beyond dropping literal zeros and ones.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    d(e, v)
}

/// Differentiate in each variable of `vars` in turn, simplifying between
/// steps.
pub fn differentiate_multi(e: &Expr, vars: &[&str]) -> Expr {
    let mut out = e.clone();
    for v in vars {
        out = super::simplify(&d(&out, v));
    }
    out
}

fn d(e: &Expr, v: &str) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) | Node::Param(_) => Expr::zero(),
        Node::Var(n) => {
            if &**n == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Func { name, derivs, args } => {
            let mut terms = Vec::new();
            for (i, a) in args.iter().enumerate() {
                let da = d(a, v);
                if da.is_const(0.0) {
                    continue;
                }
                let mut nd = derivs.clone();
                nd[i] += 1;
                let f = Expr::new(Node::Func {
                    name: name.clone(),
                    derivs: nd,
                    args: args.clone(),
                });
                terms.push(Expr::product(vec![f, da]));
            }
            Expr::sum(terms)
        }
        Node::Neg(a) => {
            let da = d(a, v);
            if da.is_const(0.0) {
                da
            } else {
                da.negated()
            }
        }
        Node::Add(ts) => Expr::sum(ts.iter().map(|t| d(t, v)).collect()),
        Node::Mul(fs) => {
            let mut terms = Vec::new();
            for i in 0..fs.len() {
                let di = d(&fs[i], v);
                if di.is_const(0.0) {
                    continue;
                }
                let mut factors = fs.clone();
                factors[i] = di;
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Div(n, den) => {
            let dn = d(n, v);
            let dd = d(den, v);
            if dd.is_const(0.0) {
                return Expr::quotient(dn, den.clone());
            }
            // (n' q - n q') / q^2
            let num = Expr::sum(vec![
                Expr::product(vec![dn, den.clone()]),
                Expr::product(vec![n.clone(), dd]).negated(),
            ]);
            Expr::quotient(num, Expr::pow(den.clone(), Expr::constant(2.0)))
        }
        Node::Pow(b, x) => {
            let db = d(b, v);
            let dx = d(x, v);
            if dx.is_const(0.0) {
                // x * b^(x-1) * b'
                let reduced = match x.as_const() {
                    Some(c) => Expr::constant(c - 1.0),
                    None => Expr::sum(vec![x.clone(), Expr::constant(-1.0)]),
                };
                return Expr::product(vec![x.clone(), Expr::pow(b.clone(), reduced), db]);
            }
            // b^x * (x' ln b + x b'/b)
            let ln_b = Expr::ln(b.clone());
            let inner = Expr::sum(vec![
                Expr::product(vec![dx, ln_b]),
                Expr::product(vec![x.clone(), Expr::quotient(db, b.clone())]),
            ]);
            Expr::product(vec![e.clone(), inner])
        }
        Node::Unary(u, a) => {
            let da = d(a, v);
            if da.is_const(0.0) {
                return da;
            }
            let outer = match u {
                UnaryFn::Exp => e.clone(),
                UnaryFn::Ln => Expr::quotient(Expr::one(), a.clone()),
                UnaryFn::Sqrt => Expr::quotient(
                    Expr::one(),
                    Expr::product(vec![Expr::constant(2.0), e.clone()]),
                ),
                UnaryFn::Sin => Expr::unary(UnaryFn::Cos, a.clone()),
                UnaryFn::Cos => Expr::unary(UnaryFn::Sin, a.clone()).negated(),
                UnaryFn::Tan => Expr::sum(vec![
                    Expr::one(),
                    Expr::pow(e.clone(), Expr::constant(2.0)),
                ]),
            };
            Expr::product(vec![outer, da])
        }
        Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        } => {
            let mut terms = Vec::new();
            let du = d(upper, v);
            if !du.is_const(0.0) {
                terms.push(Expr::product(vec![at(integrand, dummy, upper), du]));
            }
            if let Limit::At(l) = lower {
                let dl = d(l, v);
                if !dl.is_const(0.0) {
                    terms.push(Expr::product(vec![at(integrand, dummy, l), dl]).negated());
                }
            }
            if &**dummy != v {
                let dg = d(integrand, v);
                if !dg.is_const(0.0) {
                    terms.push(Expr::new(Node::Integral {
                        dummy: dummy.clone(),
                        integrand: dg,
                        lower: lower.clone(),
                        upper: upper.clone(),
                    }));
                }
            }
            Expr::sum(terms)
        }
        Node::RootOf {
            dummy, defining, ..
        } => {
            if &**dummy == v {
                return Expr::zero();
            }
            // z' = -Phi_v / Phi_Z, evaluated at Z = the root itself.
            let phi_v = d(defining, v);
            if phi_v.is_const(0.0) {
                return Expr::zero();
            }
            let phi_z = d(defining, dummy);
            let num = at(&phi_v, dummy, e);
            let den = at(&phi_z, dummy, e);
            Expr::quotient(num, den).negated()
        }
        Node::Let {
            name,
            params,
            bound,
            body,
        } => {
            let db = d(body, v);
            if db.is_const(0.0) {
                return db;
            }
            Expr::new(Node::Let {
                name: name.clone(),
                params: params.clone(),
                bound: bound.clone(),
                body: db,
            })
        }
    }
}

/// `g` with the bound name `dummy` replaced by `value`.
fn at(g: &Expr, dummy: &Name, value: &Expr) -> Expr {
    substitute_free(g, dummy, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, simplify, Env};

    fn env() -> Env {
        Env::new()
            .vars(&["t", "x"])
            .params(&["a", "b", "c"])
            .func("F", 1)
            .func("G", 1)
    }

    #[test]
    fn power_rule() {
        let e = parse("x^2", &env()).unwrap();
        let de = simplify(&differentiate(&e, "x"));
        assert_eq!(de, parse("2*x", &env()).unwrap());
    }

    #[test]
    fn fundamental_theorem() {
        let e = parse("int(xi, base, x, G(xi))", &env()).unwrap();
        let de = simplify(&differentiate(&e, "x"));
        assert_eq!(de, parse("G(x)", &env()).unwrap());
    }

    #[test]
    fn leibniz_keeps_parameter_dependence_under_integral() {
        let e = parse("int(xi, base, x, exp(t*xi))", &env()).unwrap();
        let de = simplify(&differentiate(&e, "t"));
        assert_eq!(de, parse("int(xi, base(x), x, exp(t*xi)*xi)", &env()).unwrap());
    }

    #[test]
    fn root_of_uses_implicit_derivative() {
        let e = parse("rootof(Z, Z^2 - x)", &env()).unwrap();
        let de = simplify(&differentiate(&e, "x"));
        // -(-1)/(2*R) after simplification
        let printed = de.to_string();
        assert!(printed.contains("rootof(Z, Z^2 - x)"), "{printed}");
        assert!(!de.depends_on("Z"));
    }

    #[test]
    fn chain_rule_on_arbitrary_function() {
        let e = parse("F(x^2)", &env()).unwrap();
        let de = simplify(&differentiate(&e, "x"));
        assert_eq!(de, parse("2*D(F, 1)(x^2)*x", &env()).unwrap());
    }

    #[test]
    fn independent_expression_has_zero_derivative() {
        let e = parse("a*exp(t)", &env()).unwrap();
        assert!(differentiate(&e, "x").is_const(0.0));
    }
}
