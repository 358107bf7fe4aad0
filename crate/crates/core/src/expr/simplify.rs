//! Light algebraic cleanup: constant folding, identities, flattening.
//!
//! No term reordering or collection beyond numeric coefficients; the result
//! is equal in value to the input wherever the input is defined.

use super::{Expr, Node};

pub fn simplify(e: &Expr) -> Expr {
    let e = e.map_children(simplify);
    match e.node() {
        Node::Neg(a) => a.clone().negated(),
        Node::Add(ts) => simplify_sum(ts),
        Node::Mul(fs) => simplify_product(fs),
        Node::Div(n, d) => {
            if n.is_const(0.0) {
                return Expr::zero();
            }
            if d.is_const(1.0) {
                return n.clone();
            }
            if d.is_const(-1.0) {
                return n.clone().negated();
            }
            if let (Some(a), Some(b)) = (n.as_const(), d.as_const()) {
                if b != 0.0 {
                    return Expr::constant(a / b);
                }
            }
            e
        }
        Node::Pow(b, x) => {
            if x.is_const(0.0) || b.is_const(1.0) {
                return Expr::one();
            }
            if x.is_const(1.0) {
                return b.clone();
            }
            if let (Some(bv), Some(xv)) = (b.as_const(), x.as_const()) {
                let r = bv.powf(xv);
                if r.is_finite() {
                    return Expr::constant(r);
                }
            }
            e
        }
        Node::Unary(u, a) => match a.as_const() {
            Some(v) => {
                let r = u.apply(v);
                if r.is_finite() {
                    Expr::constant(r)
                } else {
                    e
                }
            }
            None => e,
        },
        Node::Integral { integrand, .. } if integrand.is_const(0.0) => Expr::zero(),
        Node::Let { name, body, .. } => {
            let used = body.free_variables().contains(&**name);
            if used {
                e
            } else {
                body.clone()
            }
        }
        _ => e,
    }
}

fn simplify_sum(ts: &[Expr]) -> Expr {
    let mut out = Vec::new();
    let mut constant = 0.0;
    let push = |t: &Expr, out: &mut Vec<Expr>, constant: &mut f64| match t.as_const() {
        Some(v) => *constant += v,
        None => out.push(t.clone()),
    };
    for t in ts {
        match t.node() {
            Node::Add(inner) => {
                for i in inner {
                    push(i, &mut out, &mut constant);
                }
            }
            _ => push(t, &mut out, &mut constant),
        }
    }
    if constant != 0.0 {
        out.push(Expr::constant(constant));
    }
    Expr::sum(out)
}

fn simplify_product(fs: &[Expr]) -> Expr {
    let mut out = Vec::new();
    let mut coef = 1.0;
    let absorb = |f: &Expr, out: &mut Vec<Expr>, coef: &mut f64| match f.node() {
        Node::Const(v) => *coef *= v,
        Node::Neg(inner) => {
            *coef = -*coef;
            out.push(inner.clone());
        }
        _ => out.push(f.clone()),
    };
    for f in fs {
        match f.node() {
            Node::Mul(inner) => {
                for i in inner {
                    absorb(i, &mut out, &mut coef);
                }
            }
            _ => absorb(f, &mut out, &mut coef),
        }
    }
    if coef == 0.0 {
        return Expr::zero();
    }
    if out.is_empty() {
        return Expr::constant(coef);
    }
    if coef == -1.0 {
        return Expr::product(out).negated();
    }
    if coef != 1.0 {
        out.insert(0, Expr::constant(coef));
    }
    Expr::product(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Env};

    fn env() -> Env {
        Env::new().vars(&["x"]).params(&["a", "b"])
    }

    fn s(text: &str) -> String {
        simplify(&parse(text, &env()).unwrap()).to_string()
    }

    #[test]
    fn identities() {
        assert_eq!(s("x + 0"), "x");
        assert_eq!(s("1*x*1"), "x");
        assert_eq!(s("0*x + a"), "a");
        assert_eq!(s("x^1"), "x");
        assert_eq!(s("x^0"), "1");
        assert_eq!(s("0^0"), "1");
        assert_eq!(s("--x"), "x");
    }

    #[test]
    fn folds_constants() {
        assert_eq!(s("2*3*x"), "6*x");
        assert_eq!(s("1 + x + 2"), "x + 3");
        assert_eq!(s("exp(0)*a"), "a");
        assert_eq!(s("(-1)*x"), "-x");
        assert_eq!(s("6/3"), "2");
    }

    #[test]
    fn zero_integrand_vanishes() {
        assert_eq!(s("a + int(xi, base(x), x, 0*xi)"), "a");
    }

    #[test]
    fn keeps_undefined_constants_symbolic() {
        assert_eq!(s("ln(-1)"), "ln(-1)");
        assert_eq!(s("1/0"), "1/0");
    }
}
