//! Printer producing text that [`super::parse`] reads back.

use std::fmt::{self, Write};

use super::{Expr, Limit, Node};

const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const SIGNED: u8 = 2;
const POWER: u8 = 3;
const ATOM: u8 = 4;

fn level(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(ts) if ts.len() > 1 => SUM,
        Node::Mul(fs) if fs.len() > 1 => PRODUCT,
        Node::Div(..) => PRODUCT,
        Node::Neg(_) => SIGNED,
        Node::Const(v) if v.is_sign_negative() && *v != 0.0 => SIGNED,
        Node::Pow(..) => POWER,
        _ => ATOM,
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut s = String::new();
    emit(e, SUM, &mut s)?;
    f.write_str(&s)
}

fn write_number(v: f64, out: &mut String) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(out, "{}", v as i64)
    } else {
        write!(out, "{v:?}")
    }
}

fn emit(e: &Expr, min: u8, out: &mut String) -> fmt::Result {
    if level(e) < min {
        out.push('(');
        emit(e, SUM, out)?;
        out.push(')');
        return Ok(());
    }
    match e.node() {
        Node::Const(v) => write_number(*v, out),
        Node::Var(n) | Node::Param(n) => {
            out.push_str(n);
            Ok(())
        }
        Node::Func { name, derivs, args } => {
            if derivs.iter().any(|&d| d > 0) {
                write!(out, "D({name}")?;
                for d in derivs {
                    write!(out, ", {d}")?;
                }
                out.push(')');
            } else {
                out.push_str(name);
                if args.is_empty() {
                    return Ok(());
                }
            }
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                emit(a, SUM, out)?;
            }
            out.push(')');
            Ok(())
        }
        Node::Neg(inner) => {
            out.push('-');
            emit(inner, SIGNED, out)
        }
        Node::Add(ts) => {
            if ts.is_empty() {
                out.push('0');
                return Ok(());
            }
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    emit(t, PRODUCT, out)?;
                    continue;
                }
                match t.node() {
                    Node::Neg(inner) => {
                        out.push_str(" - ");
                        emit(inner, PRODUCT, out)?;
                    }
                    Node::Const(v) if v.is_sign_negative() && *v != 0.0 => {
                        out.push_str(" - ");
                        write_number(-v, out)?;
                    }
                    _ => {
                        out.push_str(" + ");
                        emit(t, PRODUCT, out)?;
                    }
                }
            }
            Ok(())
        }
        Node::Mul(fs) => {
            if fs.is_empty() {
                out.push('1');
                return Ok(());
            }
            for (i, factor) in fs.iter().enumerate() {
                if i == 0 {
                    // A leading quotient reads back as the first factor.
                    if matches!(factor.node(), Node::Mul(inner) if inner.len() > 1) {
                        emit(factor, ATOM, out)?;
                    } else {
                        emit(factor, PRODUCT.max(level(factor).min(SIGNED)), out)?;
                    }
                } else {
                    out.push('*');
                    emit(factor, POWER, out)?;
                }
            }
            Ok(())
        }
        Node::Div(n, d) => {
            emit(n, PRODUCT, out)?;
            out.push('/');
            emit(d, POWER, out)
        }
        Node::Pow(b, x) => {
            emit(b, ATOM, out)?;
            out.push('^');
            emit(x, POWER, out)
        }
        Node::Unary(u, a) => {
            out.push_str(u.keyword());
            out.push('(');
            emit(a, SUM, out)?;
            out.push(')');
            Ok(())
        }
        Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        } => {
            write!(out, "int({dummy}, ")?;
            match lower {
                Limit::Base(k) => write!(out, "base({k})")?,
                Limit::At(l) => emit(l, SUM, out)?,
            }
            out.push_str(", ");
            emit(upper, SUM, out)?;
            out.push_str(", ");
            emit(integrand, SUM, out)?;
            out.push(')');
            Ok(())
        }
        Node::RootOf {
            dummy,
            defining,
            seed,
        } => {
            write!(out, "rootof({dummy}, ")?;
            emit(defining, SUM, out)?;
            if let Some(s) = seed {
                out.push_str(", ");
                emit(s, SUM, out)?;
            }
            out.push(')');
            Ok(())
        }
        Node::Let {
            name,
            params,
            bound,
            body,
        } => {
            write!(out, "let({name}")?;
            if !params.is_empty() {
                out.push('(');
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(p);
                }
                out.push(')');
            }
            out.push_str(", ");
            emit(bound, SUM, out)?;
            out.push_str(", ");
            emit(body, SUM, out)?;
            out.push(')');
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Env};

    fn env() -> Env {
        Env::new()
            .vars(&["t", "x"])
            .params(&["a", "b", "c"])
            .func("F", 1)
            .func("G", 1)
            .unknown("w")
    }

    #[test]
    fn round_trips() {
        let cases = [
            "a*x + b",
            "-x^2 + a",
            "x - (a + b)",
            "a/b*c",
            "a*(b/c)",
            "a*b/c",
            "(-2)^x",
            "x^(-2)",
            "2^3^x",
            "-(a*b) + c",
            "exp(b*t)*G(x)",
            "int(xi, base(x), x, xi^2*exp(-t*xi))",
            "rootof(Z, Z^3 - x, 1)",
            "let(S(t, x), t*x, S(x, t) + S(t, x))",
            "D(w, 1, 1)(t, x) - D(F, 2)(t)/w(t, x)",
            "1.5e-30*x - 0.25",
        ];
        for c in cases {
            let e = parse(c, &env()).unwrap();
            let printed = e.to_string();
            let back = parse(&printed, &env()).unwrap();
            assert_eq!(back.flattened(), e.flattened(), "{c} -> {printed}");
        }
    }

    #[test]
    fn prints_readably() {
        let e = parse("a - (b + c)*x", &env()).unwrap();
        assert_eq!(e.to_string(), "a - (b + c)*x");
        let e = parse("int(xi, base, x, xi^2)", &env()).unwrap();
        assert_eq!(e.to_string(), "int(xi, base(x), x, xi^2)");
    }
}
