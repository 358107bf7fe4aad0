//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := signed (('*' | '/') signed)*
//! signed := ('-' | '+') signed | power
//! power  := atom ('^' signed)?
//! atom   := number | ident | ident '(' args ')' | '(' expr ')'
//!         | 'int' '(' ident ',' ('base' ['(' ident ')'] | expr) ',' expr ',' expr ')'
//!         | 'rootof' '(' ident ',' expr [',' expr] ')'
//!         | 'let' '(' ident ['(' ident,* ')'] ',' expr ',' expr ')'
//!         | 'diff' '(' expr (',' ident)+ ')'
//!         | 'D' '(' ident (',' integer)+ ')' '(' args ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use std::collections::{BTreeMap, BTreeSet};

use super::{differentiate, name, simplify, Expr, Limit, Name, Node, UnaryFn};
use crate::error::{ParseError, ParseErrorKind};

/// Names visible to the parser.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: Vec<String>,
    params: BTreeSet<String>,
    funcs: BTreeMap<String, usize>,
    unknown: Option<String>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    /// Independent variables, in coordinate order.
    pub fn vars(mut self, vs: &[&str]) -> Self {
        self.vars.extend(vs.iter().map(|s| s.to_string()));
        self
    }

    pub fn params(mut self, ps: &[&str]) -> Self {
        self.params.extend(ps.iter().map(|s| s.to_string()));
        self
    }

    pub fn func(mut self, n: &str, arity: usize) -> Self {
        self.funcs.insert(n.to_string(), arity);
        self
    }

    /// Declare the unknown function. A bare use of its name means the
    /// function applied to the independent variables.
    pub fn unknown(mut self, n: &str) -> Self {
        self.funcs.insert(n.to_string(), self.vars.len());
        self.unknown = Some(n.to_string());
        self
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|s| s.as_str())
    }

    pub fn func_arity(&self, n: &str) -> Option<usize> {
        self.funcs.get(n).copied()
    }

    pub fn is_param(&self, n: &str) -> bool {
        self.params.contains(n)
    }

    pub fn is_var(&self, n: &str) -> bool {
        self.vars.iter().any(|v| v == n)
    }
}

/// Parse `text` with the names declared in `env`.
pub fn parse(text: &str, env: &Env) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        env,
        scope: Scope {
            vars: env.vars.iter().map(|v| name(v)).collect(),
            lets: Vec::new(),
        },
        end: text.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError::syntax(tok.pos, format!("unexpected {:?}", tok.kind)));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| ParseError::syntax(start, format!("bad number literal {lit:?}")))?;
            out.push(Token { kind: Tok::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Tok::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token { kind: Tok::Sym(c), pos: i });
            i += 1;
        } else {
            return Err(ParseError::syntax(i, format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

#[derive(Clone)]
struct LetScope {
    name: Name,
    params: Vec<Name>,
}

#[derive(Clone)]
struct Scope {
    vars: Vec<Name>,
    lets: Vec<LetScope>,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    env: &'a Env,
    scope: Scope,
    end: usize,
}

const RESERVED: &[&str] = &["int", "rootof", "let", "diff", "base", "D", "pi"];

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: Tok::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(ParseError::syntax(self.here(), format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), ParseError> {
        match self.peek().cloned() {
            Some(Token {
                kind: Tok::Ident(s),
                pos,
            }) => {
                self.pos += 1;
                Ok((s, pos))
            }
            _ => Err(ParseError::syntax(self.here(), "expected identifier")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.term()?;
        let mut terms = vec![first];
        loop {
            if self.eat_sym('+') {
                terms.push(self.term()?);
            } else if self.eat_sym('-') {
                terms.push(self.term()?.negated());
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::add(terms)
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.signed()?;
        loop {
            if self.eat_sym('*') {
                let rhs = self.signed()?;
                acc = match acc.node() {
                    Node::Mul(fs) => {
                        let mut fs = fs.clone();
                        fs.push(rhs);
                        Expr::mul(fs)
                    }
                    _ => Expr::mul(vec![acc, rhs]),
                };
            } else if self.eat_sym('/') {
                let rhs = self.signed()?;
                acc = Expr::div(acc, rhs);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn signed(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym('-') {
            Ok(self.signed()?.negated())
        } else if self.eat_sym('+') {
            self.signed()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_sym('^') {
            let exp = self.signed()?;
            Ok(Expr::pow(base, exp))
        } else {
            Ok(base)
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    fn with_var<T>(&mut self, v: Name, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        self.scope.vars.push(v);
        let r = f(self);
        self.scope.vars.pop();
        r
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = match self.peek().cloned() {
            Some(t) => t,
            None => return Err(ParseError::syntax(self.end, "unexpected end of input")),
        };
        match tok.kind {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::constant(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(ParseError::syntax(tok.pos, format!("unexpected '{c}'"))),
            Tok::Ident(id) => {
                self.pos += 1;
                self.ident_atom(id, tok.pos)
            }
        }
    }

    fn ident_atom(&mut self, id: String, pos: usize) -> Result<Expr, ParseError> {
        match id.as_str() {
            "pi" => return Ok(Expr::constant(std::f64::consts::PI)),
            "int" => return self.integral(),
            "rootof" => return self.rootof(),
            "let" => return self.let_form(),
            "diff" => return self.diff_form(),
            "D" => return self.derivative_form(),
            "base" => return Err(ParseError::syntax(pos, "'base' only allowed as an integral's lower limit")),
            _ => {}
        }
        if let Some(u) = UnaryFn::from_keyword(&id) {
            self.expect_sym('(')?;
            let args = self.args()?;
            if args.len() != 1 {
                return Err(ParseError::arity(pos, &id, 1, args.len()));
            }
            return Ok(Expr::unary(u, args.into_iter().next().unwrap()));
        }
        let calls = self.eat_sym('(');
        // Bound names shadow everything else.
        if !calls && self.scope.vars.iter().rev().any(|v| **v == *id) {
            return Ok(Expr::var(&id));
        }
        if let Some(l) = self.scope.lets.iter().rev().find(|l| *l.name == *id).cloned() {
            let args = if calls {
                self.args()?
            } else {
                let mut args = Vec::new();
                for p in &l.params {
                    if !self.scope.vars.iter().any(|v| v == p) {
                        return Err(ParseError::syntax(
                            pos,
                            format!("bare use of {id} needs its parameter {p} in scope"),
                        ));
                    }
                    args.push(Expr::var(p));
                }
                args
            };
            if args.len() != l.params.len() {
                return Err(ParseError::arity(pos, &id, l.params.len(), args.len()));
            }
            return Ok(Expr::func(&id, args));
        }
        if !calls && self.env.is_param(&id) {
            return Ok(Expr::param(&id));
        }
        if let Some(arity) = self.env.func_arity(&id) {
            let args = if calls {
                self.args()?
            } else if self.env.unknown.as_deref() == Some(id.as_str()) {
                self.env.vars.iter().map(|v| Expr::var(v)).collect()
            } else {
                return Err(ParseError::syntax(pos, format!("function {id} used without arguments")));
            };
            if args.len() != arity {
                return Err(ParseError::arity(pos, &id, arity, args.len()));
            }
            return Ok(Expr::func(&id, args));
        }
        if calls {
            return Err(ParseError::new(pos, ParseErrorKind::UnknownIdentifier(id)));
        }
        if self.env.is_var(&id) {
            return Err(ParseError::syntax(pos, format!("variable {id} is not in scope here")));
        }
        Err(ParseError::new(pos, ParseErrorKind::UnknownIdentifier(id)))
    }

    fn binder_name(&mut self) -> Result<Name, ParseError> {
        let (id, pos) = self.ident()?;
        if RESERVED.contains(&id.as_str()) || UnaryFn::from_keyword(&id).is_some() {
            return Err(ParseError::syntax(pos, format!("{id} is reserved")));
        }
        Ok(name(&id))
    }

    fn integral(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym('(')?;
        let dummy = self.binder_name()?;
        self.expect_sym(',')?;
        let base_pos = self.here();
        let lower = if matches!(self.peek(), Some(Token { kind: Tok::Ident(s), .. }) if s == "base") {
            self.pos += 1;
            if self.eat_sym('(') {
                let (k, _) = self.ident()?;
                self.expect_sym(')')?;
                Some(Limit::Base(name(&k)))
            } else {
                None
            }
        } else {
            Some(Limit::At(self.expr()?))
        };
        self.expect_sym(',')?;
        let upper = self.expr()?;
        let lower = match lower {
            Some(l) => l,
            None => match upper.node() {
                Node::Var(v) => Limit::Base(v.clone()),
                _ => {
                    return Err(ParseError::syntax(
                        base_pos,
                        "bare 'base' needs a variable upper limit; write base(<var>)",
                    ))
                }
            },
        };
        self.expect_sym(',')?;
        let integrand = self.with_var(dummy.clone(), |p| p.expr())?;
        self.expect_sym(')')?;
        Ok(Expr::new(Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        }))
    }

    fn rootof(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym('(')?;
        let dummy = self.binder_name()?;
        self.expect_sym(',')?;
        let defining = self.with_var(dummy.clone(), |p| p.expr())?;
        let seed = if self.eat_sym(',') { Some(self.expr()?) } else { None };
        self.expect_sym(')')?;
        Ok(Expr::new(Node::RootOf {
            dummy,
            defining,
            seed,
        }))
    }

    fn let_form(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym('(')?;
        let let_name = self.binder_name()?;
        let mut params = Vec::new();
        if self.eat_sym('(') {
            loop {
                params.push(self.binder_name()?);
                if self.eat_sym(')') {
                    break;
                }
                self.expect_sym(',')?;
            }
        }
        self.expect_sym(',')?;
        // The bound sees only its own parameters as variables.
        let saved = std::mem::replace(&mut self.scope.vars, params.clone());
        let bound = self.expr();
        self.scope.vars = saved;
        let bound = bound?;
        self.expect_sym(',')?;
        self.scope.lets.push(LetScope {
            name: let_name.clone(),
            params: params.clone(),
        });
        let body = self.expr();
        self.scope.lets.pop();
        let body = body?;
        self.expect_sym(')')?;
        Ok(Expr::new(Node::Let {
            name: let_name,
            params,
            bound,
            body,
        }))
    }

    fn diff_form(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym('(')?;
        let mut e = self.expr()?;
        let mut any = false;
        while self.eat_sym(',') {
            let (v, pos) = self.ident()?;
            if !self.scope.vars.iter().any(|s| **s == *v) {
                return Err(ParseError::syntax(pos, format!("cannot differentiate in {v}: not a variable in scope")));
            }
            e = simplify(&differentiate(&e, &v));
            any = true;
        }
        if !any {
            return Err(ParseError::syntax(self.here(), "diff needs at least one variable"));
        }
        self.expect_sym(')')?;
        Ok(e)
    }

    fn derivative_form(&mut self) -> Result<Expr, ParseError> {
        let pos = self.here();
        self.expect_sym('(')?;
        let (fname, _) = self.ident()?;
        let mut derivs = Vec::new();
        while self.eat_sym(',') {
            match self.peek().cloned() {
                Some(Token { kind: Tok::Num(v), pos }) => {
                    self.pos += 1;
                    if v < 0.0 || v.fract() != 0.0 || v > 255.0 {
                        return Err(ParseError::syntax(pos, "derivative order must be a small integer"));
                    }
                    derivs.push(v as u8);
                }
                _ => return Err(ParseError::syntax(self.here(), "expected derivative order")),
            }
        }
        self.expect_sym(')')?;
        self.expect_sym('(')?;
        let args = self.args()?;
        let arity = if let Some(l) = self.scope.lets.iter().rev().find(|l| *l.name == *fname) {
            l.params.len()
        } else if let Some(a) = self.env.func_arity(&fname) {
            a
        } else {
            return Err(ParseError::new(pos, ParseErrorKind::UnknownIdentifier(fname)));
        };
        if args.len() != arity || derivs.len() != arity {
            return Err(ParseError::arity(pos, &fname, arity, args.len()));
        }
        Ok(Expr::new(Node::Func {
            name: name(&fname),
            derivs,
            args,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Env {
        Env::new()
            .vars(&["t", "x"])
            .params(&["a", "b", "c"])
            .func("F", 1)
            .func("G", 1)
            .unknown("w")
    }

    #[test]
    fn linear_expression() {
        let e = parse("a*x + b", &env()).unwrap();
        let expected = Expr::add(vec![
            Expr::mul(vec![Expr::param("a"), Expr::var("x")]),
            Expr::param("b"),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn exp_times_function() {
        let e = parse("exp(b*t)*G(x)", &env()).unwrap();
        let expected = Expr::mul(vec![
            Expr::exp(Expr::mul(vec![Expr::param("b"), Expr::var("t")])),
            Expr::func("G", vec![Expr::var("x")]),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn integral_from_base() {
        let e = parse("int(xi, base, x, xi^2)", &env()).unwrap();
        let expected = Expr::integral(
            "xi",
            Expr::pow(Expr::var("xi"), Expr::constant(2.0)),
            Limit::Base(name("x")),
            Expr::var("x"),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-x^2", &env()).unwrap();
        assert!(matches!(e.node(), Node::Neg(inner) if matches!(inner.node(), Node::Pow(..))));
        let c = parse("-2", &env()).unwrap();
        assert_eq!(c, Expr::constant(-2.0));
    }

    #[test]
    fn unknown_identifier_reports_position() {
        let err = parse("a + q*x", &env()).unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(matches!(err.kind, ParseErrorKind::UnknownIdentifier(ref s) if s == "q"));
    }

    #[test]
    fn arity_mismatch() {
        let err = parse("F(t, x)", &env()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Arity { expected: 1, found: 2, .. }));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse("a + * b", &env()).unwrap_err();
        assert_eq!(err.pos, 4);
        let err = parse("(a + b", &env()).unwrap_err();
        assert_eq!(err.pos, 6);
    }

    #[test]
    fn dummy_is_out_of_scope_after_binder() {
        assert!(parse("int(xi, base, x, xi) + xi", &env()).is_err());
    }

    #[test]
    fn bare_unknown_applies_to_independent_vars() {
        let e = parse("w", &env()).unwrap();
        assert_eq!(e, Expr::func("w", vec![Expr::var("t"), Expr::var("x")]));
        let d = parse("diff(w, t, x)", &env()).unwrap();
        assert!(matches!(d.node(), Node::Func { derivs, .. } if derivs == &vec![1, 1]));
        assert_eq!(parse("D(w, 1, 1)(t, x)", &env()).unwrap(), d);
    }

    #[test]
    fn let_bound_sees_only_its_parameters() {
        assert!(parse("let(S, t + a, S)", &env()).is_err());
        let e = parse("let(S(t, x), t*x, S(x, t) + S)", &env()).unwrap();
        assert!(matches!(e.node(), Node::Let { .. }));
    }
}
