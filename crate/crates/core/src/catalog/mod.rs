//! The family catalog: each record pairs a PDE with its closed-form general
//! solution, parsed from an embedded text table.

pub mod audit;
mod hints;

use std::collections::BTreeSet;
use std::sync::OnceLock;

pub use hints::{Hints, Requirement};

use crate::error::CatalogError;
use crate::expr::{name, parse, simplify, substitute, Binding, Env, Expr, Node};
use crate::numeric::MultiIndex;

/// Name of the unknown in every PDE.
pub const UNKNOWN: &str = "w";

const CATALOG_TEXT: &str = include_str!("families.txt");

/// An arbitrary function of the solution, or a nonconstant coefficient of
/// the PDE. Both are sampled; only the role differs.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub name: String,
    pub arity: usize,
    pub coefficient: bool,
}

/// An expression that must not vanish.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub text: String,
    pub expr: Expr,
}

#[derive(Debug, Clone)]
pub struct PdeFamily {
    pub id: String,
    pub class: String,
    pub vars: Vec<String>,
    pub params: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub functions: Vec<FunctionSpec>,
    /// Left-hand side of `pde_lhs = 0`.
    pub pde_lhs: Expr,
    pub solution: Expr,
    pub pde_text: String,
    pub solution_text: String,
    pub hints: Hints,
    pub order: usize,
    /// Partials of the unknown appearing in the PDE (the value excluded).
    pub derivative_set: Vec<MultiIndex>,
    pub env: Env,
}

impl PdeFamily {
    pub fn var_refs(&self) -> Vec<&str> {
        self.vars.iter().map(|s| s.as_str()).collect()
    }

    /// Parse an auxiliary expression (a fixture, a requirement) in this
    /// family's name environment.
    pub fn parse_expr(&self, text: &str) -> Result<Expr, crate::error::ParseError> {
        parse(text, &self.env)
    }

    /// A copy with a different solution, for alternative readings.
    pub fn with_solution(&self, text: &str) -> Result<PdeFamily, CatalogError> {
        let solution = parse(text, &self.env).map_err(|source| CatalogError::Parse {
            id: self.id.clone(),
            field: "solution".into(),
            source,
        })?;
        let mut f = self.clone();
        f.solution = solution;
        f.solution_text = text.to_string();
        Ok(f)
    }

    /// A copy with a different PDE.
    pub fn with_pde(&self, text: &str) -> Result<PdeFamily, CatalogError> {
        let pde = parse(text, &self.env).map_err(|source| CatalogError::Parse {
            id: self.id.clone(),
            field: "pde".into(),
            source,
        })?;
        let mut f = self.clone();
        let (order, set) = derivative_set(&pde);
        f.pde_lhs = pde;
        f.pde_text = text.to_string();
        f.order = order;
        f.derivative_set = set;
        Ok(f)
    }

    pub fn arbitrary_functions(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.functions.iter().filter(|f| !f.coefficient)
    }

    pub fn coefficient_functions(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.functions.iter().filter(|f| f.coefficient)
    }
}

/// Multi-indices of the unknown's derivatives in `pde` and the largest
/// order among them.
pub fn derivative_set(pde: &Expr) -> (usize, Vec<MultiIndex>) {
    let mut set = BTreeSet::new();
    scan(pde, &mut set);
    let mut v: Vec<MultiIndex> = set.into_iter().collect();
    v.sort_by_key(|m| (m.degree(), std::cmp::Reverse(m.0)));
    let order = v.iter().map(|m| m.degree()).max().unwrap_or(0);
    (order, v)
}

fn scan(e: &Expr, out: &mut BTreeSet<MultiIndex>) {
    if let Node::Func { name, derivs, .. } = e.node() {
        if &**name == UNKNOWN && derivs.iter().any(|&d| d > 0) {
            out.insert(MultiIndex::from_counts(derivs));
        }
    }
    for c in e.children() {
        scan(c, out);
    }
}

/// The PDE with the solution substituted for the unknown, simplified. Its
/// value is the residual and it no longer mentions the unknown.
pub fn build_residual(family: &PdeFamily) -> Expr {
    let params = family.vars.iter().map(|v| name(v)).collect();
    let b = Binding::Function {
        params,
        body: family.solution.clone(),
    };
    let e = substitute(&family.pde_lhs, &[(UNKNOWN.to_string(), b)])
        .expect("a PDE has no binders");
    simplify(&e)
}

fn catalog() -> &'static [PdeFamily] {
    static CATALOG: OnceLock<Vec<PdeFamily>> = OnceLock::new();
    CATALOG.get_or_init(|| parse_catalog(CATALOG_TEXT).expect("embedded catalog is well formed"))
}

/// Family ids in catalog order.
pub fn list_families() -> Vec<&'static str> {
    catalog().iter().map(|f| f.id.as_str()).collect()
}

pub fn all_families() -> &'static [PdeFamily] {
    catalog()
}

pub fn get_family(id: &str) -> Result<&'static PdeFamily, CatalogError> {
    catalog()
        .iter()
        .find(|f| f.id == id)
        .ok_or_else(|| CatalogError::UnknownFamily(id.to_string()))
}

struct Record {
    line: usize,
    fields: Vec<(String, String)>,
}

impl Record {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, CatalogError> {
        self.get(key).ok_or_else(|| CatalogError::Format {
            line: self.line,
            msg: format!("missing field {key:?}"),
        })
    }
}

fn split_records(text: &str) -> Result<Vec<Record>, CatalogError> {
    let mut out = Vec::new();
    let mut cur: Option<Record> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim_start().starts_with('#') {
            continue;
        }
        if raw.trim().is_empty() {
            out.extend(cur.take());
            continue;
        }
        if raw.starts_with(char::is_whitespace) {
            let rec = cur.as_mut().ok_or(CatalogError::Format {
                line,
                msg: "continuation line outside a record".into(),
            })?;
            let last = rec.fields.last_mut().ok_or(CatalogError::Format {
                line,
                msg: "continuation before any field".into(),
            })?;
            last.1.push(' ');
            last.1.push_str(raw.trim());
            continue;
        }
        let (k, v) = raw.split_once(':').ok_or(CatalogError::Format {
            line,
            msg: format!("expected `field: value`, got {raw:?}"),
        })?;
        let rec = cur.get_or_insert_with(|| Record {
            line,
            fields: Vec::new(),
        });
        rec.fields.push((k.trim().to_string(), v.trim().to_string()));
    }
    out.extend(cur);
    Ok(out)
}

/// Split on commas outside parentheses and brackets.
pub(crate) fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if ch == sep && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn function_list(s: Option<&str>, coefficient: bool, line: usize) -> Result<Vec<FunctionSpec>, CatalogError> {
    let mut out = Vec::new();
    for item in split_top(s.unwrap_or(""), ',') {
        let (n, a) = item.split_once('/').ok_or(CatalogError::Format {
            line,
            msg: format!("function {item:?} lacks an arity"),
        })?;
        let arity = a.trim().parse().map_err(|_| CatalogError::Format {
            line,
            msg: format!("bad arity in {item:?}"),
        })?;
        out.push(FunctionSpec {
            name: n.trim().to_string(),
            arity,
            coefficient,
        });
    }
    Ok(out)
}

/// Parse catalog text: records separated by blank lines.
pub fn parse_catalog(text: &str) -> Result<Vec<PdeFamily>, CatalogError> {
    split_records(text)?.iter().map(build_family).collect()
}

fn build_family(rec: &Record) -> Result<PdeFamily, CatalogError> {
    let id = rec.require("id")?.to_string();
    let vars = split_top(rec.require("vars")?, ',');
    let params = split_top(rec.get("params").unwrap_or(""), ',');
    let mut functions = function_list(rec.get("funcs"), false, rec.line)?;
    functions.extend(function_list(rec.get("coefs"), true, rec.line)?);

    let var_refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let param_refs: Vec<&str> = params.iter().map(|s| s.as_str()).collect();
    let mut env = Env::new().vars(&var_refs).params(&param_refs);
    for f in &functions {
        env = env.func(&f.name, f.arity);
    }
    let env = env.unknown(UNKNOWN);

    let field = |key: &str, text: &str| {
        parse(text, &env).map_err(|source| CatalogError::Parse {
            id: id.clone(),
            field: key.to_string(),
            source,
        })
    };
    let pde_text = rec.require("pde")?.to_string();
    let solution_text = rec.require("solution")?.to_string();
    let pde_lhs = field("pde", &pde_text)?;
    let solution = field("solution", &solution_text)?;
    if solution.depends_on(UNKNOWN) {
        return Err(CatalogError::Format {
            line: rec.line,
            msg: format!("{id}: solution mentions the unknown"),
        });
    }
    let constraints = split_top(rec.get("constraints").unwrap_or(""), ',')
        .into_iter()
        .map(|t| {
            Ok(Constraint {
                expr: field("constraints", &t)?,
                text: t,
            })
        })
        .collect::<Result<Vec<_>, CatalogError>>()?;
    let hints = Hints::parse(rec.get("hints").unwrap_or(""), &env).map_err(|e| match e {
        hints::HintError::Parse(source) => CatalogError::Parse {
            id: id.clone(),
            field: "hints".into(),
            source,
        },
        hints::HintError::Format(msg) => CatalogError::Format {
            line: rec.line,
            msg: format!("{id}: {msg}"),
        },
    })?;
    let (order, derivative_set) = derivative_set(&pde_lhs);
    Ok(PdeFamily {
        class: rec.get("class").unwrap_or("").to_string(),
        id,
        vars,
        params,
        constraints,
        functions,
        pde_lhs,
        solution,
        pde_text,
        solution_text,
        hints,
        order,
        derivative_set,
        env,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_catalog_parses() {
        let ids = list_families();
        assert_eq!(ids.len(), 25);
        assert_eq!(ids[0], "3.1");
        assert_eq!(ids[24], "7.2");
    }

    #[test]
    fn derivative_sets() {
        let f = get_family("3.1").unwrap();
        assert_eq!(f.order, 2);
        let want: Vec<MultiIndex> = [[1, 1], [1, 0], [0, 1]]
            .iter()
            .map(|c| MultiIndex::from_counts(c))
            .collect();
        let mut got = f.derivative_set.clone();
        got.sort();
        let mut want = want;
        want.sort();
        assert_eq!(got, want);
        assert_eq!(get_family("6.4").unwrap().order, 3);
        assert_eq!(get_family("6.1").unwrap().order, 3);
    }

    #[test]
    fn residual_drops_the_unknown() {
        for f in all_families() {
            let r = build_residual(f);
            assert!(!r.depends_on(UNKNOWN), "{}", f.id);
        }
    }

    #[test]
    fn unknown_family() {
        assert!(matches!(get_family("9.9"), Err(CatalogError::UnknownFamily(_))));
    }
}
