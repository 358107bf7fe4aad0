//! Capture-avoiding substitution.

use std::collections::BTreeSet;

use super::{differentiate, name, Expr, Limit, Name, Node};
use crate::error::SubstError;

/// Replacement for a free name.
#[derive(Debug, Clone)]
pub enum Binding {
    /// Replace a variable or parameter. Applied to a function whose
    /// arguments are distinct variables, the expression is taken as the
    /// function's body in those variables.
    Value(Expr),
    /// Replace every application `f(args)` (and its derivatives) by `body`
    /// with `params` set to `args`.
    Function { params: Vec<Name>, body: Expr },
}

impl Binding {
    fn free_names(&self) -> BTreeSet<String> {
        match self {
            Binding::Value(e) => e.free_variables(),
            Binding::Function { params, body } => {
                let mut s = body.free_variables();
                for p in params {
                    s.remove(&**p);
                }
                s
            }
        }
    }
}

/// Replace free occurrences of the bound names, renaming binders where a
/// replacement would otherwise be captured. Binding a name that the
/// expression uses as a binder is rejected.
pub fn substitute(e: &Expr, bindings: &[(String, Binding)]) -> Result<Expr, SubstError> {
    let binders = binder_names(e);
    for (k, _) in bindings {
        if binders.contains(k) {
            return Err(SubstError::BoundName(k.clone()));
        }
    }
    let active: Vec<Active> = bindings
        .iter()
        .map(|(k, b)| Active {
            key: k.clone(),
            free: b.free_names(),
            binding: b.clone(),
        })
        .collect();
    subst(e, &active)
}

struct Active {
    key: String,
    binding: Binding,
    free: BTreeSet<String>,
}

fn binder_names(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn walk(e: &Expr, out: &mut BTreeSet<String>) {
        match e.node() {
            Node::Integral { dummy, .. } | Node::RootOf { dummy, .. } => {
                out.insert(dummy.to_string());
            }
            Node::Let { name, params, .. } => {
                out.insert(name.to_string());
                out.extend(params.iter().map(|p| p.to_string()));
            }
            _ => {}
        }
        for c in e.children() {
            walk(c, out);
        }
    }
    walk(e, &mut out);
    out
}

fn all_names(e: &Expr, out: &mut BTreeSet<String>) {
    match e.node() {
        Node::Var(n) | Node::Param(n) => {
            out.insert(n.to_string());
        }
        Node::Func { name, .. } => {
            out.insert(name.to_string());
        }
        Node::Integral { dummy, .. } | Node::RootOf { dummy, .. } => {
            out.insert(dummy.to_string());
        }
        Node::Let { name, params, .. } => {
            out.insert(name.to_string());
            out.extend(params.iter().map(|p| p.to_string()));
        }
        _ => {}
    }
    for c in e.children() {
        all_names(c, out);
    }
}

fn fresh(base: &str, avoid: &BTreeSet<String>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '_');
    let stem = if stem.is_empty() { base } else { stem };
    (1..)
        .map(|k| format!("{stem}_{k}"))
        .find(|c| !avoid.contains(c))
        .map(|s| name(&s))
        .unwrap()
}

fn rename_var(e: &Expr, old: &Name, new: &Name) -> Expr {
    let a = Active {
        key: old.to_string(),
        binding: Binding::Value(Expr::new(Node::Var(new.clone()))),
        free: [new.to_string()].into_iter().collect(),
    };
    subst(e, std::slice::from_ref(&a)).expect("variable renaming cannot fail")
}

fn rename_func(e: &Expr, old: &Name, new: &Name) -> Expr {
    match e.node() {
        Node::Func { name, derivs, args } if name == old => Expr::new(Node::Func {
            name: new.clone(),
            derivs: derivs.clone(),
            args: args.iter().map(|a| rename_func(a, old, new)).collect(),
        }),
        Node::Let { name, .. } if name == old => {
            // Inner definition shadows; only its bound can refer to the outer one.
            if let Node::Let {
                name,
                params,
                bound,
                body,
            } = e.node()
            {
                return Expr::new(Node::Let {
                    name: name.clone(),
                    params: params.clone(),
                    bound: rename_func(bound, old, new),
                    body: body.clone(),
                });
            }
            unreachable!()
        }
        _ => e.map_children(|c| rename_func(c, old, new)),
    }
}

fn subst_owned(e: &Expr, active: &[&Active]) -> Result<Expr, SubstError> {
    subst_refs(e, active)
}

fn subst(e: &Expr, active: &[Active]) -> Result<Expr, SubstError> {
    let refs: Vec<&Active> = active.iter().collect();
    subst_refs(e, &refs)
}

fn lookup<'a>(active: &[&'a Active], n: &str) -> Option<&'a Active> {
    active.iter().rev().find(|a| a.key == n).copied()
}

fn subst_refs(e: &Expr, active: &[&Active]) -> Result<Expr, SubstError> {
    if active.is_empty() {
        return Ok(e.clone());
    }
    match e.node() {
        Node::Const(_) => Ok(e.clone()),
        Node::Var(n) | Node::Param(n) => match lookup(active, n) {
            Some(Active {
                binding: Binding::Value(r),
                ..
            }) => Ok(r.clone()),
            _ => Ok(e.clone()),
        },
        Node::Func { name: fname, derivs, args } => {
            let new_args = args
                .iter()
                .map(|a| subst_refs(a, active))
                .collect::<Result<Vec<_>, _>>()?;
            match lookup(active, fname) {
                None => Ok(Expr::new(Node::Func {
                    name: fname.clone(),
                    derivs: derivs.clone(),
                    args: new_args,
                })),
                Some(a) => apply_function_binding(fname, derivs, args, new_args, &a.binding),
            }
        }
        Node::Integral {
            dummy,
            integrand,
            lower,
            upper,
        } => {
            let lower = match lower {
                Limit::Base(k) => Limit::Base(k.clone()),
                Limit::At(l) => Limit::At(subst_refs(l, active)?),
            };
            let upper = subst_refs(upper, active)?;
            let (dummy, integrand) = under_binder(dummy, integrand, active)?;
            Ok(Expr::new(Node::Integral {
                dummy,
                integrand,
                lower,
                upper,
            }))
        }
        Node::RootOf {
            dummy,
            defining,
            seed,
        } => {
            let seed = seed.as_ref().map(|s| subst_refs(s, active)).transpose()?;
            let (dummy, defining) = under_binder(dummy, defining, active)?;
            Ok(Expr::new(Node::RootOf {
                dummy,
                defining,
                seed,
            }))
        }
        Node::Let {
            name: lname,
            params,
            bound,
            body,
        } => {
            // Bound: parameters shadow.
            let (kept, clash) = enter_refs(active, params, bound);
            let mut params = params.clone();
            let mut bound = bound.clone();
            if !clash.is_empty() {
                let mut avoid = BTreeSet::new();
                all_names(&bound, &mut avoid);
                for a in &kept {
                    avoid.extend(a.free.iter().cloned());
                }
                for c in clash {
                    let f = fresh(&c, &avoid);
                    avoid.insert(f.to_string());
                    bound = rename_var(&bound, &c, &f);
                    for p in params.iter_mut() {
                        if *p == c {
                            *p = f.clone();
                        }
                    }
                }
            }
            let bound = subst_owned(&bound, &kept)?;
            // Body: the let name shadows.
            let (kept, clash) = enter_refs(active, std::slice::from_ref(lname), body);
            let mut lname = lname.clone();
            let mut body = body.clone();
            if !clash.is_empty() {
                let mut avoid = BTreeSet::new();
                all_names(&body, &mut avoid);
                for a in &kept {
                    avoid.extend(a.free.iter().cloned());
                }
                let f = fresh(&lname, &avoid);
                body = rename_func(&body, &lname, &f);
                lname = f;
            }
            let body = subst_owned(&body, &kept)?;
            Ok(Expr::new(Node::Let {
                name: lname,
                params,
                bound,
                body,
            }))
        }
        _ => {
            let mut err = None;
            let out = e.map_children(|c| match subst_refs(c, active) {
                Ok(r) => r,
                Err(er) => {
                    err.get_or_insert(er);
                    c.clone()
                }
            });
            match err {
                Some(er) => Err(er),
                None => Ok(out),
            }
        }
    }
}

fn enter_refs<'a>(active: &[&'a Active], bound: &[Name], scope: &Expr) -> (Vec<&'a Active>, Vec<Name>) {
    let kept: Vec<&Active> = active
        .iter()
        .filter(|a| !bound.iter().any(|b| **b == *a.key) && scope.depends_on(&a.key))
        .copied()
        .collect();
    let clash = bound
        .iter()
        .filter(|b| kept.iter().any(|a| a.free.contains(&***b)))
        .cloned()
        .collect();
    (kept, clash)
}

fn under_binder(dummy: &Name, scope: &Expr, active: &[&Active]) -> Result<(Name, Expr), SubstError> {
    let (kept, clash) = enter_refs(active, std::slice::from_ref(dummy), scope);
    if kept.is_empty() {
        return Ok((dummy.clone(), scope.clone()));
    }
    if clash.is_empty() {
        return Ok((dummy.clone(), subst_owned(scope, &kept)?));
    }
    let mut avoid = BTreeSet::new();
    all_names(scope, &mut avoid);
    for a in &kept {
        avoid.extend(a.free.iter().cloned());
    }
    let f = fresh(dummy, &avoid);
    let renamed = rename_var(scope, dummy, &f);
    Ok((f, subst_owned(&renamed, &kept)?))
}

fn apply_function_binding(
    fname: &Name,
    derivs: &[u8],
    orig_args: &[Expr],
    new_args: Vec<Expr>,
    binding: &Binding,
) -> Result<Expr, SubstError> {
    let (params, body): (Vec<Name>, Expr) = match binding {
        Binding::Function { params, body } => (params.clone(), body.clone()),
        Binding::Value(body) => {
            // Arguments must be distinct variables to serve as parameters.
            let mut ps = Vec::new();
            for a in orig_args {
                match a.node() {
                    Node::Var(n) if !ps.contains(n) => ps.push(n.clone()),
                    _ => {
                        return Err(SubstError::Arity {
                            name: fname.to_string(),
                            expected: 0,
                            found: orig_args.len(),
                        })
                    }
                }
            }
            (ps, body.clone())
        }
    };
    if params.len() != new_args.len() {
        return Err(SubstError::Arity {
            name: fname.to_string(),
            expected: params.len(),
            found: new_args.len(),
        });
    }
    let mut r = body;
    for (p, &k) in params.iter().zip(derivs) {
        for _ in 0..k {
            r = super::simplify(&differentiate(&r, p));
        }
    }
    // Simultaneous replacement of parameters by arguments: go through fresh
    // intermediate names so an argument mentioning another parameter is not
    // rewritten twice.
    let mut avoid = BTreeSet::new();
    all_names(&r, &mut avoid);
    for a in &new_args {
        all_names(a, &mut avoid);
    }
    let mut temps = Vec::new();
    for p in &params {
        let f = fresh(&format!("{p}_p"), &avoid);
        avoid.insert(f.to_string());
        r = rename_var(&r, p, &f);
        temps.push(f);
    }
    let finals: Vec<Active> = temps
        .iter()
        .zip(new_args)
        .map(|(t, a)| Active {
            key: t.to_string(),
            free: a.free_variables(),
            binding: Binding::Value(a),
        })
        .collect();
    subst(&r, &finals)
}

/// Substitution used internally where the key is known to be free (e.g. a
/// binder's own dummy inside its scope); inner shadowing is respected.
pub(super) fn substitute_free(e: &Expr, key: &Name, value: &Expr) -> Expr {
    let a = Active {
        key: key.to_string(),
        free: value.free_variables(),
        binding: Binding::Value(value.clone()),
    };
    subst(e, std::slice::from_ref(&a)).expect("value substitution cannot fail")
}
