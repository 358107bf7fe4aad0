//! Transcription audit: a markdown table per family listing every additive
//! term of the displayed equation next to the catalog subtree it maps to.
//!
//! Sections start with `## <id>`; table rows are
//! ``| n | notation | `expr` |``, where `expr` is in the expression language.

use super::{get_family, PdeFamily};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSection {
    pub id: String,
    /// `(notation, expression text)` per displayed term.
    pub terms: Vec<(String, String)>,
}

pub fn parse_audit(doc: &str) -> Vec<AuditSection> {
    let mut out: Vec<AuditSection> = Vec::new();
    for line in doc.lines() {
        if let Some(id) = line.strip_prefix("## ") {
            out.push(AuditSection {
                id: id.trim().to_string(),
                terms: Vec::new(),
            });
            continue;
        }
        let Some(sec) = out.last_mut() else { continue };
        let cells: Vec<&str> = line.trim().trim_matches('|').split('|').map(str::trim).collect();
        if cells.len() != 3 || cells[0].parse::<usize>().is_err() {
            continue;
        }
        let expr = cells[2].trim_matches('`');
        sec.terms.push((cells[1].to_string(), expr.to_string()));
    }
    out
}

/// Check one section against the catalog: same number of terms, and a
/// one-to-one match between listed expressions and additive terms of the
/// stored left-hand side.
pub fn check_section(sec: &AuditSection) -> Result<(), String> {
    let fam = get_family(&sec.id).map_err(|e| e.to_string())?;
    check_terms(fam, &sec.terms)
}

pub fn check_terms(fam: &PdeFamily, terms: &[(String, String)]) -> Result<(), String> {
    let mut stored: Vec<Option<Expr>> = fam.pde_lhs.additive_terms().iter().map(|t| Some(t.flattened())).collect();
    if stored.len() != terms.len() {
        return Err(format!(
            "{}: {} terms listed, {} stored",
            fam.id,
            terms.len(),
            stored.len()
        ));
    }
    for (notation, text) in terms {
        let e = fam
            .parse_expr(text)
            .map_err(|err| format!("{}: {notation}: {err}", fam.id))?
            .flattened();
        let slot = stored
            .iter_mut()
            .find(|s| s.as_ref() == Some(&e))
            .ok_or_else(|| format!("{}: {notation} has no matching subtree", fam.id))?;
        *slot = None;
    }
    Ok(())
}

/// Compact subscript notation for a term: `D(w, 1, 1)(t, x)` becomes `w_tx`.
pub fn notation(fam: &PdeFamily, e: &Expr) -> String {
    let mut s = e.to_string();
    let args = format!("({})", fam.vars.join(", "));
    while let Some(start) = s.find("D(w, ") {
        let Some(close) = s[start..].find(')') else { break };
        let counts: Vec<usize> = s[start + 5..start + close]
            .split(", ")
            .filter_map(|c| c.trim().parse().ok())
            .collect();
        let mut sub = String::new();
        for (v, &k) in fam.vars.iter().zip(&counts) {
            sub.push_str(&v.repeat(k));
        }
        let end = start + close + 1 + if s[start + close + 1..].starts_with(&args) { args.len() } else { 0 };
        s.replace_range(start..end, &format!("w_{sub}"));
    }
    s.replace(&format!("w{args}"), "w")
}
