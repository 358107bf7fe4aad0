use std::collections::BTreeSet;

use pdegensol_core::catalog::audit::{check_section, parse_audit};
use pdegensol_core::catalog::{all_families, get_family, list_families};
use pdegensol_core::numeric::{IndexSet, MultiIndex, NumericConfig};
use pdegensol_core::verifier::sample_scenario;
use pdegensol_core::{eval_jet, CatalogError};

/// Additive terms of each displayed equation, counted by hand.
const TERM_COUNTS: [(&str, usize); 25] = [
    ("3.1", 4),
    ("3.2", 4),
    ("3.3", 4),
    ("3.4", 5),
    ("3.5", 7),
    ("3.6", 4),
    ("3.7", 6),
    ("3.8", 6),
    ("3.9", 4),
    ("3.10", 6),
    ("3.11", 9),
    ("4.1", 7),
    ("4.2", 7),
    ("4.3", 6),
    ("4.4", 6),
    ("5.1", 7),
    ("5.2", 5),
    ("5.3", 4),
    ("6.1", 3),
    ("6.2", 5),
    ("6.3", 4),
    ("6.4", 4),
    ("6.5", 4),
    ("7.1", 5),
    ("7.2", 6),
];

const AUDIT: &str = include_str!("../../../docs/transcription_audit.md");

#[test]
fn catalog_has_the_25_families() {
    let ids: Vec<&str> = TERM_COUNTS.iter().map(|(id, _)| *id).collect();
    assert_eq!(list_families(), ids);
    assert!(matches!(get_family("0"), Err(CatalogError::UnknownFamily(_))));
}

#[test]
fn catalog_audit() {
    let sections = parse_audit(AUDIT);
    let ids: Vec<&str> = sections.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, list_families());
    for (sec, (id, count)) in sections.iter().zip(TERM_COUNTS) {
        assert_eq!(sec.id, id);
        assert_eq!(sec.terms.len(), count, "{id}: audit table");
        assert_eq!(get_family(id).unwrap().pde_lhs.additive_terms().len(), count, "{id}: catalog");
        check_section(sec).unwrap();
    }
}

#[test]
fn audit_rejects_a_mismatched_table() {
    let mut sec = parse_audit(AUDIT).remove(0);
    sec.terms.pop();
    assert!(check_section(&sec).is_err());
    let mut sec = parse_audit(AUDIT).remove(0);
    sec.terms[3].1 = "c*b".into();
    assert!(check_section(&sec).is_err());
}

/// Derivative multi-indices read off the printed equation.
fn printed_partials(text: &str, nvars: usize) -> BTreeSet<MultiIndex> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(i) = rest.find("D(w, ") {
        let tail = &rest[i + 5..];
        let end = tail.find(')').unwrap();
        let counts: Vec<u8> = tail[..end].split(", ").map(|c| c.parse().unwrap()).collect();
        assert_eq!(counts.len(), nvars);
        out.insert(MultiIndex::from_counts(&counts));
        rest = &tail[end..];
    }
    out
}

#[test]
fn derivative_sets_match_a_tree_scan() {
    for f in all_families() {
        let scanned = printed_partials(&f.pde_lhs.to_string(), f.vars.len());
        let stored: BTreeSet<MultiIndex> = f.derivative_set.iter().copied().collect();
        assert_eq!(stored, scanned, "{}", f.id);
        assert_eq!(f.order, scanned.iter().map(|m| m.degree()).max().unwrap(), "{}", f.id);
    }
}

#[test]
fn orders_and_variables() {
    for f in all_families() {
        let expected_order = if f.id.starts_with('6') || f.id.starts_with('7') { 3 } else { 2 };
        assert_eq!(f.order, expected_order, "{}", f.id);
        let nvars = if f.id.starts_with('5') { 4 } else { 2 };
        assert_eq!(f.vars.len(), nvars, "{}", f.id);
        assert!(!f.solution.free_variables().contains("w"), "{}", f.id);
        assert!(f.arbitrary_functions().count() >= 2, "{}", f.id);
    }
}

#[test]
fn constraints_are_decidable_on_sampled_values() {
    for f in all_families() {
        let s = sample_scenario(f, 8).unwrap();
        for c in &f.constraints {
            let set = IndexSet::value_only(f.vars.len());
            for p in s.points.iter().take(3) {
                let v = eval_jet(&c.expr, &f.var_refs(), p, &s.bindings(), &set, &NumericConfig::default())
                    .unwrap()
                    .value();
                assert!(v.is_finite() && v != 0.0, "{}: {} = {v}", f.id, c.text);
            }
        }
    }
}

#[test]
fn rootof_families() {
    let with: Vec<&str> = all_families()
        .iter()
        .filter(|f| f.solution.contains_root_of())
        .map(|f| f.id.as_str())
        .collect();
    assert_eq!(with, ["3.7", "3.8", "3.10", "5.2", "5.3"]);
}
