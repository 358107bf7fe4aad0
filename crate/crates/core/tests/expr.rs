use pdegensol_core::catalog::{all_families, PdeFamily};
use pdegensol_core::expr::{differentiate, parse, simplify, substitute, Binding, Env, Expr};
use pdegensol_core::numeric::{Bindings, IndexSet, NumericConfig};
use pdegensol_core::verifier::{sample_scenario, Scenario};
use pdegensol_core::{eval_jet, EvalError};
use proptest::prelude::*;

fn env() -> Env {
    Env::new().vars(&["t", "x"]).params(&["a", "b"]).func("F", 1)
}

const POOL: [&str; 8] = [
    "a*t*x^2 + b",
    "exp(b*t)*sin(x) - a/x",
    "sqrt(1 + t^2*x^2)*ln(2 + x)",
    "F(t)*exp(-a*x)/(1 + F(x)^2)",
    "(t + x)^3 - cos(a*t*x)",
    "int(xi, base, x, exp(-t*xi)*F(xi))",
    "rootof(Z, Z^3 + Z - t*x - a, 0)",
    "int(xi, base, x, exp(int(eta, base(x), xi, t + F(eta))))",
];

fn bindings() -> Bindings {
    let mut b = Bindings::default();
    b.params.insert("a".into(), 0.7);
    b.params.insert("b".into(), -0.4);
    b.functions.insert("F".into(), pdegensol_core::FunctionInstance::polynomial(0.5, &[0.3, -0.2, 0.1]));
    b.base_points.insert("x".into(), 0.3);
    b
}

fn val(e: &Expr, p: &[f64], b: &Bindings) -> Result<f64, EvalError> {
    let set = IndexSet::value_only(p.len());
    let vars: Vec<&str> = if p.len() == 2 { vec!["t", "x"] } else { vec!["x1", "x2", "x3", "x4"] };
    Ok(eval_jet(e, &vars, p, b, &set, &NumericConfig::default())?.value())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn differentiation_is_linear(
        i in 0..POOL.len(),
        j in 0..POOL.len(),
        alpha in -3.0f64..3.0,
        v in 0..2usize,
        pts in prop::collection::vec((0.4f64..1.2, 0.4f64..1.2), 10),
    ) {
        let e1 = parse(POOL[i], &env()).unwrap();
        let e2 = parse(POOL[j], &env()).unwrap();
        let var = ["t", "x"][v];
        let combo = Expr::add(vec![Expr::mul(vec![Expr::constant(alpha), e1.clone()]), e2.clone()]);
        let lhs = differentiate(&combo, var);
        let (d1, d2) = (differentiate(&e1, var), differentiate(&e2, var));
        let b = bindings();
        for (t, x) in pts {
            let p = [t, x];
            let l = val(&lhs, &p, &b).unwrap();
            let r = alpha * val(&d1, &p, &b).unwrap() + val(&d2, &p, &b).unwrap();
            prop_assert!(close(l, r, 1e-10), "{} / {}: {} vs {}", POOL[i], POOL[j], l, r);
        }
    }

    #[test]
    fn simplify_preserves_values(i in 0..POOL.len(), t in 0.4f64..1.2, x in 0.4f64..1.2) {
        let e = parse(POOL[i], &env()).unwrap();
        let d = differentiate(&differentiate(&e, "x"), "t");
        let b = bindings();
        for e in [e, d] {
            let s = simplify(&e);
            let (u, w) = (val(&e, &[t, x], &b).unwrap(), val(&s, &[t, x], &b).unwrap());
            prop_assert!(close(u, w, 1e-12), "{}: {} vs {}", e, u, w);
        }
    }
}

fn catalog_exprs(f: &PdeFamily) -> Vec<&Expr> {
    vec![&f.solution, &f.pde_lhs]
}

#[test]
fn catalog_round_trips_through_printer() {
    for f in all_families() {
        for e in catalog_exprs(f) {
            let printed = e.to_string();
            let back = f.parse_expr(&printed).unwrap_or_else(|err| panic!("{}: {err}\n{printed}", f.id));
            assert_eq!(back.flattened(), e.flattened(), "{}", f.id);
        }
    }
}

#[test]
fn mixed_partials_commute_on_catalog_solutions() {
    for f in all_families() {
        let s: Scenario = sample_scenario(f, 21).unwrap();
        let (u, v) = (f.vars[0].as_str(), f.vars[1].as_str());
        let uv = differentiate(&differentiate(&f.solution, u), v);
        let vu = differentiate(&differentiate(&f.solution, v), u);
        let b = s.bindings();
        for p in s.points.iter().take(3) {
            let (a, c) = (val(&uv, p, &b).unwrap(), val(&vu, p, &b).unwrap());
            assert!(close(a, c, 1e-8), "{}: {a} vs {c}", f.id);
        }
    }
}

#[test]
fn simplify_preserves_catalog_solutions() {
    for f in all_families() {
        let s = sample_scenario(f, 5).unwrap();
        let simple = simplify(&f.solution);
        let b = s.bindings();
        for p in s.points.iter().take(3) {
            let (a, c) = (val(&f.solution, p, &b).unwrap(), val(&simple, p, &b).unwrap());
            assert!(close(a, c, 1e-12), "{}: {a} vs {c}", f.id);
        }
    }
}

#[test]
fn substitution_examples() {
    let e = Env::new().vars(&["t", "x"]).params(&["a", "c"]);
    let ax = parse("a*x", &e).unwrap();
    let out = substitute(&ax, &[("a".into(), Binding::Value(Expr::constant(2.0)))]).unwrap();
    assert_eq!(simplify(&out), parse("2*x", &e).unwrap());

    // A binding whose free name collides with the dummy forces a rename.
    let integral = parse("int(xi, base, x, xi + c)", &e).unwrap();
    let out = substitute(&integral, &[("c".into(), Binding::Value(Expr::var("xi")))]).unwrap();
    assert!(out.free_variables().contains("xi"));
    assert!(out.free_variables().contains("x"));
    let mut b = Bindings::default();
    b.base_points.insert("x".into(), 0.0);
    // ∫_0^1 (ξ' + ξ) dξ' with ξ treated as a free parameter.
    let free = Env::new().vars(&["t", "x"]).params(&["xi"]);
    let reparsed = parse(&out.to_string(), &free).unwrap();
    b.params.insert("xi".into(), 3.0);
    assert!((val(&reparsed, &[0.0, 1.0], &b).unwrap() - 3.5).abs() < 1e-12);

    assert!(substitute(&integral, &[("xi".into(), Binding::Value(Expr::one()))]).is_err());
}

#[test]
fn free_variable_examples() {
    let e = Env::new().vars(&["t", "x"]).params(&["a", "b", "c"]);
    let names = |s: &str| parse(s, &e).unwrap().free_variables().into_iter().collect::<Vec<_>>();
    assert_eq!(names("a*x + b"), ["a", "b", "x"]);
    assert_eq!(names("int(xi, base, x, xi*t)"), ["t", "x"]);
    assert_eq!(names("rootof(Z, Z - c)"), ["c"]);
}

#[test]
fn simplify_examples() {
    let e = env();
    let p = |s: &str| parse(s, &e).unwrap();
    assert_eq!(simplify(&p("x + 0")), p("x"));
    assert_eq!(simplify(&p("2*3")), p("6"));
    assert_eq!(simplify(&p("x^0")), p("1"));
    assert_eq!(simplify(&p("1*x*(a*0 + 1)")), p("x"));
}
