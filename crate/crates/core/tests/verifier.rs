use std::collections::BTreeMap;

use pdegensol_core::catalog::{all_families, get_family, PdeFamily};
use pdegensol_core::numeric::FunctionInstance;
use pdegensol_core::verifier::{
    base_point_invariance, crosscheck_derivatives, grid, residual_at, residual_fd_at, sample_scenario,
    sample_scenario_with, verify_family, SampleOptions, Scenario, Verdict, VerificationReport, VerifyConfig,
};
use pdegensol_core::EvalError;

fn fam(id: &str) -> &'static PdeFamily {
    get_family(id).unwrap()
}

fn small(seed: u64) -> VerifyConfig {
    VerifyConfig {
        n_scenarios: 2,
        n_points: 6,
        seed,
        ..VerifyConfig::default()
    }
}

/// A sampled scenario with its parameters and functions replaced.
fn pinned(f: &PdeFamily, params: &[(&str, f64)], funcs: &[(&str, FunctionInstance)]) -> Scenario {
    let mut s = sample_scenario(f, 11).unwrap();
    for (k, v) in params {
        s.params.insert(k.to_string(), *v);
    }
    for (k, v) in funcs {
        s.functions.insert(k.to_string(), v.clone());
    }
    s
}

#[test]
fn residual_3_1_with_c_zero() {
    let f = fam("3.1");
    let s = pinned(
        f,
        &[("c", 0.0), ("b", 1.0)],
        &[
            ("F", FunctionInstance::polynomial(1.0, &[0.0, 1.0])),
            ("G", FunctionInstance::polynomial(0.0, &[0.1])),
        ],
    );
    let (_, rel) = residual_at(f, &s, &[0.5, 0.7]).unwrap();
    assert!(rel < 1e-9, "rel {rel}");
    let (_, fd_rel) = residual_fd_at(f, &s, &[0.5, 0.7]).unwrap();
    assert!(fd_rel < 1e-3, "fd rel {fd_rel}");
}

#[test]
fn residual_6_1_fixed_functions() {
    let f = fam("6.1");
    let s = pinned(
        f,
        &[],
        &[
            ("F", FunctionInstance::polynomial(0.0, &[1.0])),
            ("G", FunctionInstance::polynomial(1.0, &[0.0, 1.0])),
            ("H", FunctionInstance::polynomial(0.0, &[1.0])),
        ],
    );
    let (_, rel) = residual_at(f, &s, &[0.3, 0.4]).unwrap();
    assert!(rel < 1e-9, "rel {rel}");
}

#[test]
fn residual_7_2_fixed_parameters() {
    let f = fam("7.2");
    let s = pinned(
        f,
        &[("a", 1.0), ("b", 0.1), ("k", 2.0)],
        &[
            ("F", FunctionInstance::polynomial(1.0, &[0.3, -0.2])),
            ("G", FunctionInstance::polynomial(0.5, &[0.1, 0.0, 0.4])),
            ("H", FunctionInstance::polynomial(-0.7, &[0.25])),
        ],
    );
    let (_, rel) = residual_at(f, &s, &[1.2, 1.5]).unwrap();
    assert!(rel < 1e-9, "rel {rel}");
}

#[test]
fn residual_expression_has_no_unknown() {
    for f in all_families() {
        let r = pdegensol_core::build_residual(f);
        assert!(!r.free_variables().contains("w"), "{}", f.id);
    }
}

#[test]
fn corrupted_sign_fails_with_crosscheck_passing() {
    // 3.2 with the sign of the integral term flipped.
    let f = fam("3.2")
        .with_solution("(c*int(xi, base, x, exp(xi*(1 - k*t))*G(xi)) + F(t))*exp(-x*(1 - k*t))/G(x)")
        .unwrap();
    let r = verify_family(&f, &small(1));
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.xcheck_max_dev.unwrap() <= 1e-4);
    let worst = r.worst.expect("worst point reported");
    assert_eq!(worst.terms.len(), f.pde_lhs.additive_terms().len());
}

#[test]
fn family_3_3_literal_exponent_reading_fails() {
    // Reading with b*x outside the 1/(2a) factor.
    let f = fam("3.3")
        .with_solution(
            "(-c/(2*a)*int(xi, base, x, exp(int(eta, base(x), xi, 2/(t + G(eta)))/(2*a) + b*xi)) + F(t))\
             *exp(-int(xi, base, x, 2/(t + G(xi)))/(2*a) + b*x)",
        )
        .unwrap();
    let r = verify_family(&f, &small(1));
    eprintln!("max rel {:e} xcheck {:?}", r.max_rel_residual, r.xcheck_max_dev);
    assert_eq!(r.verdict, Verdict::Fail, "max rel {}", r.max_rel_residual);
    assert!(r.xcheck_max_dev.unwrap() <= 1e-4);
    assert_eq!(verify_family(fam("3.3"), &small(1)).verdict, Verdict::Pass);
}

#[test]
fn family_4_3_partial_bracket_reading_fails() {
    // exp(B) multiplying only the first product.
    let f = fam("4.3")
        .with_solution(
            "let(B(t, x), int(tau, base(t), t, b(tau, x)),
              let(J(t, x), (exp(B(t, x))*a(t, x)*c(t, x)*(-c(t, x) + 2*b(t, x)) + 2*c(t, x)*diff(a(t, x), t)
                  - 2*diff(c(t, x), t)*a(t, x))/c(t, x)^2,
              let(W(t, x), exp(int(xi, base, x, c(t, xi)*exp(B(t, xi))/(-c(t, xi)*int(tau, base(t), t, J(tau, xi))
                  - 2*c(t, xi)*G(xi) + 2*a(t, xi)*exp(B(t, xi))))),
              -1/(2*W(t, x))*(int(xi, base, x, c(t, xi)*W(t, xi)/a(t, xi)) + F(t)))))",
        )
        .unwrap();
    let cfg = VerifyConfig {
        n_scenarios: 1,
        n_points: 4,
        xcheck_points: 2,
        seed: 1,
        ..VerifyConfig::default()
    };
    let r = verify_family(&f, &cfg);
    eprintln!("max rel {:e} xcheck {:?}", r.max_rel_residual, r.xcheck_max_dev);
    assert_eq!(r.verdict, Verdict::Fail, "max rel {}", r.max_rel_residual);
    assert!(r.xcheck_max_dev.unwrap() <= 1e-4);
}

#[test]
fn jet_and_fd_residuals_agree() {
    for id in ["3.1", "3.2", "3.4", "3.6", "3.9", "6.1", "6.3", "7.1", "7.2"] {
        let f = fam(id);
        let s = sample_scenario(f, 3).unwrap();
        for p in s.points.iter().take(3) {
            let (_, jet_rel) = residual_at(f, &s, p).unwrap();
            let (_, fd_rel) = residual_fd_at(f, &s, p).unwrap();
            // Both are normalised by the same term scale.
            assert!((jet_rel - fd_rel).abs() <= 1e-3, "{id}: jet {jet_rel} fd {fd_rel}");
        }
    }
}

#[test]
fn crosscheck_3_1_is_tight() {
    let f = fam("3.1");
    let s = sample_scenario(f, 5).unwrap();
    for p in &s.points[..5] {
        let dev = crosscheck_derivatives(f, &s, p).unwrap();
        assert!(dev < 1e-5, "dev {dev}");
    }
}

#[test]
fn constant_solution_has_zero_deviation() {
    let f = fam("3.1").with_solution("2.5").unwrap();
    let s = sample_scenario(fam("3.1"), 1).unwrap();
    let dev = crosscheck_derivatives(&f, &s, &s.points[0]).unwrap();
    assert!(dev <= 1e-12, "dev {dev}");
}

#[test]
fn tan_pole_is_a_domain_error() {
    let f = fam("5.1");
    let mut s = sample_scenario(f, 2).unwrap();
    let p = s.points[0].clone();
    let (c0, c1, c2) = (s.params["C0"], s.params["C1"], s.params["C2"]);
    let root = (4.0 * c0 * c2 - c1 * c1).sqrt();
    // G chosen so the tangent argument sits on its pole along the whole
    // integration path.
    let g = std::f64::consts::FRAC_PI_2 - p[3] * root / 2.0;
    s.functions.insert("G".into(), FunctionInstance::constant(3, g));
    let err = residual_at(f, &s, &p).unwrap_err();
    assert!(matches!(err, EvalError::Domain(_)), "{err}");
    assert!(crosscheck_derivatives(f, &s, &p).unwrap_err().is_domain());
}

#[test]
fn elementary_3_2_passes_at_defaults() {
    let r = verify_family(fam("3.2"), &VerifyConfig::default());
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.scenarios.len(), 5);
    assert!(r.max_rel_residual <= 1e-6);
}

#[test]
fn verdicts_survive_a_halved_box() {
    for id in ["3.1", "3.2", "6.1", "6.2", "7.2"] {
        let base = verify_family(fam(id), &small(2));
        let scaled = verify_family(
            fam(id),
            &VerifyConfig {
                domain_scale: 0.5,
                ..small(2)
            },
        );
        assert_eq!(base.verdict, Verdict::Pass, "{id}");
        assert_eq!(scaled.verdict, Verdict::Pass, "{id} scaled");
    }
}

#[test]
fn degenerate_members_still_solve() {
    for f in all_families() {
        // Zero each parameter that the constraints and hints still allow.
        let mut overrides = BTreeMap::new();
        for p in &f.params {
            overrides.insert(p.clone(), 0.0);
            let opts = SampleOptions {
                n_points: 4,
                overrides: overrides.clone(),
                ..SampleOptions::default()
            };
            if sample_scenario_with(f, 1, &opts).is_err() {
                overrides.remove(p);
            }
        }
        if overrides.is_empty() {
            continue;
        }
        let cfg = VerifyConfig {
            n_scenarios: 1,
            n_points: 4,
            xcheck_points: 1,
            seed: 1,
            overrides: overrides.clone(),
            ..VerifyConfig::default()
        };
        let r = verify_family(f, &cfg);
        assert!(
            r.max_rel_residual <= cfg.tol_for(f),
            "{} with {:?} zeroed: {}",
            f.id,
            overrides.keys().collect::<Vec<_>>(),
            r.max_rel_residual
        );
        assert_ne!(r.verdict, Verdict::Fail, "{}", f.id);
    }
}

#[test]
fn reports_are_deterministic() {
    let a = serde_json::to_string(&verify_family(fam("3.3"), &small(9))).unwrap();
    let b = serde_json::to_string(&verify_family(fam("3.3"), &small(9))).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&verify_family(fam("3.3"), &small(10))).unwrap();
    assert_ne!(a, c);
}

#[test]
fn report_json_round_trips() {
    let r = verify_family(fam("3.7"), &small(4));
    let text = serde_json::to_string_pretty(&r).unwrap();
    let back: VerificationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn base_point_shift_keeps_verdicts() {
    for id in ["3.1", "3.3"] {
        let (a, b) = base_point_invariance(fam(id), &small(1), 0.5).unwrap();
        assert_eq!(a, Verdict::Pass, "{id}");
        assert_eq!(a, b, "{id}");
    }
    assert!(base_point_invariance(fam("6.1"), &small(1), 0.5).is_none());
}

#[test]
fn sampling_respects_realness_conditions() {
    for seed in 0..20 {
        let s = sample_scenario(fam("3.3"), seed).unwrap();
        let a = s.params["a"].abs();
        assert!((0.3..=2.0).contains(&a), "a = {a}");

        let s = sample_scenario(fam("3.5"), seed).unwrap();
        let (a, b, k) = (s.params["a"], s.params["b"], s.params["k"]);
        assert!(b * b - 4.0 * a * k > 0.0);

        let s = sample_scenario(fam("3.9"), seed).unwrap();
        let m = s.params["m"];
        let g = &s.functions["G"];
        for p in grid(&s.domain, 12) {
            assert!(g.eval(&[p[1]]) + 2.0 * m * p[0] > 0.01);
        }
    }
}

#[test]
fn scenarios_are_deterministic_and_inside_the_box() {
    for f in all_families() {
        let a = sample_scenario(f, 42).unwrap();
        assert_eq!(a, sample_scenario(f, 42).unwrap(), "{}", f.id);
        for p in &a.points {
            for (v, (lo, hi)) in p.iter().zip(&a.domain) {
                assert!(lo <= v && v <= hi, "{}", f.id);
            }
        }
        for spec in f.arbitrary_functions() {
            assert_eq!(a.functions[&spec.name].arity, spec.arity, "{}", f.id);
        }
    }
}

#[test]
fn family_4_4_passes() {
    let cfg = VerifyConfig {
        n_scenarios: 1,
        n_points: 5,
        xcheck_points: 2,
        seed: 3,
        ..VerifyConfig::default()
    };
    let r = verify_family(fam("4.4"), &cfg);
    assert_eq!(r.verdict, Verdict::Pass, "max rel {}", r.max_rel_residual);
}
