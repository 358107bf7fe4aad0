use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pdegensol_bench::{fixture, REPRESENTATIVE};
use pdegensol_core::numeric::{integrate, Jet, NumericConfig};
use pdegensol_core::verifier::{crosscheck_derivatives, residual_at, Compiled};
use pdegensol_core::{verify_family, VerifyConfig};

fn quadrature(c: &mut Criterion) {
    let cfg = NumericConfig::default();
    c.bench_function("quad/1+x^2", |b| {
        b.iter(|| integrate(|x| Ok(Jet::constant(1.0 / (1.0 + x * x))), 0.0, black_box(3.0), &cfg).unwrap())
    });
}

fn residuals(c: &mut Criterion) {
    let mut g = c.benchmark_group("residual");
    for id in REPRESENTATIVE {
        let (fam, s, p) = fixture(id);
        let compiled = Compiled::new(fam, &s).unwrap();
        g.bench_function(format!("{id}/compiled"), |b| {
            let cfg = NumericConfig::default();
            b.iter(|| {
                let mut ev = compiled.evaluator(&cfg);
                compiled.residual(&mut ev, black_box(&p)).unwrap()
            })
        });
        g.bench_function(format!("{id}/one-shot"), |b| b.iter(|| residual_at(fam, &s, black_box(&p)).unwrap()));
    }
    g.finish();
}

fn crosscheck(c: &mut Criterion) {
    let mut g = c.benchmark_group("crosscheck");
    g.sample_size(10);
    for id in ["3.1", "6.1"] {
        let (fam, s, p) = fixture(id);
        g.bench_function(id, |b| b.iter(|| crosscheck_derivatives(fam, &s, black_box(&p)).unwrap()));
    }
    g.finish();
}

fn verify(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    let cfg = VerifyConfig {
        n_scenarios: 1,
        n_points: 5,
        xcheck_points: 1,
        seed: 1,
        ..VerifyConfig::default()
    };
    for id in ["3.1", "3.3"] {
        let (fam, _, _) = fixture(id);
        g.bench_function(id, |b| b.iter(|| verify_family(fam, &cfg)));
    }
    g.finish();
}

criterion_group!(benches, quadrature, residuals, crosscheck, verify);
criterion_main!(benches);
