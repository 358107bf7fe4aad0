//! Globally adaptive Gauss-Kronrod quadrature on jet-valued integrands:
//! the 7/15 pair in general, the 3/7 pair for short extensions of a known
//! integral.

use smallvec::{smallvec, SmallVec};

use super::jet::Jet;
use super::NumericConfig;
use crate::error::EvalError;

/// Kronrod abscissae (descending, centre last), Kronrod weights, and the
/// Gauss weights of the odd-indexed abscissae followed by the centre.
struct Rule {
    xgk: &'static [f64],
    wgk: &'static [f64],
    wg: &'static [f64],
}

const K15: Rule = Rule {
    xgk: &XGK,
    wgk: &WGK,
    wg: &WG,
};

const K7: Rule = Rule {
    xgk: &[0.960_491_268_708_020_3, 0.774_596_669_241_483_4, 0.434_243_749_346_802_6, 0.0],
    wgk: &[0.104_656_226_026_467_3, 0.268_488_089_868_333_4, 0.401_397_414_775_962_2, 0.450_916_538_658_474_1],
    wg: &[5.0 / 9.0, 8.0 / 9.0],
};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

type Comp = SmallVec<[f64; 10]>;

struct Segment {
    a: f64,
    b: f64,
    result: Jet,
    err: Comp,
    roundoff: Comp,
}

fn grow(v: &mut Comp, n: usize) {
    if v.len() < n {
        v.resize(n, 0.0);
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, rule: &Rule) -> Result<Segment, EvalError>
where
    F: FnMut(f64) -> Result<Jet, EvalError>,
{
    let centr = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let m = rule.xgk.len() - 1;
    let c = m; // centre position in the Kronrod and Gauss weight tables
    let cg = rule.wg.len() - 1;
    // Stored as: centre, then (c - h x_j, c + h x_j) for j = 0..m. The
    // calls run left to right so that RootOf seeds and memoised integrals
    // carried between consecutive integrand calls stay close.
    let mut values: SmallVec<[Jet; 15]> = smallvec![Jet::constant(0.0); 2 * m + 1];
    for j in 0..m {
        values[1 + 2 * j] = f(centr - hl * rule.xgk[j])?;
    }
    values[0] = f(centr)?;
    for j in (0..m).rev() {
        values[2 + 2 * j] = f(centr + hl * rule.xgk[j])?;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::QuadratureNonconvergence {
            a,
            b,
            error: f64::INFINITY,
        });
    }
    let n = values.iter().map(|v| v.coeffs().len()).max().unwrap_or(1);
    let mut resk: Comp = smallvec![0.0; n];
    let mut resg: Comp = smallvec![0.0; n];
    let mut resabs: Comp = smallvec![0.0; n];
    for k in 0..n {
        let fc = values[0].coeff(k);
        let mut rk = rule.wgk[c] * fc;
        let mut rg = rule.wg[cg] * fc;
        let mut ra = rule.wgk[c] * fc.abs();
        for j in 0..m {
            let f1 = values[1 + 2 * j].coeff(k);
            let f2 = values[2 + 2 * j].coeff(k);
            rk += rule.wgk[j] * (f1 + f2);
            ra += rule.wgk[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                rg += rule.wg[j / 2] * (f1 + f2);
            }
        }
        resk[k] = rk;
        resg[k] = rg;
        resabs[k] = ra;
    }
    let mut err: Comp = smallvec![0.0; n];
    let mut roundoff: Comp = smallvec![0.0; n];
    for k in 0..n {
        let reskh = 0.5 * resk[k];
        let mut resasc = rule.wgk[c] * (values[0].coeff(k) - reskh).abs();
        for j in 0..m {
            resasc += rule.wgk[j]
                * ((values[1 + 2 * j].coeff(k) - reskh).abs()
                    + (values[2 + 2 * j].coeff(k) - reskh).abs());
        }
        let resasc = resasc * hl.abs();
        let resabs_k = resabs[k] * hl.abs();
        let mut e = ((resk[k] - resg[k]) * hl).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        let floor = 50.0 * f64::EPSILON * resabs_k;
        if resabs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(floor);
        }
        err[k] = e;
        roundoff[k] = floor;
    }
    let result = if n == 1 {
        Jet::constant(resk[0] * hl)
    } else {
        Jet(resk.iter().map(|r| r * hl).collect())
    };
    Ok(Segment {
        a,
        b,
        result,
        err,
        roundoff,
    })
}

/// `∫_a^b f`, refining the subinterval with the worst component error until
/// every component meets `max(abs_tol, rel_tol·|total|)`. Returns the jet
/// and the largest component error estimate.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &NumericConfig) -> Result<(Jet, f64), EvalError>
where
    F: FnMut(f64) -> Result<Jet, EvalError>,
{
    adaptive(f, a, b, cfg, &K15, None)
}

/// `∫_a^b f` for a short stretch `[a, b]` extending an integral of size
/// `reference`: the 3/7 pair, with the relative tolerance taken against
/// `reference + ∫_a^b f`.
pub fn integrate_extension<F>(f: F, a: f64, b: f64, cfg: &NumericConfig, reference: &Jet) -> Result<(Jet, f64), EvalError>
where
    F: FnMut(f64) -> Result<Jet, EvalError>,
{
    adaptive(f, a, b, cfg, &K7, Some(reference))
}

fn adaptive<F>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &NumericConfig,
    rule: &Rule,
    reference: Option<&Jet>,
) -> Result<(Jet, f64), EvalError>
where
    F: FnMut(f64) -> Result<Jet, EvalError>,
{
    if a == b {
        return Ok((Jet::constant(0.0), 0.0));
    }
    let min_width = (b - a).abs() * 0.5f64.powi(cfg.quad_max_depth as i32);
    let mut segs = vec![kronrod(&mut f, a, b, rule)?];
    let max_segments = 4 * cfg.quad_max_depth.max(1) * 8;
    loop {
        let n = segs.iter().map(|s| s.result.coeffs().len()).max().unwrap_or(1);
        let mut total: Comp = smallvec![0.0; n];
        let mut err: Comp = smallvec![0.0; n];
        let mut floor: Comp = smallvec![0.0; n];
        for s in &segs {
            for k in 0..n {
                total[k] += s.result.coeff(k);
                err[k] += s.err.get(k).copied().unwrap_or(0.0);
                floor[k] += s.roundoff.get(k).copied().unwrap_or(0.0);
            }
        }
        let tol: Comp = (0..n)
            .map(|k| {
                let size = match reference {
                    Some(r) => (total[k] + r.coeff(k)).abs(),
                    None => total[k].abs(),
                };
                (cfg.quad_abs_tol.max(cfg.quad_rel_tol * size)).max(2.0 * floor[k])
            })
            .collect();
        let converged = (0..n).all(|k| err[k] <= tol[k]);
        if converged {
            let worst = err.iter().cloned().fold(0.0, f64::max);
            let result = if n == 1 {
                Jet::constant(total[0])
            } else {
                Jet(total)
            };
            return Ok((result, worst));
        }
        // Worst segment by error relative to the component tolerance.
        let (idx, _) = segs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = s
                    .err
                    .iter()
                    .enumerate()
                    .map(|(k, e)| e / tol[k])
                    .fold(0.0, f64::max);
                (i, r)
            })
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let seg = segs.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if (seg.b - seg.a).abs() <= min_width || segs.len() + 2 > max_segments {
            let e = seg.err.iter().cloned().fold(0.0, f64::max);
            return Err(EvalError::QuadratureNonconvergence {
                a: seg.a,
                b: seg.b,
                error: e,
            });
        }
        let left = kronrod(&mut f, seg.a, mid, rule)?;
        let right = kronrod(&mut f, mid, seg.b, rule)?;
        segs.push(left);
        segs.push(right);
        for s in segs.iter_mut() {
            grow(&mut s.err, n);
            grow(&mut s.roundoff, n);
        }
    }
}

/// Gauss-Legendre rule on [0, 1] with `n` points (1 to 3).
pub fn gauss_legendre_unit(n: usize) -> &'static [(f64, f64)] {
    const R1: [(f64, f64); 1] = [(0.5, 1.0)];
    const R2: [(f64, f64); 2] = [
        (0.211_324_865_405_187_1, 0.5),
        (0.788_675_134_594_812_9, 0.5),
    ];
    const R3: [(f64, f64); 3] = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 4.0 / 9.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    match n {
        0 | 1 => &R1,
        2 => &R2,
        _ => &R3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    fn scalar(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        integrate(|x| Ok(Jet::constant(f(x))), a, b, &cfg()).unwrap().0.value()
    }

    #[test]
    fn closed_forms() {
        assert!((scalar(|x| x * x, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((scalar(f64::exp, 0.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-13);
        assert!((scalar(|x| 1.0 / (1.0 + x * x), 0.0, 1.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-13);
        assert!((scalar(f64::sqrt, 0.0, 1.0) - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn extension_rule_is_exact_on_low_degree() {
        let cfg = cfg();
        let reference = Jet::constant(1.0);
        let (v, _) = integrate_extension(|x| Ok(Jet::constant(x.powi(5) + x)), 1.0, 1.1, &cfg, &reference).unwrap();
        let exact = (1.1f64.powi(6) - 1.0) / 6.0 + (1.21 - 1.0) / 2.0;
        assert!((v.value() - exact).abs() < 1e-15);
        let (v, _) = integrate_extension(|x| Ok(Jet::constant(x.cos())), 0.0, 2.0, &cfg, &reference).unwrap();
        assert!((v.value() - 2f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_change_sign() {
        assert!((scalar(|x| x, 1.0, 0.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn nested() {
        let inner = |u: f64| scalar(|x| x, 0.0, u);
        assert!((scalar(inner, 0.0, 1.0) - 1.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn singular_integrand_reports_nonconvergence() {
        let r = integrate(|x| Ok(Jet::constant(1.0 / (x - 0.3))), 0.0, 1.0, &cfg());
        assert!(matches!(r, Err(EvalError::QuadratureNonconvergence { .. })));
    }
}
