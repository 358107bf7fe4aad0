//! Scalar root finding: outward bracket scan from a seed, then a
//! safeguarded Newton/bisection iteration inside the bracket.

use super::NumericConfig;
use crate::error::EvalError;

/// Outward scan limits.
const SCAN_STEPS: usize = 60;
const SCAN_GROWTH: f64 = 1.4;

struct Side {
    x: f64,
    fx: f64,
    step: f64,
    dir: f64,
    alive: bool,
}

/// An accepted root with `|Φ|` at (or, after polishing, bounding) it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub z: f64,
    pub residual: f64,
    pub slope: f64,
}

/// Root of `phi` near `seed`. `phi` returns `(Φ(z), Φ'(z))`.
///
/// The bracket scan walks outward on both sides of the seed with growing
/// steps; `skip` sign changes are passed over before one is accepted, which
/// selects an alternate branch. A side whose evaluation fails stops
/// expanding.
pub fn find_root<F>(mut phi: F, seed: f64, skip: usize, cfg: &NumericConfig) -> Result<Root, EvalError>
where
    F: FnMut(f64) -> Result<(f64, f64), EvalError>,
{
    let (f0, d0) = phi(seed)?;
    if skip == 0 {
        if let Some(z) = newton_from(&mut phi, seed, f0, d0, cfg)? {
            return Ok(z);
        }
    }
    let (lo, flo, hi, fhi) = bracket(&mut phi, seed, f0, skip)?;
    refine(&mut phi, lo, flo, hi, fhi, cfg)
}

/// Plain Newton from the seed, accepted only while `|Φ|` contracts
/// steadily and the iterate stays within a quarter of the seed's scale, so
/// that it cannot jump to a distant branch. One step past the tolerance
/// polishes the root.
fn newton_from<F>(phi: &mut F, seed: f64, f0: f64, d0: f64, cfg: &NumericConfig) -> Result<Option<Root>, EvalError>
where
    F: FnMut(f64) -> Result<(f64, f64), EvalError>,
{
    let reach = 0.25 * seed.abs().max(1.0);
    let (mut z, mut fz, mut dz) = (seed, f0, d0);
    for _ in 0..8 {
        if fz.abs() <= cfg.root_tol {
            check_slope(z, dz)?;
            return Ok(Some(polish(z, fz, dz)));
        }
        if dz == 0.0 || !dz.is_finite() {
            return Ok(None);
        }
        let next = z - fz / dz;
        if !next.is_finite() || (next - seed).abs() > reach {
            return Ok(None);
        }
        match phi(next) {
            Ok((fn_, dn)) if fn_.is_finite() && fn_.abs() < 0.5 * fz.abs() => {
                z = next;
                fz = fn_;
                dz = dn;
            }
            _ => return Ok(None),
        }
    }
    Ok(None)
}

/// One extra Newton step past the tolerance. Newton converges
/// quadratically there, so the step is taken without re-evaluating `Φ`,
/// and only when it is tiny. The reported residual is the pre-step value,
/// an upper bound.
fn polish(z: f64, fz: f64, dz: f64) -> Root {
    let step = fz / dz;
    let z = if step.is_finite() && step.abs() <= 1e-8 * z.abs().max(1.0) {
        z - step
    } else {
        z
    };
    Root {
        z,
        residual: fz.abs(),
        slope: dz,
    }
}

fn check_slope(z: f64, slope: f64) -> Result<(), EvalError> {
    if slope.abs() < 1e-10 || !slope.is_finite() {
        return Err(EvalError::DegenerateRoot { z, slope });
    }
    Ok(())
}

fn bracket<F>(phi: &mut F, seed: f64, f0: f64, mut skip: usize) -> Result<(f64, f64, f64, f64), EvalError>
where
    F: FnMut(f64) -> Result<(f64, f64), EvalError>,
{
    let h0 = 1e-2 * seed.abs().max(1.0);
    let mut sides = [
        Side {
            x: seed,
            fx: f0,
            step: h0,
            dir: 1.0,
            alive: true,
        },
        Side {
            x: seed,
            fx: f0,
            step: h0,
            dir: -1.0,
            alive: true,
        },
    ];
    for _ in 0..SCAN_STEPS {
        if !sides.iter().any(|s| s.alive) {
            break;
        }
        for s in sides.iter_mut() {
            if !s.alive {
                continue;
            }
            let nx = s.x + s.dir * s.step;
            match phi(nx) {
                Ok((fx, _)) if fx.is_finite() => {
                    let crossed = fx == 0.0 || fx.signum() != s.fx.signum();
                    let (px, pf) = (s.x, s.fx);
                    s.x = nx;
                    s.fx = fx;
                    s.step *= SCAN_GROWTH;
                    if crossed {
                        if skip == 0 {
                            return Ok(if px < nx { (px, pf, nx, fx) } else { (nx, fx, px, pf) });
                        }
                        skip -= 1;
                    }
                }
                _ => s.alive = false,
            }
        }
    }
    Err(EvalError::RootNotFound { seed })
}

fn refine<F>(phi: &mut F, mut lo: f64, mut flo: f64, mut hi: f64, fhi: f64, cfg: &NumericConfig) -> Result<Root, EvalError>
where
    F: FnMut(f64) -> Result<(f64, f64), EvalError>,
{
    for (x, fx) in [(lo, flo), (hi, fhi)] {
        if fx == 0.0 {
            let (_, d) = phi(x)?;
            check_slope(x, d)?;
            return Ok(Root {
                z: x,
                residual: 0.0,
                slope: d,
            });
        }
    }
    let mut x = if flo.abs() < fhi.abs() { lo } else { hi };
    let mut dx_old = hi - lo;
    let mut best = (f64::INFINITY, x, 0.0);
    for _ in 0..cfg.root_max_iter {
        let (fx, dfx) = phi(x)?;
        if fx.abs() < best.0 {
            best = (fx.abs(), x, dfx);
        }
        if fx.abs() <= cfg.root_tol {
            check_slope(x, dfx)?;
            return Ok(polish(x, fx, dfx));
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let inside = dfx != 0.0 && newton.is_finite() && newton > lo.min(hi) && newton < lo.max(hi);
        let slow = (2.0 * fx).abs() > (dx_old * dfx).abs();
        let next = if inside && !slow {
            newton
        } else {
            0.5 * (lo + hi)
        };
        dx_old = (next - x).abs();
        if next == x || (hi - lo).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
        x = next;
    }
    let (fabs, z, slope) = best;
    if fabs <= cfg.root_tol {
        check_slope(z, slope)?;
        return Ok(Root {
            z,
            residual: fabs,
            slope,
        });
    }
    Err(EvalError::RootNotFound { seed: z })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    #[test]
    fn cube_root_of_eight() {
        let z = find_root(|z| Ok((z * z * z - 8.0, 3.0 * z * z)), 1.0, 0, &cfg()).unwrap().z;
        assert!((z * z * z - 8.0).abs() <= 1e-12);
    }

    #[test]
    fn branch_follows_seed() {
        let pos = find_root(|z| Ok((z * z - 4.0, 2.0 * z)), 1.0, 0, &cfg()).unwrap().z;
        let neg = find_root(|z| Ok((z * z - 4.0, 2.0 * z)), -1.0, 0, &cfg()).unwrap().z;
        assert!((pos - 2.0).abs() < 1e-12);
        assert!((neg + 2.0).abs() < 1e-12);
    }

    #[test]
    fn skip_selects_other_branch() {
        let z = find_root(|z| Ok((z * z - 4.0, 2.0 * z)), 1.0, 1, &cfg()).unwrap().z;
        assert!((z + 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_real_root() {
        let r = find_root(|z| Ok((z * z + 1.0, 2.0 * z)), 0.5, 0, &cfg());
        assert!(matches!(r, Err(EvalError::RootNotFound { .. })));
    }

    #[test]
    fn flat_root_at_seed_is_degenerate() {
        let r = find_root(|z| Ok((z * z, 2.0 * z)), 0.0, 0, &cfg());
        assert!(matches!(r, Err(EvalError::DegenerateRoot { .. })));
    }
}
