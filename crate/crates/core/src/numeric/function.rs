//! Concrete stand-ins for arbitrary functions.

use serde::{Deserialize, Serialize};

use super::jet::{taylor, IndexSet, Jet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<u8>,
}

/// `amplitude · sin(Σ frequencies[i]·arg_i + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequencies: Vec<f64>,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Polynomial,
    PolynomialSinusoid,
}

/// `offset + Σ monomials + sinusoid`, with analytic derivatives of any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInstance {
    pub arity: usize,
    pub offset: f64,
    pub terms: Vec<Monomial>,
    pub sinusoid: Option<Sinusoid>,
}

impl FunctionInstance {
    pub fn constant(arity: usize, value: f64) -> Self {
        FunctionInstance {
            arity,
            offset: value,
            terms: Vec::new(),
            sinusoid: None,
        }
    }

    /// Univariate polynomial `offset + Σ coefs[k]·x^(k+1)`.
    pub fn polynomial(offset: f64, coefs: &[f64]) -> Self {
        FunctionInstance {
            arity: 1,
            offset,
            terms: coefs
                .iter()
                .enumerate()
                .map(|(k, &c)| Monomial {
                    coef: c,
                    exps: vec![k as u8 + 1],
                })
                .collect(),
            sinusoid: None,
        }
    }

    pub fn kind(&self) -> FunctionKind {
        if self.sinusoid.is_some() {
            FunctionKind::PolynomialSinusoid
        } else {
            FunctionKind::Polynomial
        }
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        let mut v = self.offset;
        for m in &self.terms {
            let mut p = m.coef;
            for (a, &e) in args.iter().zip(&m.exps) {
                p *= a.powi(e as i32);
            }
            v += p;
        }
        if let Some(s) = &self.sinusoid {
            let theta: f64 = s.phase + s.frequencies.iter().zip(args).map(|(f, a)| f * a).sum::<f64>();
            v += s.amplitude * theta.sin();
        }
        v
    }

    /// The partial derivative with multi-index `counts` (one entry per
    /// argument).
    pub fn derivative(&self, counts: &[u8]) -> FunctionInstance {
        if counts.iter().all(|&c| c == 0) {
            return self.clone();
        }
        let mut terms = Vec::new();
        for m in &self.terms {
            let mut coef = m.coef;
            let mut exps = m.exps.clone();
            for (e, &c) in exps.iter_mut().zip(counts) {
                for _ in 0..c {
                    coef *= *e as f64;
                    *e = e.saturating_sub(1);
                }
            }
            if coef != 0.0 {
                terms.push(Monomial { coef, exps });
            }
        }
        let sinusoid = self.sinusoid.as_ref().map(|s| {
            let mut amplitude = s.amplitude;
            let mut order = 0;
            for (f, &c) in s.frequencies.iter().zip(counts) {
                amplitude *= f.powi(c as i32);
                order += c as u32;
            }
            Sinusoid {
                amplitude,
                frequencies: s.frequencies.clone(),
                phase: s.phase + order as f64 * std::f64::consts::FRAC_PI_2,
            }
        });
        FunctionInstance {
            arity: self.arity,
            offset: 0.0,
            terms,
            sinusoid,
        }
    }

    pub fn eval_jet(&self, args: &[Jet], set: &IndexSet) -> Jet {
        if args.iter().all(|a| a.is_constant()) {
            let vals: smallvec::SmallVec<[f64; 4]> = args.iter().map(|a| a.value()).collect();
            return Jet::constant(self.eval(&vals));
        }
        let max_exp: Vec<u8> = (0..self.arity)
            .map(|i| self.terms.iter().map(|m| m.exps[i]).max().unwrap_or(0))
            .collect();
        // powers[i][e] = args[i]^e
        let powers: Vec<Vec<Jet>> = args
            .iter()
            .zip(&max_exp)
            .map(|(a, &n)| {
                let mut p = vec![Jet::constant(1.0)];
                for e in 1..=n as usize {
                    let next = p[e - 1].mul(a, set);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = Jet::constant(self.offset);
        for m in &self.terms {
            let mut term = Jet::constant(m.coef);
            for (i, &e) in m.exps.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[i][e as usize], set);
                }
            }
            out = out.add(&term);
        }
        if let Some(s) = &self.sinusoid {
            let mut theta = Jet::constant(s.phase);
            for (f, a) in s.frequencies.iter().zip(args) {
                theta.add_scaled(a, *f);
            }
            let d = taylor::sin(theta.value(), set.max_degree());
            out.add_scaled(&theta.compose(&d, set), s.amplitude);
        }
        out
    }

    /// Human-readable formula, e.g. `0.7 + 0.1*a1 - 0.2*a1^2`.
    pub fn describe(&self, arg_names: &[&str]) -> String {
        let mut s = format!("{}", self.offset);
        for m in &self.terms {
            let sign = if m.coef < 0.0 { " - " } else { " + " };
            s.push_str(sign);
            s.push_str(&format!("{}", m.coef.abs()));
            for (n, &e) in arg_names.iter().zip(&m.exps) {
                match e {
                    0 => {}
                    1 => s.push_str(&format!("*{n}")),
                    _ => s.push_str(&format!("*{n}^{e}")),
                }
            }
        }
        if let Some(sn) = &self.sinusoid {
            let arg: Vec<String> = sn
                .frequencies
                .iter()
                .zip(arg_names)
                .map(|(f, n)| format!("{f}*{n}"))
                .collect();
            s.push_str(&format!(" + {}*sin({} + {})", sn.amplitude, arg.join(" + "), sn.phase));
        }
        s
    }
}
