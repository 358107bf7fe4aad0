//! Truncated multivariate Taylor arithmetic.
//!
//! A jet stores Taylor coefficients `c_α = ∂^α f / α!` for every multi-index
//! of a downward-closed [`IndexSet`]. Products are exact in the truncated
//! algebra because the complement of a downward-closed set is a monomial
//! ideal. A jet of length one is a constant and broadcasts against any set.

use smallvec::{smallvec, SmallVec};

pub const MAX_VARS: usize = 4;

/// Exponent vector over at most four independent variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(pub [u8; MAX_VARS]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; MAX_VARS])
    }

    pub fn unit(var: usize) -> Self {
        let mut m = [0; MAX_VARS];
        m[var] = 1;
        MultiIndex(m)
    }

    pub fn from_counts(counts: &[u8]) -> Self {
        let mut m = [0; MAX_VARS];
        m[..counts.len()].copy_from_slice(counts);
        MultiIndex(m)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        MultiIndex(m)
    }

    /// `α!`, the factor converting a Taylor coefficient to a partial.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u32).product::<u32>() as f64)
            .product()
    }

    /// Every β ≤ α.
    pub fn divisors(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero()];
        for v in 0..MAX_VARS {
            let mut next = Vec::new();
            for b in &out {
                for e in 0..=self.0[v] {
                    let mut m = b.0;
                    m[v] = e;
                    next.push(MultiIndex(m));
                }
            }
            out = next;
        }
        out
    }
}

/// Downward-closed set of multi-indices with a precomputed product table.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    nvars: usize,
    indices: Vec<MultiIndex>,
    /// For the coefficient at position `g`, `pairs[offsets[g]..offsets[g+1]]`
    /// lists the positions `(a, b)` with `indices[a] + indices[b] = indices[g]`.
    offsets: Vec<usize>,
    pairs: Vec<(u8, u8)>,
    max_degree: usize,
}

impl IndexSet {
    /// Downward closure of `generators`. Position 0 is always the value.
    pub fn closure(nvars: usize, generators: &[MultiIndex]) -> Self {
        assert!(nvars <= MAX_VARS);
        let mut all: Vec<MultiIndex> = vec![MultiIndex::zero()];
        for g in generators {
            for d in g.divisors() {
                if !all.contains(&d) {
                    all.push(d);
                }
            }
        }
        all.sort_by_key(|m| (m.degree(), std::cmp::Reverse(m.0)));
        let max_degree = all.iter().map(|m| m.degree()).max().unwrap_or(0);
        let mut offsets = vec![0];
        let mut pairs = Vec::new();
        for g in &all {
            for (a, ia) in all.iter().enumerate() {
                if !ia.le(g) {
                    continue;
                }
                for (b, ib) in all.iter().enumerate() {
                    if ia.add(ib) == *g {
                        pairs.push((a as u8, b as u8));
                    }
                }
            }
            offsets.push(pairs.len());
        }
        IndexSet {
            nvars,
            indices: all,
            offsets,
            pairs,
            max_degree,
        }
    }

    /// All multi-indices of total degree at most `degree`.
    pub fn total_degree(nvars: usize, degree: usize) -> Self {
        let mut gens = Vec::new();
        let mut cur = vec![MultiIndex::zero()];
        for _ in 0..degree {
            let mut next = Vec::new();
            for m in &cur {
                for v in 0..nvars {
                    next.push(m.add(&MultiIndex::unit(v)));
                }
            }
            gens.extend(next.iter().copied());
            cur = next;
        }
        IndexSet::closure(nvars, &gens)
    }

    pub fn value_only(nvars: usize) -> Self {
        IndexSet::closure(nvars, &[])
    }

    pub fn union(&self, other: &IndexSet) -> Self {
        let mut gens = self.indices.clone();
        gens.extend(other.indices.iter().copied());
        IndexSet::closure(self.nvars.max(other.nvars), &gens)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, m: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|i| i == m)
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.position(m).is_some()
    }

    fn pairs_for(&self, g: usize) -> &[(u8, u8)] {
        &self.pairs[self.offsets[g]..self.offsets[g + 1]]
    }
}

/// Coefficient vector; length 1 means constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub SmallVec<[f64; 10]>);

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet(smallvec![v])
    }

    /// The independent variable `var` at `value`.
    pub fn variable(set: &IndexSet, var: usize, value: f64) -> Self {
        let mut c: SmallVec<[f64; 10]> = smallvec![0.0; set.len()];
        c[0] = value;
        if let Some(p) = set.position(&MultiIndex::unit(var)) {
            c[p] = 1.0;
        }
        Jet(c)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() == 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeff(&self, pos: usize) -> f64 {
        if self.0.len() == 1 {
            if pos == 0 {
                self.0[0]
            } else {
                0.0
            }
        } else {
            self.0[pos]
        }
    }

    /// Partial derivative `∂^α`, zero if α is outside the set.
    pub fn partial(&self, set: &IndexSet, m: &MultiIndex) -> f64 {
        match set.position(m) {
            Some(p) => self.coeff(p) * m.factorial(),
            None => 0.0,
        }
    }

    /// Expand a constant to the full length of `set`.
    pub fn full(&self, set: &IndexSet) -> Jet {
        if self.0.len() == set.len() {
            return self.clone();
        }
        let mut c: SmallVec<[f64; 10]> = smallvec![0.0; set.len()];
        c[0] = self.0[0];
        Jet(c)
    }

    /// Only the value part.
    pub fn projected(&self) -> Jet {
        Jet::constant(self.0[0])
    }

    /// Non-constant part (value set to zero).
    fn nilpotent(&self) -> Jet {
        let mut d = self.clone();
        d.0[0] = 0.0;
        d
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn neg(&self) -> Jet {
        Jet(self.0.iter().map(|v| -v).collect())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &Jet) -> Jet {
        zip(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        zip(self, other, |a, b| a - b)
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        if other.0.len() > self.0.len() {
            let v = self.0[0];
            self.0 = smallvec![0.0; other.0.len()];
            self.0[0] = v;
        }
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += s * b;
        }
    }

    pub fn mul(&self, other: &Jet, set: &IndexSet) -> Jet {
        if self.is_constant() {
            return other.scale(self.0[0]);
        }
        if other.is_constant() {
            return self.scale(other.0[0]);
        }
        let mut out: SmallVec<[f64; 10]> = smallvec![0.0; set.len()];
        for (g, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for &(a, b) in set.pairs_for(g) {
                s += self.0[a as usize] * other.0[b as usize];
            }
            *o = s;
        }
        Jet(out)
    }

    /// `Σ_k d[k] (self − self₀)^k`, i.e. a function with Taylor
    /// coefficients `d` at the value of `self` applied to `self`.
    pub fn compose(&self, d: &[f64], set: &IndexSet) -> Jet {
        if self.is_constant() || d.len() == 1 {
            return Jet::constant(d[0]);
        }
        let delta = self.nilpotent();
        let k = d.len().min(set.max_degree() + 1);
        let mut r = Jet::constant(d[k - 1]);
        for i in (0..k - 1).rev() {
            r = r.mul(&delta, set);
            r.0[0] += d[i];
        }
        r
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn zip(a: &Jet, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
    match (a.0.len(), b.0.len()) {
        (1, 1) => Jet::constant(f(a.0[0], b.0[0])),
        (1, _) => {
            let mut c: SmallVec<[f64; 10]> = b.0.iter().map(|&v| f(0.0, v)).collect();
            c[0] = f(a.0[0], b.0[0]);
            Jet(c)
        }
        (_, 1) => {
            let mut c: SmallVec<[f64; 10]> = a.0.iter().map(|&v| f(v, 0.0)).collect();
            c[0] = f(a.0[0], b.0[0]);
            Jet(c)
        }
        _ => Jet(a.0.iter().zip(b.0.iter()).map(|(&x, &y)| f(x, y)).collect()),
    }
}

/// Taylor coefficients `f^(k)(x)/k!`, `k = 0..=n`, of elementary functions.
pub mod taylor {
    pub fn exp(x: f64, n: usize) -> Vec<f64> {
        let e = x.exp();
        let mut out = Vec::with_capacity(n + 1);
        let mut fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
            }
            out.push(e / fact);
        }
        out
    }

    pub fn ln(x: f64, n: usize) -> Vec<f64> {
        let mut out = vec![x.ln()];
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out.push(sign / (k as f64 * x.powi(k as i32)));
        }
        out
    }

    /// `x^p` for real `p`; `x` must be positive unless `p` is an integer.
    pub fn powf(x: f64, p: f64, n: usize) -> Vec<f64> {
        let integer = p.fract() == 0.0 && p.abs() < 1e9;
        let mut out = Vec::with_capacity(n + 1);
        let mut binom = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            if binom == 0.0 {
                out.push(0.0);
                continue;
            }
            let e = p - k as f64;
            let v = if integer { x.powi(e as i32) } else { x.powf(e) };
            out.push(binom * v);
        }
        out
    }

    pub fn sin(x: f64, n: usize) -> Vec<f64> {
        let (s, c) = x.sin_cos();
        let cycle = [s, c, -s, -c];
        let mut fact = 1.0;
        (0..=n)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect()
    }

    pub fn cos(x: f64, n: usize) -> Vec<f64> {
        let (s, c) = x.sin_cos();
        let cycle = [c, -s, -c, s];
        let mut fact = 1.0;
        (0..=n)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect()
    }

    /// Derivatives of tan as polynomials in `T = tan x`:
    /// `P₀ = T`, `P_{k+1} = P_k'(T)·(1 + T²)`.
    pub fn tan(x: f64, n: usize) -> Vec<f64> {
        let t = x.tan();
        let mut poly = vec![0.0, 1.0];
        let mut out = Vec::with_capacity(n + 1);
        let mut fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
                let mut dp = vec![0.0; poly.len() + 1];
                for (i, &c) in poly.iter().enumerate().skip(1) {
                    let di = c * i as f64;
                    dp[i - 1] += di;
                    dp[i + 1] += di;
                }
                poly = dp;
            }
            let v = poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            out.push(v / fact);
        }
        out
    }
}
