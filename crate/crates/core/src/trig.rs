//! Real trigonometric polynomials on the torus.
//!
//! A term `{ k, cos, sin }` reads `cos·cos(2π k·x) + sin·sin(2π k·x)`, so every
//! polynomial is real-valued by construction (its complex coefficients are
//! conjugate-symmetric). Observables, map perturbations and coupling kernels
//! are all built from these.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::torus::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TrigTerm {
    pub fn cos(k: [i32; 2], coeff: f64) -> Self {
        Self { k, cos: coeff, sin: 0.0 }
    }

    pub fn sin(k: [i32; 2], coeff: f64) -> Self {
        Self { k, cos: 0.0, sin: coeff }
    }

    pub fn constant(c: f64) -> Self {
        Self::cos([0, 0], c)
    }

    #[inline]
    fn phase(&self, x: TorusPoint) -> f64 {
        TAU * (self.k[0] as f64 * x.u + self.k[1] as f64 * x.v)
    }

    /// sup |term|
    pub fn amplitude(&self) -> f64 {
        if self.k == [0, 0] {
            self.cos.abs()
        } else {
            self.cos.hypot(self.sin)
        }
    }

    /// Euclidean length of `2π k`.
    pub fn frequency(&self) -> f64 {
        TAU * (self.k[0] as f64).hypot(self.k[1] as f64)
    }

    pub fn max_mode(&self) -> u32 {
        self.k[0].unsigned_abs().max(self.k[1].unsigned_abs())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPoly {
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![TrigTerm::constant(c)])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn eval(&self, x: TorusPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let (s, c) = t.phase(x).sin_cos();
                t.cos * c + t.sin * s
            })
            .sum()
    }

    pub fn gradient(&self, x: TorusPoint) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let (s, c) = t.phase(x).sin_cos();
            let d = TAU * (-t.cos * s + t.sin * c);
            g[0] += d * t.k[0] as f64;
            g[1] += d * t.k[1] as f64;
        }
        g
    }

    pub fn hessian(&self, x: TorusPoint) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for t in &self.terms {
            let (s, c) = t.phase(x).sin_cos();
            let d = -TAU * TAU * (t.cos * c + t.sin * s);
            let k = [t.k[0] as f64, t.k[1] as f64];
            for (i, row) in h.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e += d * k[i] * k[j];
                }
            }
        }
        h
    }

    pub fn max_mode(&self) -> u32 {
        self.terms.iter().map(TrigTerm::max_mode).max().unwrap_or(0)
    }

    /// Upper bound on sup |f|.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(TrigTerm::amplitude).sum()
    }

    /// Upper bound on sup ‖∇f‖₂.
    pub fn gradient_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency() * t.amplitude()).sum()
    }

    /// Upper bound on `Σ_{j ≤ r} sup ‖D^j f‖`.
    pub fn cr_bound(&self, r: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let w = t.frequency();
                t.amplitude() * (0..=r).map(|j| w.powi(j as i32)).sum::<f64>()
            })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|t| TrigTerm { k: t.k, cos: t.cos * factor, sin: t.sin * factor })
                .collect(),
        )
    }

    /// Evaluate at lattice node `(a, b)` using precomputed tables.
    #[inline]
    pub fn eval_lattice(&self, tables: &LatticeTables, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let (cu, su) = tables.cos_sin(t.k[0], a);
            let (cv, sv) = tables.cos_sin(t.k[1], b);
            let c = cu * cv - su * sv;
            let s = su * cv + cu * sv;
            acc += t.cos * c + t.sin * s;
        }
        acc
    }
}

/// A pair of trigonometric polynomials, i.e. a smooth vector field 𝕋² → ℝ².
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigField {
    pub u: TrigPoly,
    pub v: TrigPoly,
}

impl TrigField {
    pub fn new(u: TrigPoly, v: TrigPoly) -> Self {
        Self { u, v }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn components(&self) -> [&TrigPoly; 2] {
        [&self.u, &self.v]
    }

    #[inline]
    pub fn eval(&self, x: TorusPoint) -> [f64; 2] {
        [self.u.eval(x), self.v.eval(x)]
    }

    /// Row `i` holds the gradient of component `i`.
    pub fn jacobian(&self, x: TorusPoint) -> [[f64; 2]; 2] {
        [self.u.gradient(x), self.v.gradient(x)]
    }

    pub fn max_mode(&self) -> u32 {
        self.u.max_mode().max(self.v.max_mode())
    }

    /// Upper bound on sup ‖Df‖ in operator (and Frobenius) norm.
    pub fn jacobian_bound(&self) -> f64 {
        self.u.gradient_bound().hypot(self.v.gradient_bound())
    }

    pub fn sup_bound(&self) -> f64 {
        self.u.sup_bound().hypot(self.v.sup_bound())
    }

    pub fn cr_bound(&self, r: u32) -> f64 {
        self.u.cr_bound(r).max(self.v.cr_bound(r))
    }

    #[inline]
    pub fn eval_lattice(&self, tables: &LatticeTables, a: usize, b: usize) -> [f64; 2] {
        [self.u.eval_lattice(tables, a, b), self.v.eval_lattice(tables, a, b)]
    }
}

/// cos/sin of `2π k (a + o)/m` for `0 ≤ k ≤ kmax`, `0 ≤ a < m`, with `o = ½`
/// (cell midpoints) or `o = 0` (cell corners).
#[derive(Debug, Clone)]
pub struct LatticeTables {
    m: usize,
    kmax: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl LatticeTables {
    pub fn new(m: usize, kmax: u32) -> Self {
        Self::with_offset(m, kmax, 0.5)
    }

    pub fn corners(m: usize, kmax: u32) -> Self {
        Self::with_offset(m, kmax, 0.0)
    }

    fn with_offset(m: usize, kmax: u32, offset: f64) -> Self {
        let kmax = kmax as usize;
        let mut cos = vec![0.0; (kmax + 1) * m];
        let mut sin = vec![0.0; (kmax + 1) * m];
        for k in 0..=kmax {
            for a in 0..m {
                let (s, c) = (TAU * k as f64 * (a as f64 + offset) / m as f64).sin_cos();
                cos[k * m + a] = c;
                sin[k * m + a] = s;
            }
        }
        Self { m, kmax, cos, sin }
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn kmax(&self) -> u32 {
        self.kmax as u32
    }

    #[inline]
    pub fn cos_sin(&self, k: i32, a: usize) -> (f64, f64) {
        let idx = k.unsigned_abs() as usize * self.m + a;
        let s = self.sin[idx];
        (self.cos[idx], if k < 0 { -s } else { s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrigPoly {
        TrigPoly::new(vec![
            TrigTerm { k: [1, 2], cos: 0.3, sin: -0.7 },
            TrigTerm { k: [-2, 1], cos: 0.1, sin: 0.4 },
            TrigTerm::constant(0.25),
        ])
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = sample();
        let x = TorusPoint::new(0.31, 0.77);
        let h = 1e-6;
        let g = f.gradient(x);
        let du = (f.eval(TorusPoint::new(x.u + h, x.v)) - f.eval(TorusPoint::new(x.u - h, x.v))) / (2.0 * h);
        let dv = (f.eval(TorusPoint::new(x.u, x.v + h)) - f.eval(TorusPoint::new(x.u, x.v - h))) / (2.0 * h);
        assert!((g[0] - du).abs() < 1e-6);
        assert!((g[1] - dv).abs() < 1e-6);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let f = sample();
        let x = TorusPoint::new(0.12, 0.4);
        let h = 1e-6;
        let hs = f.hessian(x);
        let gp = f.gradient(TorusPoint::new(x.u + h, x.v));
        let gm = f.gradient(TorusPoint::new(x.u - h, x.v));
        assert!(((gp[0] - gm[0]) / (2.0 * h) - hs[0][0]).abs() < 1e-4);
        assert!(((gp[1] - gm[1]) / (2.0 * h) - hs[0][1]).abs() < 1e-4);
    }

    #[test]
    fn lattice_evaluation_agrees_with_direct() {
        let f = sample();
        let m = 64;
        let tables = LatticeTables::new(m, f.max_mode());
        for (a, b) in [(0, 0), (5, 17), (63, 31)] {
            let x = TorusPoint::new((a as f64 + 0.5) / m as f64, (b as f64 + 0.5) / m as f64);
            assert!((f.eval_lattice(&tables, a, b) - f.eval(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn bounds_dominate_samples() {
        let f = sample();
        for i in 0..50 {
            let x = TorusPoint::new(i as f64 * 0.0371, i as f64 * 0.0913);
            assert!(f.eval(x).abs() <= f.sup_bound() + 1e-15);
            let g = f.gradient(x);
            assert!(g[0].hypot(g[1]) <= f.gradient_bound() + 1e-12);
        }
    }
}
