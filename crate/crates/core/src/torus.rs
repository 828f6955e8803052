//! Geometry of 𝕋² = [0,1)² and cell-averaged densities on it.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::{LatticeTables, TrigPoly};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub u: f64,
    pub v: f64,
}

#[inline]
pub(crate) fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    #[inline]
    pub fn new(u: f64, v: f64) -> Self {
        Self { u: wrap(u), v: wrap(v) }
    }

    #[inline]
    pub fn translate(self, d: [f64; 2]) -> Self {
        Self::new(self.u + d[0], self.v + d[1])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 2] {
        [self.u, self.v]
    }

    /// Index of the grid cell containing the point, row-major with `v` selecting the row.
    #[inline]
    pub fn cell(self, n: usize) -> usize {
        let c = ((self.u * n as f64) as usize).min(n - 1);
        let r = ((self.v * n as f64) as usize).min(n - 1);
        r * n + c
    }
}

/// Signed periodic difference reduced to [-½, ½).
#[inline]
fn periodic_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Flat metric on the torus.
pub fn torus_distance(p: TorusPoint, q: TorusPoint) -> f64 {
    periodic_delta(p.u, q.u).hypot(periodic_delta(p.v, q.v))
}

pub fn is_power_of_two(n: usize) -> bool {
    n > 0 && n.is_power_of_two()
}

pub fn check_resolution(n: usize) -> Result<()> {
    if is_power_of_two(n) {
        Ok(())
    } else {
        Err(Error::InvalidResolution(n))
    }
}

/// Real-valued test function given by finitely many Fourier modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observable {
    poly: TrigPoly,
}

impl Observable {
    pub fn new(poly: TrigPoly) -> Self {
        Self { poly }
    }

    pub fn poly(&self) -> &TrigPoly {
        &self.poly
    }

    pub fn cutoff(&self) -> u32 {
        self.poly.max_mode()
    }

    #[inline]
    pub fn eval(&self, x: TorusPoint) -> f64 {
        self.poly.eval(x)
    }

    pub fn sup_bound(&self) -> f64 {
        self.poly.sup_bound()
    }
}

/// Piecewise-constant probability density on an `n×n` grid.
///
/// `cells[r * n + c]` is the average of the density over
/// `[c/n, (c+1)/n) × [r/n, (r+1)/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusDensity {
    n: usize,
    cells: Vec<f64>,
}

impl TorusDensity {
    pub fn uniform(n: usize) -> Result<Self> {
        check_resolution(n)?;
        Ok(Self { n, cells: vec![1.0; n * n] })
    }

    /// Samples `f` at cell centres and normalises to unit mass.
    pub fn from_fn(n: usize, f: impl Fn(TorusPoint) -> f64) -> Result<Self> {
        check_resolution(n)?;
        let mut cells = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                cells.push(f(cell_centre(n, r * n + c)));
            }
        }
        Self::from_cells(n, cells)
    }

    /// Validates nonnegativity and rescales to unit mass.
    pub fn from_cells(n: usize, mut cells: Vec<f64>) -> Result<Self> {
        check_resolution(n)?;
        if cells.len() != n * n {
            return Err(Error::WrongCellCount { expected: n * n, got: cells.len() });
        }
        if let Some(bad) = cells.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::NotProbability(format!("cell value {bad}")));
        }
        let mass = cells.iter().sum::<f64>() / (n * n) as f64;
        if mass <= 0.0 {
            return Err(Error::NotProbability("zero mass".into()));
        }
        if mass != 1.0 {
            cells.iter_mut().for_each(|x| *x /= mass);
        }
        Ok(Self { n, cells })
    }

    /// Wraps values that are already a probability density (e.g. the output of a
    /// stochastic matrix), without renormalising.
    pub(crate) fn from_raw(n: usize, cells: Vec<f64>) -> Self {
        debug_assert_eq!(cells.len(), n * n);
        Self { n, cells }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell_measure(&self) -> f64 {
        1.0 / (self.n * self.n) as f64
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.cell_measure()
    }

    pub fn min_value(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Convex combination `(1-t)·self + t·other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        same_resolution(self, other)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("mixing weight {t} outside [0,1]")));
        }
        let cells = self.cells.iter().zip(&other.cells).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        Self::from_cells(self.n, cells)
    }

    /// Averages 2×2 blocks, halving the resolution.
    pub fn coarsen(&self) -> Result<Self> {
        if self.n < 2 {
            return Err(Error::InvalidResolution(self.n / 2));
        }
        let m = self.n / 2;
        let mut cells = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                let at = |rr: usize, cc: usize| self.cells[rr * self.n + cc];
                cells[r * m + c] =
                    0.25 * (at(2 * r, 2 * c) + at(2 * r, 2 * c + 1) + at(2 * r + 1, 2 * c) + at(2 * r + 1, 2 * c + 1));
            }
        }
        Ok(Self { n: m, cells })
    }

    /// Coarsens repeatedly down to resolution `m`.
    pub fn coarsen_to(&self, m: usize) -> Result<Self> {
        check_resolution(m)?;
        if m > self.n {
            return Err(Error::ResolutionMismatch { left: self.n, right: m });
        }
        let mut h = self.clone();
        while h.n > m {
            h = h.coarsen()?;
        }
        Ok(h)
    }

    /// `(∫cos 2πk·x dh, ∫sin 2πk·x dh)` by cell-centre quadrature.
    pub fn fourier_moment(&self, k: [i32; 2]) -> (f64, f64) {
        let n = self.n;
        let phase_u: Vec<(f64, f64)> =
            (0..n).map(|c| (TAU * k[0] as f64 * (c as f64 + 0.5) / n as f64).sin_cos()).collect();
        let mut cs = 0.0;
        let mut sn = 0.0;
        for r in 0..n {
            let (sv, cv) = (TAU * k[1] as f64 * (r as f64 + 0.5) / n as f64).sin_cos();
            let row = &self.cells[r * n..(r + 1) * n];
            let mut rc = 0.0;
            let mut rs = 0.0;
            for (h, &(su, cu)) in row.iter().zip(&phase_u) {
                rc += h * (cu * cv - su * sv);
                rs += h * (su * cv + cu * sv);
            }
            cs += rc;
            sn += rs;
        }
        let w = self.cell_measure();
        (cs * w, sn * w)
    }

    /// Writes the `n=<resolution>` header followed by `n` comma-separated rows.
    pub fn to_grid_text(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 20);
        let _ = writeln!(s, "n={}", self.n);
        for row in self.cells.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    /// Parses the grid format; rows may be split by commas, whitespace or newlines.
    pub fn from_grid_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty density file".into()))?;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut cells = Vec::with_capacity(n * n);
        for (lineno, line) in lines.enumerate() {
            for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                let x: f64 =
                    tok.parse().map_err(|_| Error::Parse(format!("line {}: bad value {tok:?}", lineno + 2)))?;
                cells.push(x);
            }
        }
        Self::from_cells(n, cells)
    }
}

pub fn cell_centre(n: usize, idx: usize) -> TorusPoint {
    let (r, c) = (idx / n, idx % n);
    TorusPoint { u: (c as f64 + 0.5) / n as f64, v: (r as f64 + 0.5) / n as f64 }
}

fn same_resolution(a: &TorusDensity, b: &TorusDensity) -> Result<()> {
    if a.n != b.n {
        Err(Error::ResolutionMismatch { left: a.n, right: b.n })
    } else {
        Ok(())
    }
}

/// `∫ φ dh` by cell-centre quadrature.
pub fn integrate(h: &TorusDensity, phi: &Observable) -> Result<f64> {
    let n = h.n;
    let limit = n / 2;
    if phi.cutoff() as usize > limit {
        return Err(Error::CutoffTooHigh { cutoff: phi.cutoff(), limit });
    }
    let tables = LatticeTables::new(n, phi.cutoff());
    let mut acc = 0.0;
    for r in 0..n {
        let row = &h.cells[r * n..(r + 1) * n];
        let mut racc = 0.0;
        for (c, x) in row.iter().enumerate() {
            racc += x * phi.poly().eval_lattice(&tables, c, r);
        }
        acc += racc;
    }
    Ok(acc * h.cell_measure())
}

/// `∫ f dh` for an arbitrary continuous `f`, by cell-centre quadrature.
pub fn integrate_fn(h: &TorusDensity, f: impl Fn(TorusPoint) -> f64) -> f64 {
    let n = h.n;
    h.cells.iter().enumerate().map(|(i, x)| x * f(cell_centre(n, i))).sum::<f64>() * h.cell_measure()
}

pub fn l1_distance(h1: &TorusDensity, h2: &TorusDensity) -> Result<f64> {
    same_resolution(h1, h2)?;
    Ok(h1.cells.iter().zip(&h2.cells).map(|(a, b)| (a - b).abs()).sum::<f64>() * h1.cell_measure())
}

/// Weight of the L¹ part in [`proxy_strong_norm`].
pub const PROXY_L1_WEIGHT: f64 = 1.0;

/// Discrete BV norm used as a computable stand-in for the strong anisotropic norm:
/// `‖h‖_{L¹} + Σ_cells (|Δ_u h| + |Δ_v h|)/n` with periodic forward differences.
pub fn proxy_strong_norm(h: &TorusDensity) -> f64 {
    let n = h.n;
    let l1 = h.cells.iter().map(|x| x.abs()).sum::<f64>() * h.cell_measure();
    let mut tv = 0.0;
    for r in 0..n {
        let up = ((r + 1) % n) * n;
        for c in 0..n {
            let x = h.cells[r * n + c];
            tv += (h.cells[r * n + (c + 1) % n] - x).abs() + (h.cells[up + c] - x).abs();
        }
    }
    PROXY_L1_WEIGHT * l1 + tv / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::TrigTerm;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cos_u() -> Observable {
        Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 0], 1.0)]))
    }

    #[test]
    fn distance_examples() {
        let p = TorusPoint::new(0.1, 0.1);
        assert_eq!(torus_distance(p, p), 0.0);
        assert!((torus_distance(TorusPoint::new(0.0, 0.0), TorusPoint::new(0.9, 0.0)) - 0.1).abs() < 1e-15);
        let d = torus_distance(TorusPoint::new(0.95, 0.95), TorusPoint::new(0.05, 0.05));
        assert!((d - 0.02f64.sqrt()).abs() < 1e-12);
        assert!(torus_distance(TorusPoint::new(0.0, 0.0), TorusPoint::new(0.5, 0.5)) <= 0.5f64.sqrt() + 1e-15);
    }

    #[test]
    fn points_wrap_into_unit_square() {
        let p = TorusPoint::new(-1e-20, 3.25);
        assert!(p.u >= 0.0 && p.u < 1.0);
        assert_eq!(p.v, 0.25);
    }

    #[test]
    fn integrate_examples() {
        let h = TorusDensity::uniform(64).unwrap();
        let one = Observable::new(TrigPoly::constant(1.0));
        assert!((integrate(&h, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!(integrate(&h, &cos_u()).unwrap().abs() < 1e-14);
        let g = TorusDensity::from_fn(64, |x| 1.0 + 0.5 * (TAU * x.u).cos()).unwrap();
        assert!((integrate(&g, &cos_u()).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_high_cutoff() {
        let h = TorusDensity::uniform(8).unwrap();
        let phi = Observable::new(TrigPoly::new(vec![TrigTerm::cos([5, 0], 1.0)]));
        assert!(matches!(integrate(&h, &phi), Err(Error::CutoffTooHigh { .. })));
    }

    #[test]
    fn l1_examples() {
        let h = TorusDensity::from_fn(32, |x| 1.5 + (TAU * x.v).sin()).unwrap();
        assert_eq!(l1_distance(&h, &h).unwrap(), 0.0);
        let a = TorusDensity::uniform(32).unwrap();
        let b = TorusDensity::uniform(64).unwrap();
        assert!(matches!(l1_distance(&a, &b), Err(Error::ResolutionMismatch { .. })));
        let h1 = TorusDensity::from_fn(256, |x| 1.0 + (TAU * x.u).cos()).unwrap();
        let h2 = TorusDensity::uniform(256).unwrap();
        assert!((l1_distance(&h1, &h2).unwrap() - 2.0 / PI).abs() < 1e-3);
    }

    #[test]
    fn proxy_norm_examples() {
        assert_eq!(proxy_strong_norm(&TorusDensity::uniform(16).unwrap()), 1.0);
        let h = TorusDensity::from_fn(256, |x| 1.0 + (TAU * x.u).cos()).unwrap();
        let p = proxy_strong_norm(&h);
        assert!((p - 5.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn proxy_norm_grows_with_sharpness() {
        let mut last = 0.0;
        for width in [0.2, 0.1, 0.05, 0.025] {
            let h = TorusDensity::from_fn(256, |x| {
                let du = periodic_delta(x.u, 0.5);
                let dv = periodic_delta(x.v, 0.5);
                (-(du * du + dv * dv) / (2.0 * width * width)).exp()
            })
            .unwrap();
            let p = proxy_strong_norm(&h);
            assert!(p > last, "width {width}: {p} <= {last}");
            last = p;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(TorusDensity::uniform(12), Err(Error::InvalidResolution(12))));
        assert!(matches!(TorusDensity::from_cells(2, vec![1.0, -1.0, 1.0, 1.0]), Err(Error::NotProbability(_))));
        assert!(matches!(TorusDensity::from_cells(2, vec![1.0; 3]), Err(Error::WrongCellCount { .. })));
    }

    #[test]
    fn grid_text_round_trip() {
        let h = TorusDensity::from_fn(8, |x| 1.0 + 0.3 * (TAU * (x.u + 2.0 * x.v)).sin()).unwrap();
        let back = TorusDensity::from_grid_text(&h.to_grid_text()).unwrap();
        assert_eq!(back.resolution(), 8);
        assert!(l1_distance(&h, &back).unwrap() < 1e-15);
        assert!(TorusDensity::from_grid_text("m=8\n1").is_err());
    }

    #[test]
    fn coarsening_preserves_mass() {
        let h = TorusDensity::from_fn(64, |x| 1.0 + 0.9 * (TAU * x.u).cos() * (TAU * x.v).sin()).unwrap();
        let c = h.coarsen_to(8).unwrap();
        assert_eq!(c.resolution(), 8);
        assert!((c.mass() - 1.0).abs() < 1e-12);
    }

    fn arb_density(n: usize) -> impl Strategy<Value = TorusDensity> {
        prop::collection::vec(0.0f64..10.0, n * n)
            .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-3)
            .prop_map(move |v| TorusDensity::from_cells(n, v).unwrap())
    }

    proptest! {
        #[test]
        fn constructors_preserve_mass(h in arb_density(8)) {
            prop_assert!((h.mass() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn l1_is_a_metric(a in arb_density(4), b in arb_density(4), c in arb_density(4)) {
            let ab = l1_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, l1_distance(&b, &a).unwrap());
            prop_assert!(l1_distance(&a, &c).unwrap() <= ab + l1_distance(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn integrate_is_linear(a in arb_density(8), b in arb_density(8), t in 0.0f64..1.0,
                               c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
            let phi1 = Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 2], c1)]));
            let phi2 = Observable::new(TrigPoly::new(vec![TrigTerm::sin([3, -1], c2)]));
            let both = Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 2], c1), TrigTerm::sin([3, -1], c2)]));
            let lhs = integrate(&a, &both).unwrap();
            let rhs = integrate(&a, &phi1).unwrap() + integrate(&a, &phi2).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let m = a.mix(&b, t).unwrap();
            let lin = (1.0 - t) * integrate(&a, &phi1).unwrap() + t * integrate(&b, &phi1).unwrap();
            prop_assert!((integrate(&m, &phi1).unwrap() - lin).abs() < 1e-12);
        }
    }
}
