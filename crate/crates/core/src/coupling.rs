//! Mean-field interaction `Φ_μ^ε(x) = x + ε·G_μ(x) mod 1`.
//!
//! `G_μ` is reduced once per measure into a plain trigonometric field
//! ([`CouplingField`]); everything downstream evaluates that field.

use serde::{Deserialize, Serialize};

use crate::anosov::{MapSpec, TorusMap};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::rng::CounterRng;
use crate::stats::symmetric_mean;
use crate::torus::{l1_distance, TorusDensity, TorusPoint};
use crate::trig::{TrigField, TrigPoly, TrigTerm};

/// Admissible coupling strengths satisfy `|ε|·sup_μ sup_x ‖D G_μ(x)‖ ≤ 0.5`.
pub const MAX_CONTRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CouplingKernel {
    Zero,
    /// `G_μ(x)_j = K1_j(x)·μ(K2_j)`; omitted factors default to the example kernel.
    Separable {
        #[serde(default = "example_k1")]
        k1: TrigField,
        #[serde(default = "example_k2")]
        k2: TrigField,
    },
    /// `G_μ(x) = ∫ κ(x − y) dμ(y)`
    Convolution {
        #[serde(default = "example_convolution")]
        kernel: TrigField,
    },
}

fn example_k1() -> TrigField {
    TrigField::new(TrigPoly::new(vec![TrigTerm::sin([0, 1], 1.0)]), TrigPoly::new(vec![TrigTerm::sin([1, 0], 1.0)]))
}

fn example_k2() -> TrigField {
    TrigField::new(TrigPoly::new(vec![TrigTerm::cos([0, 1], 1.0)]), TrigPoly::new(vec![TrigTerm::cos([1, 0], 1.0)]))
}

fn example_convolution() -> TrigField {
    TrigField::new(TrigPoly::new(vec![TrigTerm::sin([1, 0], 1.0)]), TrigPoly::new(vec![TrigTerm::sin([0, 1], 1.0)]))
}

impl CouplingKernel {
    /// `K1 = (sin 2πv, sin 2πu)`, `K2 = (cos 2πv, cos 2πu)`; `K2` has zero Lebesgue mean.
    pub fn separable_example() -> Self {
        CouplingKernel::Separable { k1: example_k1(), k2: example_k2() }
    }

    /// `κ = (sin 2πu, sin 2πv)`: attraction towards the mean phase.
    pub fn convolution_example() -> Self {
        CouplingKernel::Convolution { kernel: example_convolution() }
    }

    /// Upper bound on `sup_μ sup_x ‖D G_μ(x)‖` from the coefficients.
    pub fn jacobian_bound(&self) -> f64 {
        match self {
            CouplingKernel::Zero => 0.0,
            CouplingKernel::Separable { k1, k2 } => {
                (k2.u.sup_bound() * k1.u.gradient_bound()).hypot(k2.v.sup_bound() * k1.v.gradient_bound())
            }
            // each reduced mode has amplitude at most that of the kernel mode
            CouplingKernel::Convolution { kernel } => kernel.jacobian_bound(),
        }
    }

    /// Upper bound on `sup_μ sup_x |G_μ(x)|`.
    pub fn displacement_bound(&self) -> f64 {
        match self {
            CouplingKernel::Zero => 0.0,
            CouplingKernel::Separable { k1, k2 } => {
                (k2.u.sup_bound() * k1.u.sup_bound()).hypot(k2.v.sup_bound() * k1.v.sup_bound())
            }
            CouplingKernel::Convolution { kernel } => kernel.sup_bound(),
        }
    }

    pub fn max_mode(&self) -> u32 {
        match self {
            CouplingKernel::Zero => 0,
            CouplingKernel::Separable { k1, k2 } => k1.max_mode().max(k2.max_mode()),
            CouplingKernel::Convolution { kernel } => kernel.max_mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpecConfig {
    #[serde(flatten)]
    pub kernel: CouplingKernel,
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingSpecConfig", into = "CouplingSpecConfig")]
pub struct CouplingSpec {
    kernel: CouplingKernel,
    eps: f64,
}

impl TryFrom<CouplingSpecConfig> for CouplingSpec {
    type Error = Error;

    fn try_from(c: CouplingSpecConfig) -> Result<Self> {
        CouplingSpec::new(c.kernel, c.eps)
    }
}

impl From<CouplingSpec> for CouplingSpecConfig {
    fn from(c: CouplingSpec) -> Self {
        CouplingSpecConfig { kernel: c.kernel, eps: c.eps }
    }
}

impl CouplingSpec {
    pub fn new(kernel: CouplingKernel, eps: f64) -> Result<Self> {
        if !eps.is_finite() {
            return Err(Error::InvalidCoupling(format!("ε = {eps} is not finite")));
        }
        let lip = eps.abs() * kernel.jacobian_bound();
        if lip > MAX_CONTRACTION {
            return Err(Error::InvalidCoupling(format!(
                "|ε|·sup‖D G_μ‖ = {lip:.4} exceeds {MAX_CONTRACTION} (ε = {eps}, admissible |ε| ≤ {:.5})",
                MAX_CONTRACTION / kernel.jacobian_bound()
            )));
        }
        Ok(Self { kernel, eps })
    }

    pub fn zero() -> Self {
        Self { kernel: CouplingKernel::Zero, eps: 0.0 }
    }

    pub fn separable_example(eps: f64) -> Result<Self> {
        Self::new(CouplingKernel::separable_example(), eps)
    }

    pub fn convolution_example(eps: f64) -> Result<Self> {
        Self::new(CouplingKernel::convolution_example(), eps)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.kernel.clone(), eps)
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Largest admissible `|ε|` for this kernel.
    pub fn max_eps(&self) -> f64 {
        let b = self.kernel.jacobian_bound();
        if b == 0.0 {
            f64::INFINITY
        } else {
            MAX_CONTRACTION / b
        }
    }

    /// `Φ = Id` exactly.
    pub fn is_identity(&self) -> bool {
        self.eps == 0.0 || matches!(self.kernel, CouplingKernel::Zero)
    }

    /// One-time reduction of `G_μ` for the measure `mu`.
    pub fn field(&self, mu: &MeasureView) -> CouplingField {
        CouplingField { g: reduce_field(&self.kernel, mu), eps: self.eps }
    }

    pub fn coupling_field(&self, mu: &MeasureView, x: TorusPoint) -> [f64; 2] {
        reduce_field(&self.kernel, mu).eval(x)
    }

    pub fn apply_phi(&self, mu: &MeasureView, x: TorusPoint) -> TorusPoint {
        self.field(mu).apply_phi(x)
    }

    pub fn invert_phi(&self, mu: &MeasureView, y: TorusPoint) -> Result<TorusPoint> {
        self.field(mu).invert_phi(y)
    }
}

fn reduce_field(kernel: &CouplingKernel, mu: &MeasureView) -> TrigField {
    match kernel {
        CouplingKernel::Zero => TrigField::zero(),
        CouplingKernel::Separable { k1, k2 } => {
            TrigField::new(k1.u.scaled(mu.expectation(&k2.u)), k1.v.scaled(mu.expectation(&k2.v)))
        }
        CouplingKernel::Convolution { kernel } => {
            let reduce = |p: &TrigPoly| {
                TrigPoly::new(
                    p.terms
                        .iter()
                        .map(|t| {
                            let (c, s) = mu.moment(t.k);
                            // ∫ a cos(θ_x − θ_y) + b sin(θ_x − θ_y) dμ(y)
                            TrigTerm { k: t.k, cos: t.cos * c - t.sin * s, sin: t.cos * s + t.sin * c }
                        })
                        .collect(),
                )
            };
            TrigField::new(reduce(&kernel.u), reduce(&kernel.v))
        }
    }
}

/// A probability measure seen through its trigonometric moments.
#[derive(Debug, Clone, Copy)]
pub enum MeasureView<'a> {
    Density(&'a TorusDensity),
    /// Empirical measure `(1/N) Σ δ_{x_i}`.
    Points(&'a [TorusPoint]),
}

impl<'a> MeasureView<'a> {
    /// `(μ(cos 2πk·x), μ(sin 2πk·x))`.
    ///
    /// For point sets the per-particle values are sorted before a pairwise sum,
    /// so the result is a symmetric function of the particles, bit for bit.
    pub fn moment(&self, k: [i32; 2]) -> (f64, f64) {
        if k == [0, 0] {
            return (1.0, 0.0);
        }
        match self {
            MeasureView::Density(h) => h.fourier_moment(k),
            MeasureView::Points(pts) => {
                let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = pts
                    .iter()
                    .map(|p| {
                        let (s, c) = (std::f64::consts::TAU * (k[0] as f64 * p.u + k[1] as f64 * p.v)).sin_cos();
                        (c, s)
                    })
                    .unzip();
                (symmetric_mean(&mut cs), symmetric_mean(&mut sn))
            }
        }
    }

    pub fn expectation(&self, f: &TrigPoly) -> f64 {
        f.terms
            .iter()
            .map(|t| {
                let (c, s) = self.moment(t.k);
                t.cos * c + t.sin * s
            })
            .sum()
    }
}

/// `G_μ` frozen for one measure, together with `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingField {
    g: TrigField,
    eps: f64,
}

impl CouplingField {
    pub fn identity() -> Self {
        Self { g: TrigField::zero(), eps: 0.0 }
    }

    pub fn g(&self) -> &TrigField {
        &self.g
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_identity(&self) -> bool {
        self.eps == 0.0 || self.g.is_zero()
    }

    /// Upper bound on `sup_x |ε G(x)|`.
    pub fn displacement_bound(&self) -> f64 {
        self.eps.abs() * self.g.sup_bound()
    }

    #[inline]
    pub fn value(&self, x: TorusPoint) -> [f64; 2] {
        self.g.eval(x)
    }

    #[inline]
    pub fn apply_phi(&self, x: TorusPoint) -> TorusPoint {
        if self.eps == 0.0 {
            return x;
        }
        let g = self.g.eval(x);
        TorusPoint::new(x.u + self.eps * g[0], x.v + self.eps * g[1])
    }

    /// `x + ε G(x)` without reduction mod 1.
    #[inline]
    pub fn lift_phi(&self, x: [f64; 2]) -> [f64; 2] {
        if self.eps == 0.0 {
            return x;
        }
        let g = self.g.eval(TorusPoint { u: x[0], v: x[1] });
        [x[0] + self.eps * g[0], x[1] + self.eps * g[1]]
    }

    /// `D Φ = I + ε D G`
    pub fn jacobian_phi(&self, x: TorusPoint) -> Mat2 {
        linalg::add(&linalg::IDENTITY, &linalg::scale(&self.g.jacobian(x), self.eps))
    }

    /// Fixed-point iteration `x ← y − ε G(x)` on the lift.
    pub fn invert_phi(&self, y: TorusPoint) -> Result<TorusPoint> {
        const MAX_ITER: usize = 100;
        if self.eps == 0.0 {
            return Ok(y);
        }
        let mut x = y.to_array();
        let mut iterations = 0;
        for _ in 0..MAX_ITER {
            iterations += 1;
            let g = self.g.eval(TorusPoint { u: x[0], v: x[1] });
            let next = [y.u - self.eps * g[0], y.v - self.eps * g[1]];
            let step = (next[0] - x[0]).hypot(next[1] - x[1]);
            x = next;
            if step < 1e-13 {
                break;
            }
        }
        let candidate = TorusPoint::new(x[0], x[1]);
        if crate::torus::torus_distance(self.apply_phi(candidate), y) < 1e-11 {
            Ok(candidate)
        } else {
            Err(Error::NoConvergence { point: y, iterations })
        }
    }
}

impl TorusMap for CouplingField {
    fn apply(&self, x: TorusPoint) -> TorusPoint {
        self.apply_phi(x)
    }

    fn jacobian(&self, x: TorusPoint) -> Mat2 {
        self.jacobian_phi(x)
    }

    fn lift(&self, x: [f64; 2]) -> [f64; 2] {
        self.lift_phi(x)
    }
}

/// The globally coupled map `T ∘ Φ_μ^ε` for a frozen measure.
#[derive(Debug, Clone)]
pub struct CoupledMap<'a> {
    pub map: &'a MapSpec,
    pub field: CouplingField,
}

impl<'a> CoupledMap<'a> {
    pub fn new(map: &'a MapSpec, field: CouplingField) -> Self {
        Self { map, field }
    }
}

impl TorusMap for CoupledMap<'_> {
    fn apply(&self, x: TorusPoint) -> TorusPoint {
        self.map.apply_map(self.field.apply_phi(x))
    }

    fn jacobian(&self, x: TorusPoint) -> Mat2 {
        let y = self.field.apply_phi(x);
        linalg::mul(&self.map.jacobian_at(y), &self.field.jacobian_phi(x))
    }

    fn lift(&self, x: [f64; 2]) -> [f64; 2] {
        self.map.lift(self.field.lift_phi(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max d_{C²}(Φ^ε_{μ₁}, Φ^ε_{μ₂}) / (|ε|·‖μ₁ − μ₂‖_{L¹})`
    pub a1_constant: f64,
    /// `max d_{C²}(Φ^ε_μ, Φ^{ε'}_μ) / |ε − ε'|`
    pub a2_constant: f64,
    pub pair_count: usize,
    pub max_ratio: f64,
    /// Sample points per supremum.
    pub sample_points: usize,
}

/// Derivative orders used in the sampled `C^r` distance.
pub const CR_ORDER: u32 = 2;

const ASSUMPTION_SAMPLES: usize = 512;

/// `Σ_{j ≤ 2} sup_x ‖D^j f(x)‖` for the difference `f = s₁·G₁ − s₂·G₂`, sampled.
fn sampled_c2_distance(g1: &TrigField, s1: f64, g2: &TrigField, s2: f64, seed: u64) -> f64 {
    let mut rng = CounterRng::new(seed, 0xA55, 0);
    let mut sup = [0.0f64; 3];
    for _ in 0..ASSUMPTION_SAMPLES {
        let x = TorusPoint::new(rng.next_f64(), rng.next_f64());
        let (a, b) = (g1.eval(x), g2.eval(x));
        sup[0] = sup[0].max((s1 * a[0] - s2 * b[0]).hypot(s1 * a[1] - s2 * b[1]));
        let (ja, jb) = (g1.jacobian(x), g2.jacobian(x));
        let mut fro = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                fro += (s1 * ja[i][j] - s2 * jb[i][j]).powi(2);
            }
        }
        sup[1] = sup[1].max(fro.sqrt());
        let mut hs = 0.0;
        for (pa, pb) in g1.components().into_iter().zip(g2.components()) {
            let (ha, hb) = (pa.hessian(x), pb.hessian(x));
            for i in 0..2 {
                for j in 0..2 {
                    hs += (s1 * ha[i][j] - s2 * hb[i][j]).powi(2);
                }
            }
        }
        sup[2] = sup[2].max(hs.sqrt());
    }
    sup.iter().sum()
}

fn measure_distance(a: &MeasureView, b: &MeasureView) -> f64 {
    match (a, b) {
        (MeasureView::Density(x), MeasureView::Density(y)) if x.resolution() == y.resolution() => {
            l1_distance(x, y).expect("same resolution")
        }
        _ => {
            let n = match (a, b) {
                (MeasureView::Density(x), _) | (_, MeasureView::Density(x)) => x.resolution(),
                _ => 32,
            };
            let ha = as_density(a, n);
            let hb = as_density(b, n);
            l1_distance(&ha, &hb).expect("same resolution")
        }
    }
}

fn as_density(m: &MeasureView, n: usize) -> TorusDensity {
    match m {
        MeasureView::Density(h) if h.resolution() == n => (*h).clone(),
        MeasureView::Density(h) if h.resolution() > n => h.coarsen_to(n).expect("power of two"),
        MeasureView::Density(h) => {
            // refine by repetition
            let f = n / h.resolution();
            let cells = (0..n * n).map(|i| h.cells()[(i / n / f) * h.resolution() + (i % n) / f]).collect();
            TorusDensity::from_cells(n, cells).expect("valid")
        }
        MeasureView::Points(pts) => histogram(pts, n),
    }
}

/// Histogram of a point set normalised to a probability density.
pub fn histogram(points: &[TorusPoint], n: usize) -> TorusDensity {
    let mut cells = vec![0.0; n * n];
    for p in points {
        cells[p.cell(n)] += 1.0;
    }
    TorusDensity::from_cells(n, cells).expect("non-empty point set")
}

/// Sampled estimates of the constants in the two coupling regularity assumptions.
pub fn certify_assumptions(
    spec: &CouplingSpec,
    pairs: &[(MeasureView, MeasureView)],
    eps_pairs: &[(f64, f64)],
) -> Result<AssumptionReport> {
    if pairs.is_empty() || eps_pairs.is_empty() {
        return Err(Error::InvalidParameter("assumption check needs measure pairs and ε pairs".into()));
    }
    let mut a1 = 0.0f64;
    let mut a2 = 0.0f64;
    for (i, (m1, m2)) in pairs.iter().enumerate() {
        let g1 = reduce_field(&spec.kernel, m1);
        let g2 = reduce_field(&spec.kernel, m2);
        for &(e, _) in eps_pairs {
            if e == 0.0 {
                continue;
            }
            let num = sampled_c2_distance(&g1, e, &g2, e, i as u64);
            if num == 0.0 {
                continue;
            }
            let den = e.abs() * measure_distance(m1, m2);
            if den > 0.0 {
                a1 = a1.max(num / den);
            }
        }
        for m in [m1, m2] {
            let g = reduce_field(&spec.kernel, m);
            for &(e, e2) in eps_pairs {
                if e == e2 {
                    continue;
                }
                let num = sampled_c2_distance(&g, e, &g, e2, i as u64);
                a2 = a2.max(num / (e - e2).abs());
            }
        }
    }
    Ok(AssumptionReport {
        a1_constant: a1,
        a2_constant: a2,
        pair_count: pairs.len(),
        max_ratio: a1.max(a2),
        sample_points: ASSUMPTION_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::torus_distance;
    use std::f64::consts::TAU;

    #[test]
    fn toml_round_trip_and_defaults() {
        let spec: CouplingSpec = toml::from_str("kind = \"separable\"\neps = 0.02").unwrap();
        assert_eq!(spec, CouplingSpec::separable_example(0.02).unwrap());
        let spec: CouplingSpec = toml::from_str("kind = \"convolution\"").unwrap();
        assert_eq!(spec, CouplingSpec::convolution_example(0.0).unwrap());
        let back: CouplingSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let err = toml::from_str::<CouplingSpec>("kind = \"separable\"\neps = 0.2").unwrap_err();
        assert!(err.to_string().contains("CouplingSpec invariant"), "{err}");
        assert!(toml::from_str::<CouplingSpec>("kind = \"quadratic\"").is_err());
    }

    fn random_points(n: usize, seed: u64) -> Vec<TorusPoint> {
        let mut rng = CounterRng::new(seed, 0, 0);
        (0..n).map(|_| TorusPoint::new(rng.next_f64(), rng.next_f64())).collect()
    }

    fn bumpy(n: usize, a: f64, b: f64) -> TorusDensity {
        TorusDensity::from_fn(n, |x| 1.0 + a * (TAU * x.u).cos() + b * (TAU * (x.u + x.v)).sin()).unwrap()
    }

    #[test]
    fn zero_and_mean_zero_fields_vanish() {
        let h = bumpy(32, 0.5, 0.3);
        let x = TorusPoint::new(0.3, 0.6);
        assert_eq!(CouplingSpec::zero().coupling_field(&MeasureView::Density(&h), x), [0.0, 0.0]);
        let u = TorusDensity::uniform(64).unwrap();
        let g = CouplingSpec::separable_example(0.02).unwrap().coupling_field(&MeasureView::Density(&u), x);
        assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn single_point_convolution() {
        let kernel = CouplingKernel::Convolution {
            kernel: TrigField::new(TrigPoly::new(vec![TrigTerm::sin([1, 0], 1.0)]), TrigPoly::zero()),
        };
        let spec = CouplingSpec::new(kernel, 0.01).unwrap();
        let pts = [TorusPoint::new(0.25, 0.0)];
        let g = spec.coupling_field(&MeasureView::Points(&pts), TorusPoint::new(0.5, 0.0));
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn apply_phi_examples() {
        let pts = random_points(1000, 1);
        let h = bumpy(16, 0.4, 0.2);
        let mu = MeasureView::Density(&h);
        let spec = CouplingSpec::separable_example(0.0).unwrap();
        assert!(pts.iter().all(|&p| spec.apply_phi(&mu, p) == p));

        let constant = TrigField::new(TrigPoly::constant(1.0), TrigPoly::constant(1.0));
        let spec = CouplingSpec::new(CouplingKernel::Separable { k1: constant.clone(), k2: constant }, 0.1).unwrap();
        let y = spec.apply_phi(&mu, TorusPoint::new(0.0, 0.0));
        assert!((y.u - 0.1).abs() < 1e-15 && (y.v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn coupled_map_is_t_after_phi() {
        let map = MapSpec::cat(0.01).unwrap();
        let h = bumpy(32, 0.6, -0.3);
        let spec = CouplingSpec::separable_example(0.04).unwrap();
        let field = spec.field(&MeasureView::Density(&h));
        let coupled = CoupledMap::new(&map, field.clone());
        for p in random_points(50, 2) {
            assert_eq!(coupled.apply(p), map.apply_map(field.apply_phi(p)));
        }
    }

    #[test]
    fn inversion_round_trip() {
        for spec in [CouplingSpec::separable_example(0.05).unwrap(), CouplingSpec::convolution_example(0.05).unwrap()]
        {
            let h = bumpy(32, 0.8, 0.15);
            let field = spec.field(&MeasureView::Density(&h));
            let mut worst = 0.0f64;
            for p in random_points(1000, 3) {
                let x = field.invert_phi(p).unwrap();
                worst = worst.max(torus_distance(field.apply_phi(x), p));
                assert!(torus_distance(field.invert_phi(field.apply_phi(p)).unwrap(), p) < 1e-11);
            }
            assert!(worst < 1e-11);
        }
        let id = CouplingSpec::separable_example(0.0).unwrap().field(&MeasureView::Density(&bumpy(8, 0.1, 0.1)));
        let p = TorusPoint::new(0.12, 0.34);
        assert_eq!(id.invert_phi(p).unwrap(), p);
    }

    #[test]
    fn rejects_too_strong_coupling() {
        let kernel = CouplingKernel::separable_example();
        let eps = 0.9 / kernel.jacobian_bound();
        assert!(matches!(CouplingSpec::new(kernel, eps), Err(Error::InvalidCoupling(_))));
        assert!(CouplingSpec::separable_example(0.05).is_ok());
        assert!(CouplingSpec::separable_example(-0.05).is_ok());
    }

    #[test]
    fn field_is_linear_in_the_measure() {
        for spec in [CouplingSpec::separable_example(0.03).unwrap(), CouplingSpec::convolution_example(0.03).unwrap()]
        {
            let h1 = bumpy(32, 0.7, 0.1);
            let h2 = bumpy(32, -0.2, 0.5);
            let mid = h1.mix(&h2, 0.5).unwrap();
            for x in random_points(20, 5) {
                let a = spec.coupling_field(&MeasureView::Density(&h1), x);
                let b = spec.coupling_field(&MeasureView::Density(&h2), x);
                let m = spec.coupling_field(&MeasureView::Density(&mid), x);
                for j in 0..2 {
                    assert!((m[j] - 0.5 * (a[j] + b[j])).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ensemble_and_histogram_agree() {
        let pts = random_points(200_000, 6)
            .into_iter()
            .map(|p| TorusPoint::new(p.u * 0.5 + 0.1 * (TAU * p.v).sin(), p.v))
            .collect::<Vec<_>>();
        let n = 128;
        let h = histogram(&pts, n);
        for spec in [CouplingSpec::separable_example(0.03).unwrap(), CouplingSpec::convolution_example(0.03).unwrap()]
        {
            for x in random_points(10, 7) {
                let a = spec.coupling_field(&MeasureView::Points(&pts), x);
                let b = spec.coupling_field(&MeasureView::Density(&h), x);
                let tol = 4.0 / n as f64 + 4.0 / (pts.len() as f64).sqrt();
                assert!((a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn empirical_field_is_permutation_and_duplication_invariant() {
        let spec = CouplingSpec::convolution_example(0.02).unwrap();
        let pts = random_points(101, 8);
        let mut rev = pts.clone();
        rev.reverse();
        let doubled: Vec<TorusPoint> = pts.iter().flat_map(|p| [*p, *p]).collect();
        let x = TorusPoint::new(0.4, 0.9);
        let base = spec.coupling_field(&MeasureView::Points(&pts), x);
        assert_eq!(base, spec.coupling_field(&MeasureView::Points(&rev), x));
        assert_eq!(base, spec.coupling_field(&MeasureView::Points(&doubled), x));
    }

    #[test]
    fn assumption_constants() {
        let h1 = bumpy(32, 0.5, 0.0);
        let h2 = bumpy(32, -0.3, 0.4);
        let zero = CouplingSpec::zero();
        let pairs = [(MeasureView::Density(&h1), MeasureView::Density(&h2))];
        let r = certify_assumptions(&zero, &pairs, &[(0.01, 0.02)]).unwrap();
        assert_eq!((r.a1_constant, r.a2_constant), (0.0, 0.0));

        let spec = CouplingSpec::separable_example(0.02).unwrap();
        let same = [(MeasureView::Density(&h1), MeasureView::Density(&h1))];
        assert_eq!(certify_assumptions(&spec, &same, &[(0.02, 0.02)]).unwrap().a1_constant, 0.0);

        let r = certify_assumptions(&spec, &pairs, &[(0.02, 0.01), (0.05, 0.0)]).unwrap();
        assert!(r.a1_constant > 0.0 && r.a2_constant > 0.0);
        // |μ₁(K2_j) − μ₂(K2_j)| ≤ ‖K2_j‖_∞ ‖h₁ − h₂‖_{L¹}, so the C² distance of
        // the fields is at most ‖K2‖_∞ times the C² size of K1
        let CouplingKernel::Separable { k1, k2 } = spec.kernel() else { unreachable!() };
        let order = |p: &TrigPoly, j: i32| p.terms.iter().map(|t| t.amplitude() * t.frequency().powi(j)).sum::<f64>();
        let k1_c2: f64 = (0..=2).map(|j| order(&k1.u, j).hypot(order(&k1.v, j))).sum();
        let k2_sup = k2.u.sup_bound().max(k2.v.sup_bound());
        assert!(r.a1_constant <= k1_c2 * k2_sup + 1e-12, "{} > {}", r.a1_constant, k1_c2 * k2_sup);
    }
}
