//! The site map `T(x) = A·x + δ·p(x) mod 1`, its derivative and inverse, and a
//! sampled certificate of cone invariance along orbits of map sequences.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::par;
use crate::rng::CounterRng;
use crate::stats::linear_fit;
use crate::torus::{torus_distance, TorusPoint};
use crate::trig::{TrigField, TrigPoly, TrigTerm};

/// A smooth self-map of the torus with a computable derivative.
pub trait TorusMap: Sync {
    fn apply(&self, x: TorusPoint) -> TorusPoint;
    fn jacobian(&self, x: TorusPoint) -> Mat2;
    /// A continuous lift to the plane; `apply` is this reduced mod 1.
    fn lift(&self, x: [f64; 2]) -> [f64; 2];
}

pub type IntMatrix = [[i64; 2]; 2];

pub const CAT_MATRIX: IntMatrix = [[2, 1], [1, 1]];
pub const DEFAULT_DELTA: f64 = 0.01;

/// `(sin 2πv, sin 2πu)`
pub fn default_perturbation() -> TrigField {
    TrigField::new(
        TrigPoly::new(vec![TrigTerm::sin([0, 1], 1.0)]),
        TrigPoly::new(vec![TrigTerm::sin([1, 0], 1.0)]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpecConfig {
    #[serde(default = "default_matrix")]
    pub matrix: IntMatrix,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_perturbation")]
    pub perturbation: TrigField,
}

fn default_matrix() -> IntMatrix {
    CAT_MATRIX
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Hyperbolic toral automorphism plus a small trigonometric perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapSpecConfig", into = "MapSpecConfig")]
pub struct MapSpec {
    matrix: IntMatrix,
    linear: Mat2,
    linear_inv: Mat2,
    delta: f64,
    perturbation: TrigField,
    unstable: (f64, [f64; 2]),
    stable: (f64, [f64; 2]),
}

impl TryFrom<MapSpecConfig> for MapSpec {
    type Error = Error;

    fn try_from(c: MapSpecConfig) -> Result<Self> {
        MapSpec::new(c.matrix, c.delta, c.perturbation)
    }
}

impl From<MapSpec> for MapSpecConfig {
    fn from(m: MapSpec) -> Self {
        MapSpecConfig { matrix: m.matrix, delta: m.delta, perturbation: m.perturbation }
    }
}

impl Default for MapSpec {
    fn default() -> Self {
        Self::cat(DEFAULT_DELTA).expect("default map is valid")
    }
}

impl MapSpec {
    pub fn new(matrix: IntMatrix, delta: f64, perturbation: TrigField) -> Result<Self> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det.abs() != 1 {
            return Err(Error::InvalidMap(format!("det A = {det}, must be ±1")));
        }
        let trace = matrix[0][0] + matrix[1][1];
        if trace.abs() <= 2 {
            return Err(Error::InvalidMap(format!("|trace A| = {} must exceed 2", trace.abs())));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidMap(format!("perturbation amplitude δ = {delta} must be ≥ 0")));
        }
        let linear = matrix.map(|row| row.map(|x| x as f64));
        let linear_inv = linalg::inverse(&linear).expect("unimodular");
        let [unstable, stable] = linalg::real_eigen(&linear).expect("hyperbolic matrices have real spectrum");
        let gap = unstable.0.abs() - stable.0.abs();
        let bound = delta * perturbation.jacobian_bound();
        if bound >= 0.5 * gap {
            return Err(Error::InvalidMap(format!(
                "δ·sup‖Dp‖ ≤ {bound:.4} is not below half the spectral gap {:.4}",
                0.5 * gap
            )));
        }
        Ok(Self { matrix, linear, linear_inv, delta, perturbation, unstable, stable })
    }

    pub fn cat(delta: f64) -> Result<Self> {
        Self::new(CAT_MATRIX, delta, default_perturbation())
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.matrix, delta, self.perturbation.clone())
    }

    pub fn matrix(&self) -> IntMatrix {
        self.matrix
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn perturbation(&self) -> &TrigField {
        &self.perturbation
    }

    /// Expanding eigenvalue of `A` and its unit eigenvector.
    pub fn unstable_eigen(&self) -> (f64, [f64; 2]) {
        self.unstable
    }

    /// Contracting eigenvalue of `A` and its unit eigenvector.
    pub fn stable_eigen(&self) -> (f64, [f64; 2]) {
        self.stable
    }

    #[inline]
    fn lift_point(&self, x: [f64; 2]) -> [f64; 2] {
        let mut y = linalg::apply(&self.linear, x);
        if self.delta != 0.0 {
            let p = self.perturbation.eval(TorusPoint { u: x[0], v: x[1] });
            y[0] += self.delta * p[0];
            y[1] += self.delta * p[1];
        }
        y
    }

    fn lift_jacobian(&self, x: [f64; 2]) -> Mat2 {
        if self.delta == 0.0 {
            return self.linear;
        }
        let dp = self.perturbation.jacobian(TorusPoint { u: x[0], v: x[1] });
        linalg::add(&self.linear, &linalg::scale(&dp, self.delta))
    }

    pub fn apply_map(&self, x: TorusPoint) -> TorusPoint {
        let y = self.lift_point(x.to_array());
        TorusPoint::new(y[0], y[1])
    }

    pub fn jacobian_at(&self, x: TorusPoint) -> Mat2 {
        self.lift_jacobian(x.to_array())
    }

    /// Newton's method on the lift, seeded at `A⁻¹·y` and its eight integer
    /// neighbours if the first seed stalls.
    pub fn invert_map(&self, y: TorusPoint) -> Result<TorusPoint> {
        const MAX_ITER: usize = 50;
        let target = y.to_array();
        let mut iterations = 0;
        for (du, dv) in std::iter::once((0, 0)).chain(
            (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))).filter(|m| *m != (0, 0)),
        ) {
            let t = [target[0] + du as f64, target[1] + dv as f64];
            let mut x = linalg::apply(&self.linear_inv, t);
            for _ in 0..MAX_ITER {
                iterations += 1;
                let fx = self.lift_point(x);
                let r = [fx[0] - t[0], fx[1] - t[1]];
                if linalg::norm(r) < 1e-12 {
                    break;
                }
                let Some(jinv) = linalg::inverse(&self.lift_jacobian(x)) else { break };
                let step = linalg::apply(&jinv, r);
                x = [x[0] - step[0], x[1] - step[1]];
            }
            let candidate = TorusPoint::new(x[0], x[1]);
            if torus_distance(self.apply_map(candidate), y) < 1e-10 {
                return Ok(candidate);
            }
        }
        Err(Error::NoConvergence { point: y, iterations })
    }
}

impl TorusMap for MapSpec {
    fn apply(&self, x: TorusPoint) -> TorusPoint {
        self.apply_map(x)
    }

    fn jacobian(&self, x: TorusPoint) -> Mat2 {
        self.jacobian_at(x)
    }

    fn lift(&self, x: [f64; 2]) -> [f64; 2] {
        self.lift_point(x)
    }
}

/// Constant cone of directions around the stable axis of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    axis: [f64; 2],
    half_angle: f64,
}

pub const DEFAULT_HALF_ANGLE_DEG: f64 = 15.0;

impl ConeSpec {
    pub fn new(axis: [f64; 2], half_angle: f64) -> Result<Self> {
        let len = linalg::norm(axis);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidCone("axis must be a nonzero vector".into()));
        }
        if !(half_angle > 0.0 && half_angle < PI / 4.0) {
            return Err(Error::InvalidCone(format!("half-angle {half_angle} outside (0, π/4)")));
        }
        Ok(Self { axis: [axis[0] / len, axis[1] / len], half_angle })
    }

    /// Cone around the stable eigendirection of `map`'s linear part.
    pub fn stable_for(map: &MapSpec, half_angle: f64) -> Result<Self> {
        let cone = Self::new(map.stable_eigen().1, half_angle)?;
        if cone.contains(map.unstable_eigen().1) {
            return Err(Error::InvalidCone("cone contains the unstable eigendirection".into()));
        }
        Ok(cone)
    }

    pub fn default_for(map: &MapSpec) -> Self {
        Self::stable_for(map, DEFAULT_HALF_ANGLE_DEG.to_radians()).expect("15° cone around a hyperbolic axis")
    }

    pub fn axis(&self) -> [f64; 2] {
        self.axis
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    /// Unsigned angle between the line through `w` and the axis, in [0, π/2].
    pub fn angle_to_axis(&self, w: [f64; 2]) -> f64 {
        let c = (w[0] * self.axis[0] + w[1] * self.axis[1]).abs() / linalg::norm(w);
        c.min(1.0).acos()
    }

    pub fn contains(&self, w: [f64; 2]) -> bool {
        self.angle_to_axis(w) <= self.half_angle
    }

    pub fn strictly_contains(&self, w: [f64; 2]) -> bool {
        self.angle_to_axis(w) < self.half_angle
    }

    /// Unit vector at signed angle `theta` from the axis.
    pub fn direction(&self, theta: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        [c * self.axis[0] - s * self.axis[1], s * self.axis[0] + c * self.axis[1]]
    }

    /// Sampled directions inside the cone, boundary included.
    fn inside_directions(&self) -> Vec<[f64; 2]> {
        (0..=8).map(|i| self.direction(-self.half_angle + self.half_angle * i as f64 / 4.0)).collect()
    }

    /// Sampled directions in the closure of the complement.
    fn outside_directions(&self) -> Vec<[f64; 2]> {
        let span = PI - 2.0 * self.half_angle;
        (0..=16).map(|i| self.direction(self.half_angle + span * i as f64 / 16.0)).collect()
    }
}

/// Per-sample, per-depth growth record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeRecord {
    pub sample: usize,
    pub depth: usize,
    /// `min_{v ∈ C} ‖D T^{-k} v‖/‖v‖`
    pub min_stable_expansion: f64,
    /// `min_{v ∉ C} ‖D T^{k} v‖/‖v‖`
    pub min_unstable_expansion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub invariance_violations: usize,
    /// Fitted contraction rate ν ∈ (0,1) of stable vectors.
    pub nu: f64,
    /// Fitted expansion rate λ > 1 of unstable vectors.
    pub lambda: f64,
    /// Largest `c ≤ 1` with `min expansion ≥ c·rateᵏ` over every record.
    pub c: f64,
    pub samples: usize,
    pub depth: usize,
    pub records: Vec<ConeRecord>,
}

struct SampleOutcome {
    violation: Option<(TorusPoint, [f64; 2])>,
    log_smax: Vec<f64>,
    log_smax_inv: Vec<f64>,
    records: Vec<ConeRecord>,
}

fn certify_sample(maps: &[&dyn TorusMap], cone: &ConeSpec, seed: u64, sample: usize, depth: usize) -> SampleOutcome {
    let mut rng = CounterRng::new(seed, 0xC0E5, sample as u64);
    let mut x = TorusPoint::new(rng.next_f64(), rng.next_f64());
    let inside = cone.inside_directions();
    let outside = cone.outside_directions();
    let mut product = linalg::IDENTITY;
    // accumulated separately: inverting a long product loses the determinant
    let mut inv = linalg::IDENTITY;
    let mut violation = None;
    let mut log_smax = Vec::with_capacity(depth);
    let mut log_smax_inv = Vec::with_capacity(depth);
    let mut records = Vec::with_capacity(depth);
    for k in 0..depth {
        let map = maps[k % maps.len()];
        let step = map.jacobian(x);
        let step_inv = linalg::inverse(&step).expect("diffeomorphism has invertible derivative");
        if violation.is_none() {
            // D T⁻¹ at T(x) must pull the cone strictly inside the cone at x
            for &w in &inside {
                if !cone.strictly_contains(linalg::apply(&step_inv, w)) {
                    violation = Some((map.apply(x), w));
                    break;
                }
            }
        }
        product = linalg::mul(&step, &product);
        inv = linalg::mul(&inv, &step_inv);
        x = map.apply(x);
        log_smax.push(linalg::singular_values(&product).0.ln());
        log_smax_inv.push(linalg::singular_values(&inv).0.ln());
        let min_stable = inside.iter().map(|&w| linalg::norm(linalg::apply(&inv, w))).fold(f64::INFINITY, f64::min);
        let min_unstable =
            outside.iter().map(|&w| linalg::norm(linalg::apply(&product, w))).fold(f64::INFINITY, f64::min);
        records.push(ConeRecord {
            sample,
            depth: k + 1,
            min_stable_expansion: min_stable,
            min_unstable_expansion: min_unstable,
        });
    }
    SampleOutcome { violation, log_smax, log_smax_inv, records }
}

/// Samples orbits of the concatenation `… ∘ maps[1] ∘ maps[0]` (cycled to
/// `depth`), checks strict cone invariance under every inverse derivative, and
/// fits the growth rates of Jacobian products.
///
/// Rates come from the mean log singular values of the products
/// `D_x(T_k ∘ ⋯ ∘ T_1)` fitted against `k` (through `k = 0`), so for a linear
/// map they reproduce the eigenvalues exactly; `c` is the worst constant of the
/// cone-restricted expansions against those rates.
pub fn certify_cones_report(
    maps: &[&dyn TorusMap],
    cone: &ConeSpec,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<ConeReport> {
    if maps.is_empty() {
        return Err(Error::InvalidParameter("empty map sequence".into()));
    }
    if samples == 0 || depth == 0 {
        return Err(Error::InvalidParameter("samples and depth must be ≥ 1".into()));
    }
    let outcomes = par::map_indexed(samples, |s| certify_sample(maps, cone, seed, s, depth));
    let violations = outcomes.iter().filter(|o| o.violation.is_some()).count();

    let ks: Vec<f64> = (0..=depth).map(|k| k as f64).collect();
    let mean_at = |pick: &dyn Fn(&SampleOutcome) -> &[f64]| -> Vec<f64> {
        std::iter::once(0.0)
            .chain((0..depth).map(|k| outcomes.iter().map(|o| pick(o)[k]).sum::<f64>() / samples as f64))
            .collect()
    };
    let lu = mean_at(&|o| &o.log_smax);
    let ls = mean_at(&|o| &o.log_smax_inv);
    let lambda = linear_fit(&ks, &lu).map(|f| f.slope.exp()).unwrap_or(f64::NAN);
    let nu = linear_fit(&ks, &ls).map(|f| (-f.slope).exp()).unwrap_or(f64::NAN);

    let records: Vec<ConeRecord> = outcomes.into_iter().flat_map(|o| o.records).collect();
    let c = records
        .iter()
        .map(|r| {
            let k = r.depth as i32;
            (r.min_stable_expansion * nu.powi(k)).min(r.min_unstable_expansion / lambda.powi(k))
        })
        .fold(1.0f64, f64::min);

    Ok(ConeReport { invariance_violations: violations, nu, lambda, c, samples, depth, records })
}

/// Like [`certify_cones_report`] but fails with the first witness on any violation.
pub fn certify_cones(
    maps: &[&dyn TorusMap],
    cone: &ConeSpec,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<ConeReport> {
    let report = certify_cones_report(maps, cone, samples, depth, seed)?;
    if report.invariance_violations > 0 {
        // recompute serially to find the lowest-index witness
        for s in 0..samples {
            if let Some((point, direction)) = certify_sample(maps, cone, seed, s, depth).violation {
                return Err(Error::ConeViolation { point, direction });
            }
        }
    }
    Ok(report)
}
