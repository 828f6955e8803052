//! Finite-N mean-field particle system `x_i ↦ T(Φ^ε_{μ_N}(x_i))` and its
//! comparison with the density evolution.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anosov::MapSpec;
use crate::coupling::{CouplingSpec, MeasureView};
use crate::error::{Error, Result};
use crate::meanfield::SelfConsistentOperator;
use crate::par;
use crate::rng::{key, CounterRng};
use crate::stats::{linear_fit, mean_std, symmetric_mean, LinearFit};
use crate::torus::{integrate, Observable, TorusDensity, TorusPoint};
use crate::trig::{TrigPoly, TrigTerm};

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub points: Vec<TorusPoint>,
    pub seed: u64,
    pub step: u64,
}

impl Ensemble {
    pub fn new(points: Vec<TorusPoint>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("an ensemble needs at least one particle".into()));
        }
        Ok(Self { points, seed, step: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One `u,v` row per particle.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,v\n");
        for p in &self.points {
            let _ = writeln!(s, "{:?},{:?}", p.u, p.v);
        }
        s
    }
}

/// Draws `count` i.i.d. points from the piecewise-constant density `h` by
/// inverse CDF over the flattened cells; particle `i` uses stream `(seed, 0, i)`.
pub fn sample_from_density(h: &TorusDensity, count: usize, seed: u64) -> Result<Ensemble> {
    let n = h.resolution();
    let mut cdf = Vec::with_capacity(n * n);
    let mut acc = 0.0;
    for x in h.cells() {
        acc += x;
        cdf.push(acc);
    }
    let total = acc;
    let points = par::map_indexed(count, |i| {
        let mut rng = CounterRng::new(seed, 0, i as u64);
        let target = rng.next_f64() * total;
        let cell = cdf.partition_point(|c| *c <= target).min(n * n - 1);
        let (r, c) = (cell / n, cell % n);
        TorusPoint::new((c as f64 + rng.next_f64()) / n as f64, (r as f64 + rng.next_f64()) / n as f64)
    });
    Ensemble::new(points, seed)
}

/// Synchronous update: the coupling field is frozen from the pre-step positions.
pub fn step_ensemble(map: &MapSpec, coupling: &CouplingSpec, e: &Ensemble) -> Ensemble {
    let field = coupling.field(&MeasureView::Points(&e.points));
    let points = par::map_indexed(e.points.len(), |i| map.apply_map(field.apply_phi(e.points[i])));
    Ensemble { points, seed: e.seed, step: e.step + 1 }
}

/// `(1/N) Σ φ(x_i)`, independent of particle order.
pub fn empirical_observable(e: &Ensemble, phi: &Observable) -> f64 {
    let mut values: Vec<f64> = e.points.iter().map(|p| phi.eval(*p)).collect();
    symmetric_mean(&mut values)
}

/// `cos 2πu`, `sin 2πv`, `cos 2π(u+v)`.
pub fn standard_observables() -> Vec<(String, Observable)> {
    vec![
        ("cos_u".into(), Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 0], 1.0)]))),
        ("sin_v".into(), Observable::new(TrigPoly::new(vec![TrigTerm::sin([0, 1], 1.0)]))),
        ("cos_u_plus_v".into(), Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 1], 1.0)]))),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub observable_id: String,
    pub gap_mean: f64,
    pub gap_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSlope {
    pub observable_id: String,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub observables: Vec<String>,
    pub sizes: Vec<usize>,
    pub steps: usize,
    pub trials: usize,
    pub rows: Vec<GapRow>,
    /// Least-squares slope of `log gap_mean` against `log N`, per observable.
    pub slopes: Vec<GapSlope>,
}

/// Compares ensemble averages with the density evolution after `steps` steps.
///
/// The density side runs `op` (its map, coupling and resolution); trial `t` at
/// size `N` samples with seed `key(seed, N, t)`.
pub fn meanfield_gap(
    op: &SelfConsistentOperator,
    h0: &TorusDensity,
    sizes: &[usize],
    steps: usize,
    observables: &[(String, Observable)],
    trials: usize,
    seed: u64,
) -> Result<GapReport> {
    if sizes.len() < 3 || sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
        return Err(Error::InvalidParameter("particle counts must be ≥ 3 strictly increasing positive values".into()));
    }
    if trials == 0 || observables.is_empty() {
        return Err(Error::InvalidParameter("need at least one trial and one observable".into()));
    }
    let cfg = op.config();
    let mut h = h0.clone();
    for _ in 0..steps {
        h = op.step(&h)?;
    }
    let reference = observables.iter().map(|(_, phi)| integrate(&h, phi)).collect::<Result<Vec<_>>>()?;

    let mut gaps = vec![vec![Vec::with_capacity(trials); sizes.len()]; observables.len()];
    for (si, &count) in sizes.iter().enumerate() {
        for t in 0..trials {
            let mut e = sample_from_density(h0, count, key(seed, count as u64, t as u64))?;
            for _ in 0..steps {
                e = step_ensemble(&cfg.map, &cfg.coupling, &e);
            }
            for (oi, (_, phi)) in observables.iter().enumerate() {
                gaps[oi][si].push((empirical_observable(&e, phi) - reference[oi]).abs());
            }
        }
    }

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (oi, (id, _)) in observables.iter().enumerate() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (si, &count) in sizes.iter().enumerate() {
            let (gap_mean, gap_std) = mean_std(&gaps[oi][si]);
            rows.push(GapRow { n: count, observable_id: id.clone(), gap_mean, gap_std });
            if gap_mean > 0.0 {
                xs.push((count as f64).ln());
                ys.push(gap_mean.ln());
            }
        }
        slopes.push(GapSlope { observable_id: id.clone(), fit: linear_fit(&xs, &ys) });
    }
    Ok(GapReport {
        observables: observables.iter().map(|(id, _)| id.clone()).collect(),
        sizes: sizes.to_vec(),
        steps,
        trials,
        rows,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingKernel;
    use crate::meanfield::{trig_bump, SelfConsistentConfig};
    use crate::trig::TrigField;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn cat() -> MapSpec {
        MapSpec::cat(0.01).unwrap()
    }

    fn cloud(n: usize, seed: u64) -> Ensemble {
        sample_from_density(&TorusDensity::uniform(4).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn single_particle_closed_form() {
        let spec = CouplingSpec::separable_example(0.03).unwrap();
        let x = TorusPoint::new(0.2, 0.65);
        let e = Ensemble::new(vec![x], 1).unwrap();
        let next = step_ensemble(&cat(), &spec, &e);
        // μ = δ_x: G_u = sin 2πv · cos 2πv, G_v = sin 2πu · cos 2πu
        let gu = (TAU * x.v).sin() * (TAU * x.v).cos();
        let gv = (TAU * x.u).sin() * (TAU * x.u).cos();
        let expect = cat().apply_map(TorusPoint::new(x.u + 0.03 * gu, x.v + 0.03 * gv));
        assert!(crate::torus::torus_distance(next.points[0], expect) < 1e-14);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn uncoupled_particles_follow_the_map() {
        let mut e = cloud(50, 3);
        e.points[7] = e.points[3];
        let orbits: Vec<TorusPoint> = e.points.iter().map(|p| cat().apply_map(*p)).collect();
        for spec in [CouplingSpec::separable_example(0.0).unwrap(), CouplingSpec::zero()] {
            let next = step_ensemble(&cat(), &spec, &e);
            assert_eq!(next.points, orbits);
            assert_eq!(next.points[7], next.points[3]);
        }
    }

    #[test]
    fn observable_examples() {
        let phi = Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 0], 1.0)]));
        let one = Observable::new(TrigPoly::constant(1.0));
        let e = Ensemble::new(vec![TorusPoint::new(0.1, 0.2)], 0).unwrap();
        assert_eq!(empirical_observable(&e, &phi), phi.eval(e.points[0]));
        let big = cloud(100_000, 11);
        assert_eq!(empirical_observable(&big, &one), 1.0);
        let band = 3.0 * 0.5f64.sqrt() / (big.len() as f64).sqrt();
        assert!(empirical_observable(&big, &phi).abs() < band);
    }

    #[test]
    fn sampling_is_reproducible_and_follows_density() {
        let h = trig_bump(32, [1, 0], 0.8, 0.0).unwrap();
        let a = sample_from_density(&h, 20_000, 5).unwrap();
        assert_eq!(a, sample_from_density(&h, 20_000, 5).unwrap());
        assert_ne!(a, sample_from_density(&h, 20_000, 6).unwrap());
        // E[cos 2πu] = 0.4 under 1 + 0.8 cos 2πu (up to cell averaging)
        let phi = Observable::new(TrigPoly::new(vec![TrigTerm::cos([1, 0], 1.0)]));
        assert!((empirical_observable(&a, &phi) - 0.4).abs() < 0.02);
        assert_eq!(Ensemble::new(Vec::new(), 0), Err(Error::InvalidParameter("an ensemble needs at least one particle".into())));
    }

    #[test]
    fn csv_has_one_row_per_particle() {
        let e = cloud(9, 2);
        let csv = e.to_csv();
        assert_eq!(csv.lines().next(), Some("u,v"));
        assert_eq!(csv.lines().count(), 10);
    }

    fn kernels() -> Vec<CouplingSpec> {
        let k = CouplingKernel::Separable {
            k1: TrigField::new(TrigPoly::new(vec![TrigTerm::cos([1, 1], 0.7)]), TrigPoly::new(vec![TrigTerm::sin([2, 0], 0.5)])),
            k2: TrigField::new(TrigPoly::new(vec![TrigTerm::sin([0, 1], 1.0)]), TrigPoly::new(vec![TrigTerm::cos([1, -1], 1.0)])),
        };
        vec![CouplingSpec::separable_example(0.04).unwrap(), CouplingSpec::convolution_example(0.04).unwrap(), CouplingSpec::new(k, 0.02).unwrap()]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permutation_changes_nothing(seed in 0u64..1000, rot in 1usize..40) {
            let e = cloud(41, seed);
            let mut shuffled = e.clone();
            shuffled.points.rotate_left(rot);
            shuffled.points.swap(0, 40);
            for spec in kernels() {
                let a = step_ensemble(&cat(), &spec, &e);
                let b = step_ensemble(&cat(), &spec, &shuffled);
                let mut pa = a.points.clone();
                let mut pb = b.points.clone();
                let ord = |p: &TorusPoint, q: &TorusPoint| p.u.total_cmp(&q.u).then(p.v.total_cmp(&q.v));
                pa.sort_by(ord);
                pb.sort_by(ord);
                prop_assert_eq!(pa, pb);
            }
        }

        #[test]
        fn duplication_leaves_field_unchanged(seed in 0u64..1000) {
            let e = cloud(33, seed);
            let doubled: Vec<TorusPoint> = e.points.iter().flat_map(|p| [*p, *p]).collect();
            for spec in kernels() {
                let a = spec.field(&MeasureView::Points(&e.points));
                let b = spec.field(&MeasureView::Points(&doubled));
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn same_seed_same_trajectory(seed in 0u64..1000) {
            let spec = CouplingSpec::separable_example(0.03).unwrap();
            let run = |s| {
                let mut e = cloud(64, s);
                for _ in 0..5 {
                    e = step_ensemble(&cat(), &spec, &e);
                }
                e
            };
            prop_assert_eq!(run(seed), run(seed));
        }
    }

    #[test]
    fn gap_rejects_bad_sizes() {
        let op = SelfConsistentOperator::new(SelfConsistentConfig::new(cat(), CouplingSpec::zero()).with_resolution(16)).unwrap();
        let h0 = TorusDensity::uniform(16).unwrap();
        let obs = standard_observables();
        assert!(meanfield_gap(&op, &h0, &[10, 100], 0, &obs, 2, 0).is_err());
        assert!(meanfield_gap(&op, &h0, &[10, 10, 100], 0, &obs, 2, 0).is_err());
    }

    #[test]
    fn pure_sampling_gap_scales_like_inverse_root() {
        let n = 32;
        let op = SelfConsistentOperator::new(SelfConsistentConfig::new(cat(), CouplingSpec::zero()).with_resolution(n)).unwrap();
        let h0 = trig_bump(n, [1, 1], 0.5, 0.2).unwrap();
        let rep = meanfield_gap(&op, &h0, &[100, 1000, 10_000], 0, &standard_observables(), 16, 9).unwrap();
        assert_eq!(rep.rows.len(), 9);
        for s in &rep.slopes {
            let slope = s.fit.unwrap().slope;
            assert!((-0.8..=-0.2).contains(&slope), "{}: {slope}", s.observable_id);
        }
    }
}
