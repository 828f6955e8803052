//! Independent reference computations for tests. None of these touch the Ulam
//! matrices; they sample or invert the maps directly.

use crate::anosov::{MapSpec, TorusMap};
use crate::linalg;
use crate::par;
use crate::rng::CounterRng;
use crate::torus::{cell_centre, Observable, TorusDensity, TorusPoint};

/// Monte-Carlo push-forward of `h` under `map`: `per_axis²` jittered samples per
/// source cell, each carrying mass `h_i/(per_axis²·n²)`, binned at resolution `n`.
pub fn stratified_pushforward(map: &dyn TorusMap, h: &TorusDensity, per_axis: usize, seed: u64) -> TorusDensity {
    let n = h.resolution();
    let k = per_axis;
    let rows = par::map_indexed(n, |r| {
        let mut local: Vec<(usize, f64)> = Vec::with_capacity(n * k * k);
        for c in 0..n {
            let i = r * n + c;
            let w = h.cells()[i] / (k * k) as f64;
            let mut rng = CounterRng::new(seed, 0x0AC1E, i as u64);
            for b in 0..k {
                for a in 0..k {
                    let u = (c as f64 + (a as f64 + rng.next_f64()) / k as f64) / n as f64;
                    let v = (r as f64 + (b as f64 + rng.next_f64()) / k as f64) / n as f64;
                    local.push((map.apply(TorusPoint::new(u, v)).cell(n), w));
                }
            }
        }
        local
    });
    let mut cells = vec![0.0; n * n];
    for row in rows {
        for (t, w) in row {
            cells[t] += w;
        }
    }
    TorusDensity::from_cells(n, cells).expect("positive mass")
}

/// `(𝓛_T f)(y) = f(T⁻¹y)/|det DT(T⁻¹y)|` sampled at cell centres.
pub fn exact_pushforward(map: &MapSpec, f: impl Fn(TorusPoint) -> f64, n: usize) -> TorusDensity {
    let cells = (0..n * n)
        .map(|i| {
            let x = map.invert_map(cell_centre(n, i)).expect("invertible");
            f(x) / linalg::det(&map.jacobian_at(x)).abs()
        })
        .collect();
    TorusDensity::from_cells(n, cells).expect("positive")
}

/// `∫ h · (φ∘T)` with `sub×sub` midpoints per cell.
pub fn integrate_composed(h: &TorusDensity, phi: &Observable, map: &dyn TorusMap, sub: usize) -> f64 {
    let n = h.resolution();
    let m = (n * sub) as f64;
    let per_cell = par::map_indexed(n * n, |i| {
        let (r, c) = (i / n, i % n);
        let mut acc = 0.0;
        for b in 0..sub {
            for a in 0..sub {
                let x = TorusPoint::new(((c * sub + a) as f64 + 0.5) / m, ((r * sub + b) as f64 + 0.5) / m);
                acc += phi.eval(map.apply(x));
            }
        }
        h.cells()[i] * acc / (sub * sub) as f64
    });
    per_cell.iter().sum::<f64>() / (n * n) as f64
}

/// Unstable and stable eigenvalues `(3 ± √5)/2` of the cat matrix.
pub fn cat_eigenvalues() -> (f64, f64) {
    let r = 5f64.sqrt();
    ((3.0 + r) / 2.0, (3.0 - r) / 2.0)
}

/// `|det DT|` integrates to 1 against Lebesgue for any torus diffeomorphism of
/// degree 1; a Monte-Carlo reference for the inverse-density check.
pub fn mean_jacobian_determinant(map: &dyn TorusMap, samples: usize, seed: u64) -> f64 {
    let mut rng = CounterRng::new(seed, 0xDE7, 0);
    let mut acc = 0.0;
    for _ in 0..samples {
        let x = TorusPoint::new(rng.next_f64(), rng.next_f64());
        acc += linalg::det(&map.jacobian(x)).abs();
    }
    acc / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::l1_distance;
    use std::f64::consts::TAU;

    #[test]
    fn oracles_agree_with_each_other() {
        let m = MapSpec::cat(0.01).unwrap();
        let n = 32;
        let f = |x: TorusPoint| 1.0 + 0.5 * (TAU * x.v).cos();
        let h = TorusDensity::from_fn(n, f).unwrap();
        let mc = stratified_pushforward(&m, &h, 16, 1);
        let exact = exact_pushforward(&m, f, n);
        assert!(l1_distance(&mc, &exact).unwrap() < 0.05);
    }

    #[test]
    fn cat_eigenvalues_are_reciprocal() {
        let (l, s) = cat_eigenvalues();
        assert!((l * s - 1.0).abs() < 1e-15);
        assert!((mean_jacobian_determinant(&MapSpec::cat(0.02).unwrap(), 10_000, 3) - 1.0).abs() < 1e-2);
    }
}
