//! The self-consistent operator `𝓛_ε(h) = 𝓛_{T_h^ε} h` and the experiments
//! built on it: fixed points, uniqueness, ε-sweeps, memory loss and the
//! proxy-norm absorption diagnostic.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::anosov::MapSpec;
use crate::coupling::{CouplingSpec, MeasureView};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::{gated_rate, RateFit};
use crate::torus::{cell_centre, l1_distance, proxy_strong_norm, torus_distance, TorusDensity, TorusPoint};
use crate::transfer::{apply_coupled, CoupledTransfer, DEFAULT_QUADRATURE};

pub const DEFAULT_RESOLUTION: usize = 256;
pub const DEFAULT_TOL_FIX: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_RATE_WINDOW: usize = 30;

/// Differences below this are treated as rounding noise in decay fits.
pub const DECAY_FLOOR: f64 = 1e-13;

/// Mass drift tolerated per step before the iteration is declared broken.
const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistentConfig {
    pub map: MapSpec,
    pub coupling: CouplingSpec,
    pub resolution: usize,
    pub quadrature: usize,
    pub tol_fix: f64,
    pub max_iterations: usize,
    pub rate_window: usize,
}

impl SelfConsistentConfig {
    pub fn new(map: MapSpec, coupling: CouplingSpec) -> Self {
        Self {
            map,
            coupling,
            resolution: DEFAULT_RESOLUTION,
            quadrature: DEFAULT_QUADRATURE,
            tol_fix: DEFAULT_TOL_FIX,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            rate_window: DEFAULT_RATE_WINDOW,
        }
    }

    pub fn with_resolution(mut self, n: usize) -> Self {
        self.resolution = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::torus::check_resolution(self.resolution)?;
        if !(self.tol_fix > 0.0) {
            return Err(Error::InvalidParameter(format!("tol_fix = {} must be > 0", self.tol_fix)));
        }
        if self.rate_window < 5 {
            return Err(Error::InvalidParameter(format!("rate window {} must be ≥ 5", self.rate_window)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// A configuration with its `T` stage assembled.
#[derive(Debug, Clone)]
pub struct SelfConsistentOperator {
    cfg: SelfConsistentConfig,
    transfer: CoupledTransfer,
}

impl SelfConsistentOperator {
    pub fn new(cfg: SelfConsistentConfig) -> Result<Self> {
        cfg.validate()?;
        let transfer = CoupledTransfer::new(&cfg.map, cfg.coupling.clone(), cfg.resolution, cfg.quadrature)?;
        Ok(Self { cfg, transfer })
    }

    /// Reuses the assembled `T` stage with a different coupling.
    pub fn with_coupling(&self, coupling: CouplingSpec) -> Self {
        let mut cfg = self.cfg.clone();
        cfg.coupling = coupling.clone();
        Self { cfg, transfer: self.transfer.with_coupling(coupling) }
    }

    pub fn config(&self) -> &SelfConsistentConfig {
        &self.cfg
    }

    pub fn transfer(&self) -> &CoupledTransfer {
        &self.transfer
    }

    pub fn resolution(&self) -> usize {
        self.cfg.resolution
    }

    /// One application of `𝓛_ε`, with `h` driving its own coupling.
    pub fn step(&self, h: &TorusDensity) -> Result<TorusDensity> {
        self.step_driven(h, h)
    }

    /// `𝓛_{T_g^ε} h` for an external driving density `g`.
    pub fn step_driven(&self, g: &TorusDensity, h: &TorusDensity) -> Result<TorusDensity> {
        let out = apply_coupled(&self.transfer.plan(MeasureView::Density(g)), h)?;
        check_probability(&out)?;
        Ok(out)
    }

    /// `steps` applications of `𝓛_ε`, returning every iterate including `h0`.
    pub fn trajectory(&self, h0: &TorusDensity, steps: usize) -> Result<Vec<TorusDensity>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(h0.clone());
        for k in 0..steps {
            let next = self.step(&out[k])?;
            out.push(next);
        }
        Ok(out)
    }
}

fn check_probability(h: &TorusDensity) -> Result<()> {
    let mass = h.mass();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::NotProbability(format!("mass drifted to {mass}")));
    }
    if h.min_value() < 0.0 {
        return Err(Error::NotProbability(format!("negative cell value {}", h.min_value())));
    }
    Ok(())
}

pub fn sc_step(cfg: &SelfConsistentConfig, h: &TorusDensity) -> Result<TorusDensity> {
    SelfConsistentOperator::new(cfg.clone())?.step(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Withheld unless the tail fit has R² ≥ 0.9.
    pub rate: Option<RateFit>,
    /// The raw tail fit, trustworthy or not.
    pub tail_fit: Option<RateFit>,
    /// `residuals[k] = ‖h_{k+1} − h_k‖_{L¹}`.
    pub residuals: Vec<f64>,
    /// `proxy_trajectory[k] = proxy-BV of h_k`.
    pub proxy_trajectory: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// The last iterate `h_k`; when converged `‖𝓛_ε h_k − h_k‖ < tol_fix`.
    pub density: TorusDensity,
    pub report: ConvergenceReport,
}

impl FixedPoint {
    pub fn certified(&self) -> Result<&TorusDensity> {
        if self.report.converged {
            Ok(&self.density)
        } else {
            Err(Error::MaxIterationsExceeded { iterations: self.report.iterations, residual: self.report.final_residual })
        }
    }
}

/// Fits `log r_k` over the last `window` residuals above the rounding floor.
fn tail_rate(residuals: &[f64], window: usize) -> Option<RateFit> {
    crate::stats::geometric_rate(&tail_window(residuals, window))
}

/// Iterates `𝓛_ε` from `h0` until the L¹ step falls below `tol_fix`.
pub fn solve_fixed_point(op: &SelfConsistentOperator, h0: &TorusDensity) -> Result<FixedPoint> {
    let cfg = op.config();
    if h0.resolution() != cfg.resolution {
        return Err(Error::ResolutionMismatch { left: cfg.resolution, right: h0.resolution() });
    }
    let mut h = h0.clone();
    let mut residuals = Vec::new();
    let mut proxy_trajectory = vec![proxy_strong_norm(&h)];
    let mut converged = false;
    while residuals.len() < cfg.max_iterations {
        let next = op.step(&h)?;
        let r = l1_distance(&next, &h)?;
        residuals.push(r);
        if r < cfg.tol_fix {
            converged = true;
            break;
        }
        proxy_trajectory.push(proxy_strong_norm(&next));
        h = next;
    }
    let tail_fit = tail_rate(&residuals, cfg.rate_window);
    let rate = residual_rate(&residuals, cfg.rate_window);
    let report = ConvergenceReport {
        converged,
        iterations: residuals.len(),
        final_residual: residuals.last().copied().unwrap_or(0.0),
        rate,
        tail_fit,
        residuals,
        proxy_trajectory,
    };
    Ok(FixedPoint { density: h, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub distances: Vec<Vec<f64>>,
    pub max_distance: f64,
    pub inconclusive: bool,
    pub reports: Vec<ConvergenceReport>,
}

pub const MIN_INITS: usize = 5;

/// Solves from each initial density and compares the limits pairwise.
pub fn uniqueness_experiment(op: &SelfConsistentOperator, inits: &[TorusDensity]) -> Result<(UniquenessReport, Vec<TorusDensity>)> {
    if inits.len() < MIN_INITS {
        return Err(Error::InvalidParameter(format!("{} initial densities, need ≥ {MIN_INITS}", inits.len())));
    }
    let runs = inits.iter().map(|h0| solve_fixed_point(op, h0)).collect::<Result<Vec<_>>>()?;
    let k = runs.len();
    let mut distances = vec![vec![0.0; k]; k];
    let mut max_distance: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let d = l1_distance(&runs[i].density, &runs[j].density)?;
            distances[i][j] = d;
            distances[j][i] = d;
            max_distance = max_distance.max(d);
        }
    }
    let inconclusive = runs.iter().any(|r| !r.report.converged);
    let limits = runs.iter().map(|r| r.density.clone()).collect();
    let reports = runs.into_iter().map(|r| r.report).collect();
    Ok((UniquenessReport { distances, max_distance, inconclusive, reports }, limits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPair {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub l1_diff: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    /// `None` where the solver did not certify a fixed point.
    pub fixed_points: Vec<Option<TorusDensity>>,
    pub reports: Vec<ConvergenceReport>,
    /// Adjacent pairs where both ends are certified.
    pub pairs: Vec<SweepPair>,
    pub max_ratio: Option<f64>,
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("ε grid needs at least two points".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!("ε grid not strictly increasing at {} → {}", w[0], w[1])));
    }
    Ok(())
}

/// Fixed points along an increasing ε grid, each warm-started from the previous one.
pub fn lipschitz_sweep(op: &SelfConsistentOperator, grid: &[f64], h0: &TorusDensity) -> Result<SweepReport> {
    check_grid(grid)?;
    let ops = grid.iter().map(|&e| Ok(op.with_coupling(op.config().coupling.with_eps(e)?))).collect::<Result<Vec<_>>>()?;
    let mut start = h0.clone();
    let mut fixed_points = Vec::with_capacity(grid.len());
    let mut reports = Vec::with_capacity(grid.len());
    for eop in &ops {
        let run = solve_fixed_point(eop, &start)?;
        if run.report.converged {
            start = run.density.clone();
            fixed_points.push(Some(run.density));
        } else {
            fixed_points.push(None);
        }
        reports.push(run.report);
    }
    let mut pairs = Vec::new();
    for i in 0..grid.len() - 1 {
        if let (Some(a), Some(b)) = (&fixed_points[i], &fixed_points[i + 1]) {
            let l1_diff = l1_distance(a, b)?;
            pairs.push(SweepPair { eps_lo: grid[i], eps_hi: grid[i + 1], l1_diff, ratio: l1_diff / (grid[i + 1] - grid[i]) });
        }
    }
    let max_ratio = pairs.iter().map(|p| p.ratio).reduce(f64::max);
    Ok(SweepReport { grid: grid.to_vec(), fixed_points, reports, pairs, max_ratio })
}

/// L¹ distance between the warm-started sweep limit and a cold start from `h0`
/// at each requested grid index.
pub fn cold_start_deviation(op: &SelfConsistentOperator, sweep: &SweepReport, indices: &[usize], h0: &TorusDensity) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let eps = *sweep.grid.get(i).ok_or_else(|| Error::InvalidParameter(format!("grid index {i}")))?;
        let warm = sweep.fixed_points[i].as_ref().ok_or(Error::MaxIterationsExceeded {
            iterations: sweep.reports[i].iterations,
            residual: sweep.reports[i].final_residual,
        })?;
        let cold = solve_fixed_point(&op.with_coupling(op.config().coupling.with_eps(eps)?), h0)?;
        out.push((eps, l1_distance(cold.certified()?, warm)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryLossReport {
    /// `l1_diff[k]` after `k` steps; `l1_diff[0] = ‖h1 − h2‖`.
    pub l1_diff: Vec<f64>,
    /// Withheld unless R² ≥ 0.9; entries below the rounding floor are excluded.
    pub rate: Option<RateFit>,
    pub fit: Option<RateFit>,
}

/// Pushes `h1` and `h2` through the same frozen driving sequence.
pub fn memory_loss_experiment(
    op: &SelfConsistentOperator,
    driving: &[TorusDensity],
    h1: &TorusDensity,
    h2: &TorusDensity,
) -> Result<MemoryLossReport> {
    let (mut a, mut b) = (h1.clone(), h2.clone());
    let mut l1_diff = vec![l1_distance(&a, &b)?];
    for g in driving {
        a = op.step_driven(g, &a)?;
        b = op.step_driven(g, &b)?;
        l1_diff.push(l1_distance(&a, &b)?);
    }
    let fit = decay_fit(&l1_diff);
    let rate = fit.filter(|f| f.r_squared >= crate::stats::MIN_R_SQUARED);
    Ok(MemoryLossReport { l1_diff, rate, fit })
}

/// Geometric fit over the prefix of a decay curve above [`DECAY_FLOOR`].
fn decay_fit(values: &[f64]) -> Option<RateFit> {
    let end = values.iter().position(|v| !(*v > DECAY_FLOOR)).unwrap_or(values.len());
    crate::stats::geometric_rate(&values[..end])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Absorption {
    Absorbed,
    NotAbsorbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkReport {
    pub proxy: Vec<f64>,
    /// Empirical `K̂`: the tail maximum.
    pub plateau_level: f64,
    pub tail_min: f64,
    pub plateau: bool,
    pub blew_up: bool,
    pub verdict: Absorption,
}

pub const BK_TAIL: usize = 20;
pub const BK_PLATEAU_FACTOR: f64 = 1.1;
pub const BK_BLOWUP_FACTOR: f64 = 10.0;

pub fn bk_diagnostic(trajectory: &[TorusDensity]) -> Result<BkReport> {
    bk_from_proxy(trajectory.iter().map(proxy_strong_norm).collect())
}

/// Plateau test on the last [`BK_TAIL`] values of a proxy-norm trajectory.
pub fn bk_from_proxy(proxy: Vec<f64>) -> Result<BkReport> {
    if proxy.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let tail = &proxy[proxy.len().saturating_sub(BK_TAIL)..];
    let plateau_level = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let plateau = plateau_level < BK_PLATEAU_FACTOR * tail_min;
    let peak = proxy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let blew_up = peak > BK_BLOWUP_FACTOR * proxy[0];
    let verdict = if plateau && !blew_up { Absorption::Absorbed } else { Absorption::NotAbsorbed };
    Ok(BkReport { proxy, plateau_level, tail_min, plateau, blew_up, verdict })
}

/// `1 + amplitude·cos(2π k·x + phase)`; positive when `|amplitude| < 1`.
pub fn trig_bump(n: usize, k: [i32; 2], amplitude: f64, phase: f64) -> Result<TorusDensity> {
    if amplitude.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!("amplitude {amplitude} would allow negative values")));
    }
    TorusDensity::from_fn(n, |x| 1.0 + amplitude * (TAU * (k[0] as f64 * x.u + k[1] as f64 * x.v) + phase).cos())
}

/// Periodised Gaussian bump of width `sigma`, floored by `floor` (relative to the peak).
pub fn gaussian_bump(n: usize, centre: TorusPoint, sigma: f64, floor: f64) -> Result<TorusDensity> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("bump width {sigma} must be > 0")));
    }
    TorusDensity::from_fn(n, |x| floor + (-0.5 * (torus_distance(x, centre) / sigma).powi(2)).exp())
}

/// Five distinct smooth initial densities.
pub fn standard_inits(n: usize) -> Result<Vec<TorusDensity>> {
    Ok(vec![
        trig_bump(n, [1, 0], 0.9, 0.0)?,
        trig_bump(n, [0, 1], 0.6, 1.0)?,
        trig_bump(n, [1, 1], -0.5, 0.3)?,
        trig_bump(n, [2, -1], 0.4, 2.0)?,
        gaussian_bump(n, TorusPoint::new(0.3, 0.7), 0.15, 0.1)?,
    ])
}

/// A deterministic sequence of smooth positive driving densities.
pub fn random_driving_sequence(n: usize, len: usize, seed: u64) -> Result<Vec<TorusDensity>> {
    (0..len)
        .map(|k| {
            let mut rng = CounterRng::new(seed, 0xD1E5, k as u64);
            let modes: Vec<([f64; 2], f64, f64)> = (0..3)
                .map(|_| {
                    let ku = (rng.next_u64() % 5) as f64 - 2.0;
                    let kv = (rng.next_u64() % 5) as f64 - 2.0;
                    ([ku, kv], rng.range(0.0, 0.3), rng.range(0.0, TAU))
                })
                .collect();
            let cells = (0..n * n)
                .map(|i| {
                    let x = cell_centre(n, i);
                    1.0 + modes.iter().map(|(k, a, p)| a * (TAU * (k[0] * x.u + k[1] * x.v) + p).cos()).sum::<f64>()
                })
                .collect();
            TorusDensity::from_cells(n, cells)
        })
        .collect()
}

/// The residual tail fit used for reporting, exposed for crafted sequences.
pub fn residual_rate(residuals: &[f64], window: usize) -> Option<RateFit> {
    gated_rate(&tail_window(residuals, window))
}

fn tail_window(residuals: &[f64], window: usize) -> Vec<f64> {
    let usable: Vec<f64> = residuals.iter().copied().filter(|r| *r > DECAY_FLOOR).collect();
    usable[usable.len().saturating_sub(window)..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MIN_R_SQUARED;
    use crate::transfer::push_density;

    fn cfg(delta: f64, eps: f64, n: usize) -> SelfConsistentConfig {
        SelfConsistentConfig::new(MapSpec::cat(delta).unwrap(), CouplingSpec::separable_example(eps).unwrap()).with_resolution(n)
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(0.0, 0.0, 32);
        assert!(c.validate().is_ok());
        c.rate_window = 4;
        assert!(SelfConsistentOperator::new(c.clone()).is_err());
        c.rate_window = 5;
        c.tol_fix = 0.0;
        assert!(c.validate().is_err());
        assert!(cfg(0.0, 0.0, 48).validate().is_err());
    }

    #[test]
    fn step_examples() {
        let n = 32;
        let u = TorusDensity::uniform(n).unwrap();
        let op = SelfConsistentOperator::new(cfg(0.0, 0.0, n)).unwrap();
        assert!(l1_distance(&op.step(&u).unwrap(), &u).unwrap() < 1e-13);
        let op = SelfConsistentOperator::new(cfg(0.0, 0.02, n)).unwrap();
        assert!(l1_distance(&op.step(&u).unwrap(), &u).unwrap() < 1e-12);
        assert!(l1_distance(&sc_step(op.config(), &u).unwrap(), &u).unwrap() < 1e-12);
    }

    #[test]
    fn zero_coupling_is_bitwise_linear() {
        let n = 32;
        let op = SelfConsistentOperator::new(cfg(0.01, 0.0, n)).unwrap();
        let mut h = trig_bump(n, [1, 2], 0.7, 0.4).unwrap();
        let mut lin = h.clone();
        for _ in 0..5 {
            h = op.step(&h).unwrap();
            lin = push_density(op.transfer().base(), &lin).unwrap();
            assert_eq!(h, lin);
        }
    }

    #[test]
    fn linear_cat_converges_to_uniform() {
        let n = 64;
        let op = SelfConsistentOperator::new(cfg(0.0, 0.0, n)).unwrap();
        let fp = solve_fixed_point(&op, &trig_bump(n, [1, 0], 0.9, 0.0).unwrap()).unwrap();
        assert!(fp.report.converged);
        assert!(l1_distance(fp.certified().unwrap(), &TorusDensity::uniform(n).unwrap()).unwrap() < 1e-8);
        assert_eq!(fp.report.residuals.len(), fp.report.iterations);
    }

    #[test]
    fn fixed_point_certificate_holds_exactly() {
        let n = 32;
        let op = SelfConsistentOperator::new(cfg(0.01, 0.03, n)).unwrap();
        let fp = solve_fixed_point(&op, &trig_bump(n, [0, 1], 0.5, 0.0).unwrap()).unwrap();
        let h = fp.certified().unwrap();
        assert!(l1_distance(&op.step(h).unwrap(), h).unwrap() < op.config().tol_fix);
        let rate = fp.report.rate.expect("geometric tail");
        assert!(rate.rate < 1.0 && rate.r_squared >= MIN_R_SQUARED);
    }

    #[test]
    fn iteration_cap_is_reported_not_fatal() {
        let n = 16;
        let mut c = cfg(0.01, 0.05, n);
        c.max_iterations = 3;
        let op = SelfConsistentOperator::new(c).unwrap();
        let fp = solve_fixed_point(&op, &trig_bump(n, [1, 0], 0.9, 0.0).unwrap()).unwrap();
        assert!(!fp.report.converged);
        assert_eq!(fp.report.iterations, 3);
        assert!(matches!(fp.certified(), Err(Error::MaxIterationsExceeded { iterations: 3, .. })));
    }

    #[test]
    fn crafted_non_geometric_residuals_withhold_rate() {
        let zigzag: Vec<f64> = (0..40).map(|k| if k % 2 == 0 { 1e-4 } else { 1e-1 }).collect();
        assert!(residual_rate(&zigzag, 30).is_none());
        let geometric: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        assert!((residual_rate(&geometric, 30).unwrap().rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn uniqueness_needs_five_inits_and_agrees() {
        let n = 32;
        let op = SelfConsistentOperator::new(cfg(0.0, 0.0, n)).unwrap();
        let inits = standard_inits(n).unwrap();
        assert!(uniqueness_experiment(&op, &inits[..4]).is_err());
        let (rep, limits) = uniqueness_experiment(&op, &inits).unwrap();
        assert!(!rep.inconclusive);
        assert!(rep.max_distance < 1e-8, "{}", rep.max_distance);
        assert_eq!(limits.len(), 5);
        for i in 0..5 {
            assert_eq!(rep.distances[i][i], 0.0);
        }
    }

    #[test]
    fn sweep_grid_rules_and_zero_kernel() {
        let n = 16;
        let u = TorusDensity::uniform(n).unwrap();
        let op = SelfConsistentOperator::new(cfg(0.01, 0.0, n)).unwrap();
        assert!(lipschitz_sweep(&op, &[0.0, 0.0], &u).is_err());
        assert!(lipschitz_sweep(&op, &[0.01, 0.0], &u).is_err());
        assert!(lipschitz_sweep(&op, &[0.0, 1.0], &u).is_err());
        let zero = op.with_coupling(CouplingSpec::zero());
        let rep = lipschitz_sweep(&zero, &[0.0, 0.01, 0.02], &u).unwrap();
        assert!(rep.pairs.iter().all(|p| p.l1_diff == 0.0));
    }

    #[test]
    fn sweep_warm_start_matches_cold_start() {
        let n = 32;
        let h0 = trig_bump(n, [1, 0], 0.5, 0.0).unwrap();
        let op = SelfConsistentOperator::new(cfg(0.01, 0.0, n)).unwrap();
        let grid = [0.0, 0.01, 0.02, 0.03];
        let rep = lipschitz_sweep(&op, &grid, &h0).unwrap();
        assert_eq!(rep.pairs.len(), 3);
        assert!(rep.max_ratio.unwrap().is_finite());
        for (_, d) in cold_start_deviation(&op, &rep, &[1, 2, 3], &h0).unwrap() {
            assert!(d < 10.0 * op.config().tol_fix, "{d}");
        }
    }

    #[test]
    fn memory_loss_examples() {
        let n = 32;
        let op = SelfConsistentOperator::new(cfg(0.01, 0.02, n)).unwrap();
        let driving = random_driving_sequence(n, 15, 7).unwrap();
        let h1 = trig_bump(n, [1, 0], 0.9, 0.0).unwrap();
        let same = memory_loss_experiment(&op, &driving, &h1, &h1).unwrap();
        assert!(same.l1_diff.iter().all(|d| *d == 0.0));
        assert!(same.rate.is_none());
        let h2 = trig_bump(n, [0, 1], 0.5, 1.0).unwrap();
        let rep = memory_loss_experiment(&op, &driving, &h1, &h2).unwrap();
        let fit = rep.rate.expect("geometric decay");
        assert!(fit.rate < 1.0);
    }

    #[test]
    fn bk_examples() {
        let n = 16;
        let u = TorusDensity::uniform(n).unwrap();
        let flat = bk_diagnostic(&vec![u; 25]).unwrap();
        assert!(flat.proxy.iter().all(|p| (p - 1.0).abs() < 1e-14));
        assert_eq!(flat.verdict, Absorption::Absorbed);
        let growing: Vec<f64> = (0..30).map(|k| 1.0 + k as f64).collect();
        let rep = bk_from_proxy(growing).unwrap();
        assert!(rep.blew_up);
        assert_eq!(rep.verdict, Absorption::NotAbsorbed);
        assert!(bk_from_proxy(Vec::new()).is_err());
    }

    #[test]
    fn sharp_bump_has_large_proxy_norm() {
        let h = gaussian_bump(256, TorusPoint::new(0.5, 0.5), 0.025, 0.0).unwrap();
        assert!(proxy_strong_norm(&h) >= 50.0, "{}", proxy_strong_norm(&h));
    }

    #[test]
    fn driving_sequence_is_deterministic_and_positive() {
        let a = random_driving_sequence(16, 4, 3).unwrap();
        assert_eq!(a, random_driving_sequence(16, 4, 3).unwrap());
        assert_ne!(a, random_driving_sequence(16, 4, 4).unwrap());
        assert!(a.iter().all(|g| g.min_value() > 0.0));
    }
}
