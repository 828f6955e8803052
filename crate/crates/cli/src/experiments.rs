//! One runner per subcommand. Each writes its CSV and JSON through the sink
//! before reporting failure, so partial outputs survive a non-zero exit.

use serde::Serialize;
use serde_json::json;

use sclab_core::anosov::{certify_cones_report, ConeSpec, TorusMap};
use sclab_core::coupling::{certify_assumptions, CoupledMap, MeasureView};
use sclab_core::meanfield::{
    bk_from_proxy, cold_start_deviation, lipschitz_sweep, memory_loss_experiment, random_driving_sequence,
    solve_fixed_point, uniqueness_experiment, SelfConsistentOperator,
};
use sclab_core::particles::{meanfield_gap, sample_from_density, standard_observables, step_ensemble};
use sclab_core::rng::key;
use sclab_core::torus::{l1_distance, TorusDensity};

use crate::config::init_density;
use crate::output::{Csv, Phases, Sink};
use crate::{ExperimentConfig, HarnessError};

/// Resolution of the driving densities used to build coupled maps for `cones`
/// and measure pairs for `certify-coupling`; only low Fourier moments matter.
pub const AUX_RESOLUTION: usize = 32;

const DRIVING_STREAM: u64 = 0xD71;
const CONE_STREAM: u64 = 0xC0E;
const PAIR_STREAM: u64 = 0xA17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FixedPoint,
    Uniqueness,
    Sweep,
    MemoryLoss,
    ParticlesGap,
    Cones,
    CertifyCoupling,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::FixedPoint,
        Command::Uniqueness,
        Command::Sweep,
        Command::MemoryLoss,
        Command::ParticlesGap,
        Command::Cones,
        Command::CertifyCoupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FixedPoint => "fixed-point",
            Command::Uniqueness => "uniqueness",
            Command::Sweep => "sweep",
            Command::MemoryLoss => "memory-loss",
            Command::ParticlesGap => "particles-gap",
            Command::Cones => "cones",
            Command::CertifyCoupling => "certify-coupling",
        }
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    match cmd {
        Command::FixedPoint => fixed_point(cfg, sink, phases),
        Command::Uniqueness => uniqueness(cfg, sink, phases),
        Command::Sweep => sweep(cfg, sink, phases),
        Command::MemoryLoss => memory_loss(cfg, sink, phases),
        Command::ParticlesGap => particles_gap(cfg, sink, phases),
        Command::Cones => cones(cfg, sink, phases),
        Command::CertifyCoupling => certify_coupling(cfg, sink, phases),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn operator(cfg: &ExperimentConfig, phases: &mut Phases) -> Result<SelfConsistentOperator, HarnessError> {
    Ok(phases.time("build_operator", || SelfConsistentOperator::new(cfg.solver_config()))?)
}

#[derive(Serialize)]
struct RunSummary {
    converged: bool,
    iterations: usize,
    final_residual: f64,
    rate: Option<f64>,
    rate_r_squared: Option<f64>,
}

fn summary(r: &sclab_core::meanfield::ConvergenceReport) -> RunSummary {
    let fit = r.rate.or(r.tail_fit);
    RunSummary {
        converged: r.converged,
        iterations: r.iterations,
        final_residual: r.final_residual,
        rate: r.rate.map(|f| f.rate),
        rate_r_squared: fit.map(|f| f.r_squared),
    }
}

fn fixed_point(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let n = cfg.solver.resolution;
    let op = operator(cfg, phases)?;
    let h0 = init_density(&cfg.experiment.init, n)?;
    let fp = phases.time("solve", || solve_fixed_point(&op, &h0))?;
    let r = &fp.report;

    let mut csv = Csv::new(&["iter", "residual_l1", "proxy_bv"]);
    for (k, res) in r.residuals.iter().enumerate() {
        csv.row(&[k.to_string(), num(*res), num(r.proxy_trajectory[k])]);
    }
    sink.write_csv("fixed_point.csv", &csv)?;
    sink.write("density.txt", &fp.density.to_grid_text())?;
    let uniform = TorusDensity::uniform(n)?;
    let absorption = bk_from_proxy(r.proxy_trajectory.clone())?;
    sink.write_json(
        "fixed_point.json",
        &json!({
            "init": cfg.experiment.init,
            "resolution": n,
            "eps": cfg.coupling.eps(),
            "delta": cfg.map.delta(),
            "converged": r.converged,
            "iterations": r.iterations,
            "final_residual": r.final_residual,
            "rate": r.rate,
            "tail_fit": r.tail_fit,
            "distance_to_uniform": l1_distance(&fp.density, &uniform)?,
            "absorption": {
                "verdict": absorption.verdict,
                "plateau_level": absorption.plateau_level,
                "tail_min": absorption.tail_min,
                "plateau": absorption.plateau,
                "blew_up": absorption.blew_up,
            },
        }),
    )?;
    fp.certified()?;
    Ok(())
}

fn uniqueness(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let n = cfg.solver.resolution;
    let ex = &cfg.experiment;
    let op = operator(cfg, phases)?;
    let inits = ex.inits.iter().map(|name| init_density(name, n)).collect::<Result<Vec<_>, _>>()?;
    let (report, limits) = phases.time("solve", || uniqueness_experiment(&op, &inits))?;

    let mut csv = Csv::new(&["init_a", "init_b", "l1_distance"]);
    for i in 0..inits.len() {
        for j in i + 1..inits.len() {
            csv.row(&[ex.inits[i].clone(), ex.inits[j].clone(), num(report.distances[i][j])]);
        }
    }
    sink.write_csv("uniqueness.csv", &csv)?;

    let mut refinement = None;
    if ex.refine && !report.inconclusive {
        let fine_cfg = cfg.solver_config().with_resolution(2 * n);
        let fine = phases.time("refine", || -> Result<_, HarnessError> {
            let fop = SelfConsistentOperator::new(fine_cfg)?;
            Ok(solve_fixed_point(&fop, &init_density(&ex.inits[0], 2 * n)?)?)
        })?;
        let coarse = fine.certified()?.coarsen_to(n)?;
        refinement = Some(json!({
            "resolution": 2 * n,
            "iterations": fine.report.iterations,
            "l1_to_coarse_limit": l1_distance(&coarse, &limits[0])?,
        }));
    }
    sink.write_json(
        "uniqueness.json",
        &json!({
            "inits": ex.inits,
            "resolution": n,
            "eps": cfg.coupling.eps(),
            "delta": cfg.map.delta(),
            "max_distance": report.max_distance,
            "inconclusive": report.inconclusive,
            "runs": report.reports.iter().map(summary).collect::<Vec<_>>(),
            "refinement": refinement,
        }),
    )?;
    if report.inconclusive {
        return Err(HarnessError::Experiment("uniqueness inconclusive: at least one run did not converge".into()));
    }
    Ok(())
}

/// `k` indices spread evenly over `0..len`, always including both ends when `k ≥ 2`.
fn spread(len: usize, k: usize) -> Vec<usize> {
    match k {
        0 => vec![],
        1 => vec![len - 1],
        _ => {
            let mut v: Vec<usize> = (0..k).map(|j| (j * (len - 1) + (k - 1) / 2) / (k - 1)).collect();
            v.dedup();
            v
        }
    }
}

fn sweep(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let n = cfg.solver.resolution;
    let ex = &cfg.experiment;
    let op = operator(cfg, phases)?;
    let h0 = init_density(&ex.init, n)?;
    let report = phases.time("sweep", || lipschitz_sweep(&op, &ex.eps_grid, &h0))?;

    let mut csv = Csv::new(&["eps_lo", "eps_hi", "l1_diff", "ratio"]);
    for p in &report.pairs {
        csv.row(&[num(p.eps_lo), num(p.eps_hi), num(p.l1_diff), num(p.ratio)]);
    }
    sink.write_csv("sweep.csv", &csv)?;

    let uncertified: Vec<f64> =
        report.grid.iter().zip(&report.fixed_points).filter(|(_, f)| f.is_none()).map(|(e, _)| *e).collect();
    let cold = if uncertified.is_empty() {
        let idx = spread(report.grid.len(), ex.cold_start_points);
        phases.time("cold_start", || cold_start_deviation(&op, &report, &idx, &h0))?
    } else {
        Vec::new()
    };
    sink.write_json(
        "sweep.json",
        &json!({
            "grid": report.grid,
            "resolution": n,
            "delta": cfg.map.delta(),
            "pairs": report.pairs,
            "max_ratio": report.max_ratio,
            "runs": report.reports.iter().map(summary).collect::<Vec<_>>(),
            "uncertified": uncertified,
            "cold_start": cold.iter().map(|(e, d)| json!({"eps": e, "l1_to_warm": d})).collect::<Vec<_>>(),
        }),
    )?;
    if !uncertified.is_empty() {
        return Err(HarnessError::Experiment(format!("no certified fixed point at ε ∈ {uncertified:?}")));
    }
    Ok(())
}

/// Seed of the `k`-th driving sequence.
pub fn driving_seed(seed: u64, k: usize) -> u64 {
    key(seed, DRIVING_STREAM, k as u64)
}

fn memory_loss(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let n = cfg.solver.resolution;
    let ex = &cfg.experiment;
    let op = operator(cfg, phases)?;
    let h1 = init_density(&ex.init, n)?;
    let h2 = init_density(&ex.init_other, n)?;
    let mut sequences = Vec::new();
    for k in 0..ex.driving_sequences {
        let seed = driving_seed(cfg.seed, k);
        let report = phases.time(&format!("sequence_{k}"), || -> Result<_, HarnessError> {
            let driving = random_driving_sequence(n, ex.driving_length, seed)?;
            Ok(memory_loss_experiment(&op, &driving, &h1, &h2)?)
        })?;
        let mut csv = Csv::new(&["step", "l1_diff"]);
        for (s, d) in report.l1_diff.iter().enumerate() {
            csv.row(&[s.to_string(), num(*d)]);
        }
        sink.write_csv(&format!("memory_loss_{k}.csv"), &csv)?;
        sequences.push(json!({"sequence": k, "seed": seed, "rate": report.rate, "fit": report.fit}));
    }
    sink.write_json(
        "memory_loss.json",
        &json!({
            "resolution": n,
            "eps": cfg.coupling.eps(),
            "delta": cfg.map.delta(),
            "steps": ex.driving_length,
            "init": ex.init,
            "init_other": ex.init_other,
            "sequences": sequences,
        }),
    )?;
    Ok(())
}

fn particles_gap(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let n = cfg.solver.resolution;
    let ex = &cfg.experiment;
    let op = operator(cfg, phases)?;
    let h0 = init_density(&ex.init, n)?;
    let observables = standard_observables();
    let report = phases.time("gap", || {
        meanfield_gap(&op, &h0, &ex.particle_counts, ex.steps, &observables, ex.trials, cfg.seed)
    })?;

    let mut csv = Csv::new(&["N", "observable_id", "gap_mean", "gap_std"]);
    for r in &report.rows {
        csv.row(&[r.n.to_string(), r.observable_id.clone(), num(r.gap_mean), num(r.gap_std)]);
    }
    sink.write_csv("particles_gap.csv", &csv)?;
    sink.write_json("particles_gap.json", &report)?;

    if ex.dump_ensemble {
        // trial 0 at each size, reproduced from the same seed the gap run used
        for &count in &ex.particle_counts {
            let mut e = sample_from_density(&h0, count, key(cfg.seed, count as u64, 0))?;
            for _ in 0..ex.steps {
                e = step_ensemble(&cfg.map, &cfg.coupling, &e);
            }
            sink.write(&format!("ensemble_{count}.csv"), &e.to_csv())?;
        }
    }
    Ok(())
}

/// Smooth random driving densities at [`AUX_RESOLUTION`].
fn aux_densities(seed: u64, stream: u64, count: usize) -> Result<Vec<TorusDensity>, HarnessError> {
    Ok(random_driving_sequence(AUX_RESOLUTION, count, key(seed, stream, 0))?)
}

fn cones(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let ex = &cfg.experiment;
    let cone = ConeSpec::stable_for(&cfg.map, ex.cone_half_angle.to_radians())
        .map_err(|e| HarnessError::Config(format!("experiment.cone_half_angle: {e}")))?;
    let driving = aux_densities(cfg.seed, CONE_STREAM, ex.cone_maps)?;
    let maps: Vec<CoupledMap> =
        driving.iter().map(|g| CoupledMap::new(&cfg.map, cfg.coupling.field(&MeasureView::Density(g)))).collect();
    let refs: Vec<&dyn TorusMap> = maps.iter().map(|m| m as &dyn TorusMap).collect();
    let report =
        phases.time("certify", || certify_cones_report(&refs, &cone, ex.cone_samples, ex.cone_depth, cfg.seed))?;

    let mut csv = Csv::new(&["sample", "depth", "min_stable_expansion", "min_unstable_expansion"]);
    for r in &report.records {
        csv.row(&[r.sample.to_string(), r.depth.to_string(), num(r.min_stable_expansion), num(r.min_unstable_expansion)]);
    }
    sink.write_csv("cones.csv", &csv)?;
    let (lu, ls) = (cfg.map.unstable_eigen().0.abs(), cfg.map.stable_eigen().0.abs());
    sink.write_json(
        "cones.json",
        &json!({
            "maps": ex.cone_maps,
            "samples": report.samples,
            "depth": report.depth,
            "half_angle_deg": ex.cone_half_angle,
            "eps": cfg.coupling.eps(),
            "delta": cfg.map.delta(),
            "invariance_violations": report.invariance_violations,
            "lambda": report.lambda,
            "nu": report.nu,
            "c": report.c,
            "linear_lambda": lu,
            "linear_nu": ls,
            "lambda_rel_error": (report.lambda - lu).abs() / lu,
            "nu_rel_error": (report.nu - ls).abs() / ls,
        }),
    )?;
    if report.invariance_violations > 0 {
        return Err(HarnessError::Experiment(format!(
            "cone invariance violated at {} of {} sample points",
            report.invariance_violations, report.samples
        )));
    }
    Ok(())
}

fn certify_coupling(cfg: &ExperimentConfig, sink: &mut Sink, phases: &mut Phases) -> Result<(), HarnessError> {
    let ex = &cfg.experiment;
    let dens = aux_densities(cfg.seed, PAIR_STREAM, 2 * ex.assumption_pairs)?;
    let pairs: Vec<(MeasureView, MeasureView)> =
        dens.chunks(2).map(|c| (MeasureView::Density(&c[0]), MeasureView::Density(&c[1]))).collect();
    let eps_pairs: Vec<(f64, f64)> = ex.eps_grid.windows(2).map(|w| (w[1], w[0])).collect();
    let report = phases.time("certify", || certify_assumptions(&cfg.coupling, &pairs, &eps_pairs))?;
    let kernel = cfg.coupling.kernel();
    sink.write_json(
        "certify_coupling.json",
        &json!({
            "eps": cfg.coupling.eps(),
            "max_admissible_eps": cfg.coupling.max_eps(),
            "jacobian_bound": kernel.jacobian_bound(),
            "displacement_bound": kernel.displacement_bound(),
            "report": report,
        }),
    )?;
    Ok(())
}
