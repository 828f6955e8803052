//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Three operations: iterate a density under the self-consistent operator,
//! step a particle cloud with the same coupling, and run a cone check on a
//! random coupled concatenation.

use wasm_bindgen::prelude::*;

use sclab_core::anosov::{certify_cones_report, ConeSpec, MapSpec, TorusMap};
use sclab_core::coupling::{CoupledMap, CouplingSpec, MeasureView};
use sclab_core::meanfield::{gaussian_bump, random_driving_sequence, trig_bump, SelfConsistentConfig, SelfConsistentOperator};
use sclab_core::particles::{sample_from_density, step_ensemble, Ensemble};
use sclab_core::torus::{l1_distance, proxy_strong_norm, TorusDensity, TorusPoint};

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn coupling(kind: &str, eps: f64) -> Result<CouplingSpec, JsError> {
    match kind {
        "separable" => CouplingSpec::separable_example(eps),
        "convolution" => CouplingSpec::convolution_example(eps),
        other => return Err(JsError::new(&format!("unknown coupling `{other}`"))),
    }
    .map_err(js)
}

fn start_density(name: &str, n: usize) -> Result<TorusDensity, JsError> {
    match name {
        "uniform" => TorusDensity::uniform(n),
        "cos" => trig_bump(n, [1, 0], 0.9, 0.0),
        "bump" => gaussian_bump(n, TorusPoint::new(0.5, 0.5), 0.05, 0.0),
        other => return Err(JsError::new(&format!("unknown start density `{other}`"))),
    }
    .map_err(js)
}

/// Largest admissible |ε| for a kernel kind.
#[wasm_bindgen]
pub fn max_eps(kind: &str) -> Result<f64, JsError> {
    Ok(coupling(kind, 0.0)?.max_eps())
}

#[wasm_bindgen]
pub struct DensityDemo {
    op: SelfConsistentOperator,
    h: TorusDensity,
    steps: u32,
    residual: f64,
}

#[wasm_bindgen]
impl DensityDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, delta: f64, kind: &str, eps: f64, start: &str) -> Result<DensityDemo, JsError> {
        let map = MapSpec::cat(delta).map_err(js)?;
        let cfg = SelfConsistentConfig::new(map, coupling(kind, eps)?).with_resolution(n);
        let op = SelfConsistentOperator::new(cfg).map_err(js)?;
        Ok(DensityDemo { op, h: start_density(start, n)?, steps: 0, residual: f64::NAN })
    }

    /// Keeps the current density and the cached T-stage; only the coupling changes.
    pub fn set_coupling(&mut self, kind: &str, eps: f64) -> Result<(), JsError> {
        self.op = self.op.with_coupling(coupling(kind, eps)?);
        Ok(())
    }

    pub fn reset(&mut self, start: &str) -> Result<(), JsError> {
        self.h = start_density(start, self.op.resolution())?;
        self.steps = 0;
        self.residual = f64::NAN;
        Ok(())
    }

    /// One application of the operator; returns the L¹ step size.
    pub fn step(&mut self) -> Result<f64, JsError> {
        let next = self.op.step(&self.h).map_err(js)?;
        self.residual = l1_distance(&next, &self.h).map_err(js)?;
        self.h = next;
        self.steps += 1;
        Ok(self.residual)
    }

    pub fn resolution(&self) -> usize {
        self.op.resolution()
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn proxy_bv(&self) -> f64 {
        proxy_strong_norm(&self.h)
    }

    /// Row-major cell values, row 0 at v ∈ [0, 1/n).
    pub fn cells(&self) -> Vec<f32> {
        self.h.cells().iter().map(|&c| c as f32).collect()
    }
}

#[wasm_bindgen]
pub struct ParticleDemo {
    map: MapSpec,
    coupling: CouplingSpec,
    ensemble: Ensemble,
}

#[wasm_bindgen]
impl ParticleDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(count: usize, delta: f64, kind: &str, eps: f64, start: &str, seed: u64) -> Result<ParticleDemo, JsError> {
        let h = start_density(start, 64)?;
        Ok(ParticleDemo {
            map: MapSpec::cat(delta).map_err(js)?,
            coupling: coupling(kind, eps)?,
            ensemble: sample_from_density(&h, count, seed).map_err(js)?,
        })
    }

    pub fn set_coupling(&mut self, kind: &str, eps: f64) -> Result<(), JsError> {
        self.coupling = coupling(kind, eps)?;
        Ok(())
    }

    pub fn step(&mut self) {
        self.ensemble = step_ensemble(&self.map, &self.coupling, &self.ensemble);
    }

    pub fn len(&self) -> usize {
        self.ensemble.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ensemble.is_empty()
    }

    /// Interleaved `u0, v0, u1, v1, …`.
    pub fn positions(&self) -> Vec<f32> {
        self.ensemble.points.iter().flat_map(|p| [p.u as f32, p.v as f32]).collect()
    }

    /// Current coupling displacement bound `|ε|·sup|G_μ|` for the cloud's empirical measure.
    pub fn displacement(&self) -> f64 {
        self.coupling.field(&MeasureView::Points(&self.ensemble.points)).displacement_bound()
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct ConeSummary {
    pub violations: usize,
    pub lambda: f64,
    pub nu: f64,
    pub c: f64,
}

/// Cone check along `maps` coupled maps driven by random smooth densities.
#[wasm_bindgen]
pub fn cone_check(delta: f64, kind: &str, eps: f64, maps: usize, samples: usize, depth: usize, seed: u64) -> Result<ConeSummary, JsError> {
    let map = MapSpec::cat(delta).map_err(js)?;
    let spec = coupling(kind, eps)?;
    let driving = random_driving_sequence(32, maps, seed).map_err(js)?;
    let coupled: Vec<CoupledMap> = driving.iter().map(|g| CoupledMap::new(&map, spec.field(&MeasureView::Density(g)))).collect();
    let refs: Vec<&dyn TorusMap> = coupled.iter().map(|m| m as &dyn TorusMap).collect();
    let r = certify_cones_report(&refs, &ConeSpec::default_for(&map), samples, depth, seed).map_err(js)?;
    Ok(ConeSummary { violations: r.invariance_violations, lambda: r.lambda, nu: r.nu, c: r.c })
}
