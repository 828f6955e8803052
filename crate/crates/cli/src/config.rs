//! One TOML file per experiment. Every field has a default, so an empty file is
//! a valid configuration; module invariants are checked while parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sclab_core::anosov::MapSpec;
use sclab_core::coupling::CouplingSpec;
use sclab_core::meanfield::{self, SelfConsistentConfig};
use sclab_core::torus::{TorusDensity, TorusPoint};
use sclab_core::transfer::DEFAULT_QUADRATURE;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub map: MapSpec,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_coupling() -> CouplingSpec {
    CouplingSpec::separable_example(0.0).expect("ε = 0 is admissible")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::default(),
            coupling: default_coupling(),
            solver: SolverSection::default(),
            experiment: ExperimentSection::default(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub resolution: usize,
    pub quadrature: usize,
    pub tol_fix: f64,
    pub max_iterations: usize,
    pub rate_window: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            resolution: meanfield::DEFAULT_RESOLUTION,
            quadrature: DEFAULT_QUADRATURE,
            tol_fix: meanfield::DEFAULT_TOL_FIX,
            max_iterations: meanfield::DEFAULT_MAX_ITERATIONS,
            rate_window: meanfield::DEFAULT_RATE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Initial density for `fixed-point`, `particles-gap` and the first state of `memory-loss`.
    pub init: String,
    /// Second state of `memory-loss`.
    pub init_other: String,
    /// Initial densities for `uniqueness`.
    pub inits: Vec<String>,
    /// Also solve at twice the resolution from the first init.
    pub refine: bool,
    pub eps_grid: Vec<f64>,
    /// Grid points re-solved from a cold start after a sweep.
    pub cold_start_points: usize,
    pub particle_counts: Vec<usize>,
    pub steps: usize,
    pub trials: usize,
    pub dump_ensemble: bool,
    pub driving_sequences: usize,
    pub driving_length: usize,
    pub cone_maps: usize,
    pub cone_samples: usize,
    pub cone_depth: usize,
    /// Half-angle of the stable cone in degrees.
    pub cone_half_angle: f64,
    pub assumption_pairs: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            init: "cos_u".into(),
            init_other: "cos_v".into(),
            inits: ["cos_u", "cos_v", "cos_uv", "mode_2_1", "gaussian"].map(String::from).to_vec(),
            refine: false,
            eps_grid: (0..=10).map(|i| i as f64 * 0.005).collect(),
            cold_start_points: 3,
            particle_counts: vec![100, 1_000, 10_000, 100_000],
            steps: 10,
            trials: 8,
            dump_ensemble: false,
            driving_sequences: 3,
            driving_length: 40,
            cone_maps: 20,
            cone_samples: 1_000,
            cone_depth: 20,
            cone_half_angle: 15.0,
            assumption_pairs: 8,
        }
    }
}

/// Named initial densities accepted in `init`, `init_other` and `inits`.
pub const INIT_NAMES: [&str; 8] = ["uniform", "cos_u", "cos_v", "cos_uv", "mode_2_1", "gaussian", "sharp_bump", "corner_bump"];

pub fn init_density(name: &str, n: usize) -> Result<TorusDensity, HarnessError> {
    let h = match name {
        "uniform" => TorusDensity::uniform(n),
        "cos_u" => meanfield::trig_bump(n, [1, 0], 0.9, 0.0),
        "cos_v" => meanfield::trig_bump(n, [0, 1], 0.6, 1.0),
        "cos_uv" => meanfield::trig_bump(n, [1, 1], -0.5, 0.3),
        "mode_2_1" => meanfield::trig_bump(n, [2, -1], 0.4, 2.0),
        "gaussian" => meanfield::gaussian_bump(n, TorusPoint::new(0.3, 0.7), 0.15, 0.1),
        "sharp_bump" => meanfield::gaussian_bump(n, TorusPoint::new(0.5, 0.5), 0.025, 0.0),
        "corner_bump" => meanfield::gaussian_bump(n, TorusPoint::new(0.1, 0.2), 0.025, 0.0),
        other => {
            return Err(HarnessError::Config(format!(
                "experiment.init: unknown density `{other}` (expected one of {})",
                INIT_NAMES.join(", ")
            )))
        }
    };
    h.map_err(|e| HarnessError::Config(format!("initial density `{name}`: {e}")))
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub resolution: Option<usize>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub tol_fix: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), HarnessError> {
        let flag = |name: &str, e: sclab_core::Error| HarnessError::Config(format!("--{name}: {e}"));
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(n) = o.resolution {
            self.solver.resolution = n;
        }
        if let Some(eps) = o.eps {
            self.coupling = self.coupling.with_eps(eps).map_err(|e| flag("eps", e))?;
        }
        if let Some(delta) = o.delta {
            self.map = self.map.with_delta(delta).map_err(|e| flag("delta", e))?;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.tol_fix {
            self.solver.tol_fix = t;
        }
        if let Some(m) = o.max_iterations {
            self.solver.max_iterations = m;
        }
        self.validate()
    }

    /// Checks that cross module boundaries; the map and coupling check themselves.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        if let Err(e) = self.solver_config().validate() {
            return bad("solver", e.to_string());
        }
        let ex = &self.experiment;
        for name in std::iter::once(&ex.init).chain(std::iter::once(&ex.init_other)).chain(&ex.inits) {
            if !INIT_NAMES.contains(&name.as_str()) {
                return bad("experiment.init", format!("unknown density `{name}` (expected one of {})", INIT_NAMES.join(", ")));
            }
        }
        if let Err(e) = meanfield::check_grid(&ex.eps_grid) {
            return bad("experiment.eps_grid", e.to_string());
        }
        for &eps in &ex.eps_grid {
            if let Err(e) = self.coupling.with_eps(eps) {
                return bad("experiment.eps_grid", e.to_string());
            }
        }
        if ex.cold_start_points > ex.eps_grid.len() {
            return bad("experiment.cold_start_points", format!("{} exceeds the grid size", ex.cold_start_points));
        }
        if ex.particle_counts.len() < 3 || ex.particle_counts.windows(2).any(|w| w[1] <= w[0]) || ex.particle_counts[0] == 0 {
            return bad("experiment.particle_counts", "need ≥ 3 strictly increasing positive counts".into());
        }
        if ex.trials == 0 {
            return bad("experiment.trials", "must be ≥ 1".into());
        }
        if ex.cone_maps == 0 || ex.cone_samples == 0 || ex.cone_depth == 0 {
            return bad("experiment.cone_*", "maps, samples and depth must be ≥ 1".into());
        }
        if !(ex.cone_half_angle > 0.0 && ex.cone_half_angle < 45.0) {
            return bad("experiment.cone_half_angle", format!("{} must lie in (0, 45) degrees", ex.cone_half_angle));
        }
        if ex.assumption_pairs == 0 {
            return bad("experiment.assumption_pairs", "must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SelfConsistentConfig {
        let s = &self.solver;
        SelfConsistentConfig {
            map: self.map.clone(),
            coupling: self.coupling.clone(),
            resolution: s.resolution,
            quadrature: s.quadrature,
            tol_fix: s.tol_fix,
            max_iterations: s.max_iterations,
            rate_window: s.rate_window,
        }
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
