use crate::error::{Error, Result};
use crate::lti::linalg::{phi_margin, spectral_radius};
use crate::lti::{LqgWeights, StateSpace};
use crate::sysid::SampleBoundParams;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSource {
    Explicit {
        #[serde(flatten)]
        ss: StateSpace,
    },
    Random {
        n: usize,
        m: usize,
        p: usize,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_rho() -> f64 {
    0.7
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsMode {
    /// `estimation_error_hinf` times 1.01.
    #[default]
    Oracle,
    /// `(R_w + R_v + R_e) / sigma_u sqrt(T / N)` plus the truncation tail bound.
    Theoretical,
}

impl EpsMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EpsMode::Oracle => "oracle",
            EpsMode::Theoretical => "theoretical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum AlphaChoice {
    /// Lower end of the admissible interval, `sqrt(2) u / (1 - eps u)` with
    /// the inflated `||U*||_inf`; falls back to `Default` when that is not
    /// below `1/eps`.
    #[default]
    LowerEndpoint,
    /// `0.999 / eps`.
    Default,
    Fixed(f64),
}

/// Synthesis knobs; `eps` and `alpha` normally come from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    #[serde(default)]
    pub alpha: AlphaChoice,
    /// Overrides the identified `eps` when set.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub l_u: Option<usize>,
    #[serde(default)]
    pub gamma_tol: Option<f64>,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_solver_tol() -> f64 {
    1e-7
}

fn default_max_iters() -> usize {
    50_000
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        SynthesisSpec { alpha: AlphaChoice::default(), eps: None, l_u: None, gamma_tol: None, solver_tol: default_solver_tol(), max_iters: default_max_iters() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default = "default_report")]
    pub run_report: String,
    #[serde(default = "default_csv")]
    pub scaling_csv: String,
}

fn default_report() -> String {
    "run_report.json".into()
}

fn default_csv() -> String {
    "scaling.csv".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths { run_report: default_report(), scaling_csv: default_csv() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub plant: PlantSource,
    /// Cost weights and noise levels; identity / unit when absent.
    #[serde(default)]
    pub weights: Option<LqgWeights>,
    #[serde(default = "default_sigma_u")]
    pub sigma_u: f64,
    #[serde(default)]
    pub eps_mode: EpsMode,
    #[serde(default)]
    pub sample_bound: Option<SampleBoundParams>,
    /// FIR window `T`; chosen from the sample and tail bounds when absent.
    #[serde(default)]
    pub window: Option<usize>,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
    pub seeds: Vec<u64>,
    /// Sampled perturbations per record for the robustness check.
    #[serde(default = "default_trials")]
    pub robustness_trials: usize,
    /// Off gives byte-identical reports across runs.
    #[serde(default = "default_true")]
    pub record_timings: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_sigma_u() -> f64 {
    1.0
}

fn default_trials() -> usize {
    50
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Minimal config for a plant; everything else at defaults.
    pub fn new(plant: PlantSource, n_list: Vec<usize>, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            plant,
            weights: None,
            sigma_u: default_sigma_u(),
            eps_mode: EpsMode::Oracle,
            sample_bound: None,
            window: None,
            n_list,
            synthesis: SynthesisSpec::default(),
            seeds,
            robustness_trials: default_trials(),
            record_timings: true,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.n_list.is_empty() {
            return Err(Error::Validation("n_list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("seeds is empty".into()));
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(Error::Validation("sigma_u must be positive".into()));
        }
        if self.eps_mode == EpsMode::Theoretical && self.sample_bound.is_none() {
            return Err(Error::Validation("eps_mode = theoretical needs sample_bound".into()));
        }
        if let Some(p) = &self.sample_bound {
            p.validate()?;
        }
        if self.window == Some(0) {
            return Err(Error::Validation("window must be positive".into()));
        }
        match &self.plant {
            PlantSource::Random { n, m, p, rho, .. } => {
                if *n == 0 || *m == 0 || *p == 0 {
                    return Err(Error::Validation("random plant dimensions must be positive".into()));
                }
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::Validation(format!("target spectral radius {rho} not in (0, 1)")));
                }
            }
            PlantSource::Explicit { ss } => {
                let rho = ss.spectral_radius()?;
                if rho >= 1.0 {
                    return Err(Error::Validation(format!("plant is not stable (spectral radius {rho})")));
                }
            }
        }
        let s = &self.synthesis;
        if let (Some(eps), AlphaChoice::Fixed(alpha)) = (s.eps, s.alpha) {
            crate::iop::SynthesisConfig::new(eps, alpha, s.l_u.unwrap_or(1)).validate()?;
        }
        if let Some(eps) = s.eps {
            if !(eps > 0.0) {
                return Err(Error::Validation("synthesis.eps must be positive".into()));
            }
        }
        if let AlphaChoice::Fixed(a) = s.alpha {
            if !(a > 0.0) {
                return Err(Error::Validation("alpha must be positive".into()));
            }
        }
        if s.l_u == Some(0) || !(s.solver_tol > 0.0) || s.max_iters == 0 || s.gamma_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Validation("synthesis settings must be positive".into()));
        }
        let (m, p) = self.dims();
        if let Some(w) = &self.weights {
            w.validate(m, p)?;
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        match &self.plant {
            PlantSource::Explicit { ss } => (ss.m(), ss.p()),
            PlantSource::Random { m, p, .. } => (*m, *p),
        }
    }

    pub fn plant(&self) -> Result<StateSpace> {
        match &self.plant {
            PlantSource::Explicit { ss } => Ok(ss.clone()),
            PlantSource::Random { n, m, p, rho, seed } => random_stable_plant(*n, *m, *p, *rho, *seed),
        }
    }

    /// Weights for cost and simulation, with `sigma_u` applied.
    pub fn weights(&self) -> LqgWeights {
        let (m, p) = self.dims();
        let mut w = self.weights.clone().unwrap_or_else(|| LqgWeights::identity(m, p));
        w.sigma_u = self.sigma_u;
        w
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

const PHI_CAP: f64 = 20.0;
const MAX_DRAWS: usize = 1000;

/// Gaussian `(A, B, C)` with `A` rescaled to spectral radius `rho`, redrawn
/// until `phi_margin(A) <= 20`.
pub fn random_stable_plant(n: usize, m: usize, p: usize, rho: f64, seed: u64) -> Result<StateSpace> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Validation(format!("target spectral radius {rho} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |r: usize, c: usize| {
        DMatrix::from_fn(r, c, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        })
    };
    for _ in 0..MAX_DRAWS {
        let a0 = gauss(n, n);
        let b = gauss(n, m);
        let c = gauss(p, n);
        let r0 = spectral_radius(&a0)?;
        if r0 < 1e-8 {
            continue;
        }
        let a = a0 * (rho / r0);
        if phi_margin(&a, None)? <= PHI_CAP {
            return StateSpace::new(a, b, c);
        }
    }
    Err(Error::Validation(format!("no plant with phi_margin <= {PHI_CAP} in {MAX_DRAWS} draws")))
}
