use super::config::{AlphaChoice, EpsMode, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evaluation::{baseline, closed_loop_cost, robust_stability_check, Baseline, ControllerSS, SuboptReport, HINF_INFLATION};
use crate::iop::{default_alpha, default_l_u, experiment_alpha, golden_section, SynthesisConfig, SynthesisResult};
use crate::lti::{simulate, FirTm, LqgWeights, Policy, StateSpace};
use crate::sysid::{build_regression, estimation_error_hinf, ols_estimate_detail, truncation_tail_bound, EstimationError, SampleBoundParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Compact view of a synthesis result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub gamma_star: f64,
    pub u_hinf: f64,
    pub phi: f64,
    pub certified_bound: f64,
    pub h_value: f64,
    pub g_hat_hinf: f64,
    pub alpha: f64,
    pub l_u: usize,
    pub probes: usize,
    pub max_iters_hit: usize,
    pub residual: f64,
}

impl SynthesisSummary {
    pub fn new(r: &SynthesisResult, g_hat: &FirTm) -> Result<Self> {
        Ok(SynthesisSummary {
            gamma_star: r.gamma_star,
            u_hinf: r.u_hinf,
            phi: r.phi,
            certified_bound: r.certified_bound,
            h_value: r.h_value,
            g_hat_hinf: r.g_hat_hinf,
            alpha: r.alpha,
            l_u: r.l_u,
            probes: r.probes.len(),
            max_iters_hit: r.probes.iter().filter(|p| p.max_iters_hit).count(),
            residual: r.responses.residual(g_hat)?,
        })
    }
}

/// One `(seed, N)` record. Stages that did not run are `None`; `error`
/// says where the record stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub window: Option<usize>,
    pub eps_mode: EpsMode,
    pub identification: Option<EstimationError>,
    /// Error level handed to synthesis.
    pub eps: Option<f64>,
    pub synthesis: Option<SynthesisSummary>,
    pub subopt: Option<SuboptReport>,
    pub stable_fraction: Option<f64>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub j_star: f64,
    pub u_star_hinf: f64,
    pub g_star_hinf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub baseline: BaselineSummary,
    pub records: Vec<RunRecord>,
    pub failures: usize,
}

pub const CSV_HEADER: &str = "seed,N,T,eps,eps_mode,id_error,gamma_star,u_hinf,J_star,J_hat,rel_gap,bound_rhs,bound_applicable,stable_fraction,wall_ms";

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per record under [`CSV_HEADER`]; missing values are empty.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.records {
            let sub = r.subopt.as_ref();
            let syn = r.synthesis.as_ref();
            let row = [
                r.seed.to_string(),
                r.n.to_string(),
                r.window.map(|t| t.to_string()).unwrap_or_default(),
                opt(r.eps),
                r.eps_mode.as_str().to_string(),
                opt(r.identification.map(|e| e.oracle)),
                opt(syn.map(|x| x.gamma_star)),
                opt(syn.map(|x| x.u_hinf)),
                format!("{:?}", self.baseline.j_star),
                opt(sub.map(|x| x.j_hat)),
                opt(sub.map(|x| x.relative_gap)),
                opt(sub.map(|x| x.bound_rhs)),
                sub.map(|x| x.bound_applicable.to_string()).unwrap_or_default(),
                opt(r.stable_fraction),
                r.wall_ms.to_string(),
            ];
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Smallest `T` whose truncation tail (coefficients from index `T` on) is
/// below the statistical term `(R_w + R_v + R_e) / sigma_u sqrt(T / N)`.
pub fn auto_window(ss: &StateSpace, n: usize, params: &SampleBoundParams, sigma_u: f64) -> Result<usize> {
    let cap = (n / (2 * ss.m().max(1))).clamp(1, 5000);
    for t in 1..=cap {
        if truncation_tail_bound(ss, t - 1)? <= theoretical_rate(params, sigma_u, t, n) {
            return Ok(t);
        }
    }
    Ok(cap)
}

fn theoretical_rate(params: &SampleBoundParams, sigma_u: f64, t: usize, n: usize) -> f64 {
    params.r_sum() / sigma_u * (t as f64 / n as f64).sqrt()
}

/// Error level fed to synthesis in theoretical mode: the statistical rate
/// plus the tail of the coefficients the window leaves out.
pub fn theoretical_eps(ss: &StateSpace, n: usize, window: usize, params: &SampleBoundParams, sigma_u: f64) -> Result<f64> {
    Ok(theoretical_rate(params, sigma_u, window, n) + truncation_tail_bound(ss, window - 1)?)
}

pub fn choose_alpha(choice: AlphaChoice, eps: f64, u_star_hinf: f64) -> f64 {
    match choice {
        AlphaChoice::Fixed(a) => a,
        AlphaChoice::Default => default_alpha(eps),
        AlphaChoice::LowerEndpoint => {
            let a = experiment_alpha(eps, HINF_INFLATION * u_star_hinf);
            if a.is_finite() && a > 0.0 && a * eps < 1.0 {
                a
            } else {
                default_alpha(eps)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub window: usize,
    pub g_hat: FirTm,
    #[serde(with = "crate::serde_mat")]
    pub raw_g0: nalgebra::DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub error: EstimationError,
}

/// Identification stage alone for one `(seed, N)`.
pub fn identify(cfg: &ExperimentConfig, seed: u64, n: usize) -> Result<IdentifyReport> {
    cfg.validate()?;
    let ss = cfg.plant()?;
    let params = cfg.sample_bound.unwrap_or_default();
    let window = match cfg.window {
        Some(t) => t,
        None => auto_window(&ss, n, &params, cfg.sigma_u)?,
    };
    let traj = simulate(&ss, Policy::Excitation, n, &cfg.weights(), seed)?;
    let est = ols_estimate_detail(&build_regression(&traj, window)?)?;
    let error = estimation_error_hinf(&est.g_hat, &ss)?;
    Ok(IdentifyReport { config_hash: cfg.hash(), seed, n, window, g_hat: est.g_hat, raw_g0: est.raw_g0, singular_values: est.singular_values, error })
}

/// Everything one record produces before it is flattened into a report.
#[derive(Debug, Clone)]
pub struct RecordArtifacts {
    pub g_hat: Option<FirTm>,
    pub synthesis: Option<SynthesisResult>,
    pub controller: Option<ControllerSS>,
    pub error: Option<Error>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: &'a str,
    ss: &'a StateSpace,
    base: &'a Baseline,
    weights: &'a LqgWeights,
}

fn run_record(ctx: &Ctx<'_>, seed: u64, n: usize) -> (RunRecord, RecordArtifacts) {
    let t0 = Instant::now();
    let mut rec = RunRecord {
        config_hash: ctx.hash.to_string(),
        seed,
        n,
        window: None,
        eps_mode: ctx.cfg.eps_mode,
        identification: None,
        eps: None,
        synthesis: None,
        subopt: None,
        stable_fraction: None,
        wall_ms: 0,
        error: None,
    };
    let mut art = RecordArtifacts { g_hat: None, synthesis: None, controller: None, error: None };
    if let Err(e) = record_stages(ctx, &mut rec, &mut art) {
        rec.error = Some(e.to_string());
        art.error = Some(e);
    }
    if ctx.cfg.record_timings {
        rec.wall_ms = t0.elapsed().as_millis() as u64;
    }
    (rec, art)
}

fn record_stages(ctx: &Ctx<'_>, rec: &mut RunRecord, art: &mut RecordArtifacts) -> Result<()> {
    let cfg = ctx.cfg;
    let params = cfg.sample_bound.unwrap_or_default();
    let window = match cfg.window {
        Some(t) => t,
        None => auto_window(ctx.ss, rec.n, &params, cfg.sigma_u)?,
    };
    rec.window = Some(window);

    // same draws as `identify`
    let traj = simulate(ctx.ss, Policy::Excitation, rec.n, ctx.weights, rec.seed)?;
    let g_hat = ols_estimate_detail(&build_regression(&traj, window)?)?.g_hat;
    art.g_hat = Some(g_hat.clone());
    let id = estimation_error_hinf(&g_hat, ctx.ss)?;
    rec.identification = Some(id);

    let eps = match (cfg.synthesis.eps, cfg.eps_mode) {
        (Some(e), _) => e,
        (None, EpsMode::Oracle) => 1.01 * id.oracle,
        (None, EpsMode::Theoretical) => theoretical_eps(ctx.ss, rec.n, window, &params, cfg.sigma_u)?,
    };
    rec.eps = Some(eps);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Validation(format!("eps = {eps} is not usable for synthesis")));
    }

    let alpha = choose_alpha(cfg.synthesis.alpha, eps, ctx.base.u_star_hinf);
    let mut scfg = SynthesisConfig::new(eps, alpha, cfg.synthesis.l_u.unwrap_or_else(|| default_l_u(&g_hat)));
    scfg.gamma_tol = cfg.synthesis.gamma_tol;
    scfg.weights = Some(ctx.weights.clone());
    scfg.solver_tol = cfg.synthesis.solver_tol;
    scfg.max_iters = cfg.synthesis.max_iters;
    let syn = golden_section(&g_hat, &scfg)?;
    rec.synthesis = Some(SynthesisSummary::new(&syn, &g_hat)?);

    let k = ControllerSS::from_fir(syn.u(), &g_hat)?;
    art.synthesis = Some(syn.clone());
    art.controller = Some(k.clone());
    if cfg.robustness_trials > 0 {
        let rob = robust_stability_check(&g_hat, &k, eps, cfg.robustness_trials, rec.seed ^ 0x9e37_79b9_7f4a_7c15)?;
        rec.stable_fraction = Some(rob.fraction_stable);
    }
    let j_hat = closed_loop_cost(ctx.ss, &k, ctx.weights)?;
    let b = ctx.base;
    rec.subopt = Some(SuboptReport::new(b.j_star, j_hat, eps, alpha, b.u_star_hinf, b.g_star_hinf, syn.g_hat_hinf));
    Ok(())
}

/// Run every `(seed, N)` record on `threads` workers. Records come back
/// ordered by seed, then N; failures are kept in place.
pub fn run_records(cfg: &ExperimentConfig, threads: usize) -> Result<(RunReport, Vec<RecordArtifacts>)> {
    cfg.validate()?;
    let ss = cfg.plant()?;
    let weights = cfg.weights();
    let base = baseline(&ss, &weights)?;
    let hash = cfg.hash();
    let ctx = Ctx { cfg, hash: &hash, ss: &ss, base: &base, weights: &weights };
    let jobs: Vec<(u64, usize)> = cfg.seeds.iter().flat_map(|&s| cfg.n_list.iter().map(move |&n| (s, n))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let out: Vec<(RunRecord, RecordArtifacts)> = pool.install(|| jobs.par_iter().map(|&(s, n)| run_record(&ctx, s, n)).collect());
    let (records, arts): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let failures = records.iter().filter(|r| !r.succeeded()).count();
    let report = RunReport {
        schema_version: super::config::SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
        config: cfg.clone(),
        baseline: BaselineSummary { j_star: base.j_star, u_star_hinf: base.u_star_hinf, g_star_hinf: base.g_star_hinf },
        records,
        failures,
    };
    Ok((report, arts))
}

/// Identify, synthesize and evaluate for every `(seed, N)` in the config.
pub fn run_end_to_end(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_end_to_end_threads(cfg, 1)
}

pub fn run_end_to_end_threads(cfg: &ExperimentConfig, threads: usize) -> Result<RunReport> {
    run_records(cfg, threads).map(|(r, _)| r)
}
