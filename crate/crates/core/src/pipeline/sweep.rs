use super::config::ExperimentConfig;
use super::run::{run_end_to_end_threads, RunReport};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width of the slope; infinite with two points.
    pub half_width: f64,
    pub points: usize,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len();
    if k < 2 {
        return None;
    }
    let kf = k as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let half_width = if k > 2 {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (sse / (kf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, kf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
        t * se
    } else {
        f64::INFINITY
    };
    Some(LogLogFit { slope, intercept, half_width, points: k })
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    pub median_id_error: Option<f64>,
    pub median_rel_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub config_hash: String,
    pub rows: Vec<ScalingRow>,
    pub id_error_fit: Option<LogLogFit>,
    pub rel_gap_fit: Option<LogLogFit>,
    /// Fewer than four N values with at least three successful records.
    pub insufficient: bool,
}

impl ScalingSummary {
    pub fn from_report(report: &RunReport) -> Self {
        let mut ns: Vec<usize> = report.config.n_list.clone();
        ns.sort_unstable();
        ns.dedup();
        let rows: Vec<ScalingRow> = ns
            .iter()
            .map(|&n| {
                let recs: Vec<_> = report.records.iter().filter(|r| r.n == n).collect();
                let mut ids: Vec<f64> = recs.iter().filter_map(|r| r.identification.map(|e| e.oracle)).collect();
                let mut gaps: Vec<f64> = recs.iter().filter(|r| r.succeeded()).filter_map(|r| r.subopt.as_ref().map(|s| s.relative_gap)).collect();
                let successes = recs.iter().filter(|r| r.succeeded()).count();
                ScalingRow { n, successes, failures: recs.len() - successes, median_id_error: median(&mut ids), median_rel_gap: median(&mut gaps) }
            })
            .collect();
        let fit = |f: &dyn Fn(&ScalingRow) -> Option<f64>| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| f(r).map(|y| (r.n as f64, y))).unzip();
            loglog_fit(&xs, &ys)
        };
        let id_error_fit = fit(&|r| r.median_id_error);
        let rel_gap_fit = fit(&|r| r.median_rel_gap);
        let insufficient = rows.iter().filter(|r| r.successes >= 3).count() < 4;
        ScalingSummary { config_hash: report.config_hash.clone(), rows, id_error_fit, rel_gap_fit, insufficient }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// `N,successes,failures,median_id_error,median_rel_gap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,successes,failures,median_id_error,median_rel_gap\n");
        let o = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.successes, r.failures, o(r.median_id_error), o(r.median_rel_gap)));
        }
        s
    }
}

/// Run the config and summarize per-N medians and log-log slopes.
pub fn sweep_scaling(cfg: &ExperimentConfig) -> Result<(RunReport, ScalingSummary)> {
    sweep_scaling_threads(cfg, 1)
}

pub fn sweep_scaling_threads(cfg: &ExperimentConfig, threads: usize) -> Result<(RunReport, ScalingSummary)> {
    cfg.validate()?;
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::Validation(format!("a sweep needs at least 4 distinct N values, got {}", ns.len())));
    }
    if cfg.seeds.len() < 10 {
        return Err(Error::Validation(format!("a sweep needs at least 10 seeds, got {}", cfg.seeds.len())));
    }
    let report = run_end_to_end_threads(cfg, threads)?;
    let summary = ScalingSummary::from_report(&report);
    Ok((report, summary))
}
