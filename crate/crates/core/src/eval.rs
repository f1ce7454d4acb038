//! Bad-τ disparity evaluation with All/Noc splits and checkpoint selection.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{DisparityMap, Mask};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("map size mismatch: {0}")]
    SizeMismatch(String),
    #[error("checkpoint {checkpoint:?} covers a different set of datasets")]
    InconsistentSuite { checkpoint: String },
    #[error("unknown dataset family {0:?}")]
    UnknownFamily(String),
}

/// Benchmark families with their customary thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFamily {
    Eth3d,
    Middlebury,
    Kitti,
}

impl DatasetFamily {
    /// Error threshold in pixels.
    pub fn tau(self) -> f64 {
        match self {
            DatasetFamily::Eth3d => 1.0,
            DatasetFamily::Middlebury => 2.0,
            DatasetFamily::Kitti => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetFamily::Eth3d => "ETH3D",
            DatasetFamily::Middlebury => "Middlebury",
            DatasetFamily::Kitti => "KITTI",
        }
    }
}

impl FromStr for DatasetFamily {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let l = s.to_ascii_lowercase();
        if l.starts_with("eth3d") {
            Ok(DatasetFamily::Eth3d)
        } else if l.starts_with("middlebury") {
            Ok(DatasetFamily::Middlebury)
        } else if l.starts_with("kitti") {
            Ok(DatasetFamily::Kitti)
        } else {
            Err(EvalError::UnknownFamily(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub name: String,
    pub tau: f64,
}

impl EvalConfig {
    pub fn new(name: impl Into<String>, tau: f64) -> Self {
        assert!(tau > 0.0, "tau must be positive, got {tau}");
        Self { name: name.into(), tau }
    }

    pub fn for_family(family: DatasetFamily) -> Self {
        Self::new(family.name(), family.tau())
    }
}

/// Bad and evaluated pixel counts for one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadCount {
    pub bad: usize,
    pub total: usize,
}

impl BadCount {
    pub fn percent(&self) -> f64 {
        100.0 * self.bad as f64 / self.total as f64
    }
}

fn check_shapes(pred: &DisparityMap, gt: &DisparityMap, mask: &Mask) -> Result<(), EvalError> {
    if !pred.values.same_shape(&gt.values) || !gt.values.same_shape(mask) {
        return Err(EvalError::SizeMismatch(format!(
            "pred {}x{}, gt {}x{}, mask {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
            mask.width(),
            mask.height()
        )));
    }
    Ok(())
}

/// Counts pixels of `gt.valid ∧ mask` whose error strictly exceeds `tau`.
/// Pixels without a valid prediction are errors.
pub fn bad_count(pred: &DisparityMap, gt: &DisparityMap, mask: &Mask, tau: f64) -> Result<BadCount, EvalError> {
    check_shapes(pred, gt, mask)?;
    let mut c = BadCount { bad: 0, total: 0 };
    let px = pred.values.as_slice().iter().zip(pred.valid.as_slice());
    let gx = gt.values.as_slice().iter().zip(gt.valid.as_slice());
    for (((p, p_ok), (g, g_ok)), m) in px.zip(gx).zip(mask.as_slice()) {
        if !(*g_ok && *m) {
            continue;
        }
        c.total += 1;
        if !*p_ok || (p - g).abs() > tau {
            c.bad += 1;
        }
    }
    if c.total == 0 {
        return Err(EvalError::EmptyEvaluationSet);
    }
    Ok(c)
}

/// Percentage of evaluated pixels with error above `tau`.
pub fn bad_tau(pred: &DisparityMap, gt: &DisparityMap, mask: &Mask, tau: f64) -> Result<f64, EvalError> {
    Ok(bad_count(pred, gt, mask, tau)?.percent())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub all_pct: f64,
    pub noc_pct: f64,
    pub evaluated_all: usize,
    pub evaluated_noc: usize,
    pub bad_all: usize,
    pub bad_noc: usize,
}

pub fn evaluate_pair(pred: &DisparityMap, gt: &DisparityMap, noc: &Mask, config: &EvalConfig) -> Result<PairResult, EvalError> {
    let everything = gt.valid.map(|_| true);
    let all = bad_count(pred, gt, &everything, config.tau)?;
    let noc = bad_count(pred, gt, noc, config.tau)?;
    Ok(PairResult {
        all_pct: all.percent(),
        noc_pct: noc.percent(),
        evaluated_all: all.total,
        evaluated_noc: noc.total,
        bad_all: all.bad,
        bad_noc: noc.bad,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Total bad pixels over total evaluated pixels.
    Pixel,
    /// Unweighted mean of per-pair percentages.
    #[default]
    Pair,
}

/// Combines pair results into `(all_pct, noc_pct)`.
pub fn aggregate(results: &[PairResult], weighting: Weighting) -> Result<(f64, f64), EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(match weighting {
        Weighting::Pair => {
            let n = results.len() as f64;
            (
                results.iter().map(|r| r.all_pct).sum::<f64>() / n,
                results.iter().map(|r| r.noc_pct).sum::<f64>() / n,
            )
        }
        Weighting::Pixel => {
            let sum = |f: fn(&PairResult) -> usize| results.iter().map(f).sum::<usize>() as f64;
            (
                100.0 * sum(|r| r.bad_all) / sum(|r| r.evaluated_all),
                100.0 * sum(|r| r.bad_noc) / sum(|r| r.evaluated_noc),
            )
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPair {
    pub id: String,
    pub result: PairResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub config: EvalConfig,
    pub pairs: Vec<NamedPair>,
    pub all_pct: f64,
    pub noc_pct: f64,
}

/// Evaluation of one model over a suite of datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighting: Weighting,
    pub datasets: Vec<DatasetReport>,
    /// Unweighted mean over datasets; `None` for an empty suite.
    pub suite_all_pct: Option<f64>,
    pub suite_noc_pct: Option<f64>,
}

impl EvalReport {
    /// Builds a report, aggregating each dataset's pairs in the given order.
    pub fn new(datasets: Vec<(EvalConfig, Vec<NamedPair>)>, weighting: Weighting) -> Result<Self, EvalError> {
        let mut out = Vec::with_capacity(datasets.len());
        for (config, pairs) in datasets {
            let results: Vec<PairResult> = pairs.iter().map(|p| p.result).collect();
            let (all_pct, noc_pct) = aggregate(&results, weighting)?;
            out.push(DatasetReport {
                config,
                pairs,
                all_pct,
                noc_pct,
            });
        }
        let n = out.len() as f64;
        let mean = |f: fn(&DatasetReport) -> f64| (!out.is_empty()).then(|| out.iter().map(f).sum::<f64>() / n);
        Ok(Self {
            weighting,
            suite_all_pct: mean(|d| d.all_pct),
            suite_noc_pct: mean(|d| d.noc_pct),
            datasets: out,
        })
    }

    fn dataset_names(&self) -> BTreeSet<&str> {
        self.datasets.iter().map(|d| d.config.name.as_str()).collect()
    }
}

/// Picks the checkpoint with the lowest mean All percentage over the suite.
/// Ties go to the earliest checkpoint in `reports`.
pub fn select_best_checkpoint(reports: &[(String, EvalReport)]) -> Result<&str, EvalError> {
    let (first_id, first) = reports.first().ok_or(EvalError::EmptyInput)?;
    let names = first.dataset_names();
    let mut best: Option<(&str, f64)> = None;
    for (id, report) in reports {
        if report.dataset_names() != names || report.datasets.len() != names.len() {
            return Err(EvalError::InconsistentSuite { checkpoint: id.clone() });
        }
        if report.datasets.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let score = report.datasets.iter().map(|d| d.all_pct).sum::<f64>() / report.datasets.len() as f64;
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((id, score));
        }
    }
    Ok(best.map_or(first_id.as_str(), |(id, _)| id))
}

const NAME_WIDTH: usize = 16;
const COL_WIDTH: usize = 8;

/// Fixed-width table, one row per dataset plus a suite mean row.
pub fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<nw$} {:>4} {:>cw$} {:>cw$}",
        "dataset",
        "tau",
        "All",
        "Noc",
        nw = NAME_WIDTH,
        cw = COL_WIDTH
    );
    let row = |s: &mut String, name: &str, tau: &str, all: f64, noc: f64| {
        let _ = writeln!(
            s,
            "{:<nw$} {:>4} {:>cw$.2} {:>cw$.2}",
            name,
            tau,
            all,
            noc,
            nw = NAME_WIDTH,
            cw = COL_WIDTH
        );
    };
    for d in &report.datasets {
        row(&mut s, &d.config.name, &format!("{}", d.config.tau), d.all_pct, d.noc_pct);
    }
    if let (Some(all), Some(noc)) = (report.suite_all_pct, report.suite_noc_pct) {
        row(&mut s, "mean", "", all, noc);
    }
    s
}

/// JSON twin of [`render_report`].
pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
