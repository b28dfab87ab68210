use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::data::{label_stream, median_epsilon, normalize_series, split_index, LabeledStream, Normalization};
use super::online::{mse_amse, run_online, SimpleBaseline};
use crate::bounds::{bound_value, BoundKind};
use crate::caar::Caar;
use crate::error::{Error, Result};
use crate::kaar::{Kaar, Kernel};
use crate::maar::{Maar, MaarConfig};
use crate::types::{Example, Forecaster};

/// Classes under the up/down/tube labeling.
const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum AlgorithmKind {
    Caar,
    Maar,
    Kaar { kernel: Kernel },
    /// Mean of the last ten outcomes.
    Simple,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::Caar => "caar",
            AlgorithmKind::Maar => "maar",
            AlgorithmKind::Kaar { .. } => "kaar",
            AlgorithmKind::Simple => "simple",
        }
    }

    pub fn has_ridge(&self) -> bool {
        !matches!(self, AlgorithmKind::Simple)
    }

    /// The guarantee reported as slack for this algorithm.
    pub fn bound(&self) -> Option<BoundKind> {
        match *self {
            AlgorithmKind::Caar => Some(BoundKind::CaarComponentSum),
            AlgorithmKind::Maar => Some(BoundKind::MaarEigenSplit),
            AlgorithmKind::Kaar { kernel } => Some(BoundKind::KaarLogDet { kernel }),
            AlgorithmKind::Simple => None,
        }
    }
}

/// A fresh forecaster. The ridge is ignored by the baseline.
pub fn build_forecaster(kind: &AlgorithmKind, n: usize, d: usize, ridge: f64) -> Result<Box<dyn Forecaster>> {
    Ok(match *kind {
        AlgorithmKind::Caar => Box::new(Caar::new(MaarConfig::new(n, d, ridge)?)),
        AlgorithmKind::Maar => Box::new(Maar::new(MaarConfig::new(n, d, ridge)?)),
        AlgorithmKind::Kaar { kernel } => Box::new(Kaar::new(n, d, ridge, kernel)?.with_incremental_factors()),
        AlgorithmKind::Simple => Box::new(SimpleBaseline::new(n, d)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeChoice {
    Fixed(f64),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonChoice {
    /// Median absolute change of the normalized series.
    Auto,
    Value(f64),
}

/// `10^-3, 10^-2, .., 10^3`.
pub fn default_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

/// Ridge with the lowest online training MSE; near-ties go to the smaller
/// value. Grid cells run in parallel.
pub fn grid_search_ridge(train: &[Example], kind: &AlgorithmKind, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !kind.has_ridge() {
        return Err(Error::InvalidParameter(format!("{} has no ridge", kind.name())));
    }
    if let Some(bad) = grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("ridge must be positive, got {bad}")));
    }
    let smallest = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let Some(first) = train.first() else {
        return Ok(smallest);
    };
    let (n, d) = (first.x.dim(), first.y.dim());
    let scores: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&a| {
                scope.spawn(move || {
                    let mut f = build_forecaster(kind, n, d, a)?;
                    Ok(run_online(train, &mut f)?.0.cumulative() / train.len() as f64)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid cell panicked")).collect()
    });
    let mut best: Option<(f64, f64)> = None;
    for (&a, score) in grid.iter().zip(scores) {
        let mse = score?;
        log::debug!("{}: ridge {a} -> training mse {mse}", kind.name());
        best = match best {
            None => Some((mse, a)),
            Some((b, ba)) => {
                let tol = 1e-12 * b.abs().max(mse.abs()).max(1e-300);
                if mse < b - tol || ((mse - b).abs() <= tol && a < ba) {
                    Some((mse, a))
                } else {
                    Some((b, ba))
                }
            }
        };
    }
    Ok(best.expect("grid is nonempty").1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub window: usize,
    pub epsilon: EpsilonChoice,
    pub ridge: RidgeChoice,
    pub algorithms: Vec<AlgorithmKind>,
    /// Where the series came from, for the run log.
    pub source: String,
    pub seed: Option<u64>,
    /// Wall-clock columns are zeroed when false, making reports bit-identical
    /// across runs.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithms: Vec<AlgorithmKind>) -> Self {
        Self {
            window: 10,
            epsilon: EpsilonChoice::Auto,
            ridge: RidgeChoice::Grid(default_grid()),
            algorithms,
            source: String::new(),
            seed: None,
            record_timing: true,
        }
    }
}

/// One row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: String,
    pub mse: f64,
    pub amse: f64,
    pub time_seconds: f64,
    pub ridge: Option<f64>,
    /// Bound minus cumulative loss over the whole stream.
    pub bound_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub epsilon: f64,
    pub normalization: Normalization,
    pub stream_len: usize,
    pub split_index: usize,
    pub results: Vec<AlgorithmResult>,
}

/// Normalizes `series`, resolves the tube width and labels it.
pub fn prepare_stream(series: &[f64], window: usize, epsilon: EpsilonChoice) -> Result<LabeledStream> {
    let (normalized, normalization) = normalize_series(series)?;
    let epsilon = match epsilon {
        EpsilonChoice::Auto => median_epsilon(&normalized)?,
        EpsilonChoice::Value(e) => e,
    };
    let mut stream = label_stream(&normalized, window, epsilon)?;
    stream.meta.normalization = Some(normalization);
    Ok(stream)
}

/// Normalizes and labels `series`, picks each ridge on the first third,
/// reruns every forecaster from scratch over the whole stream and scores the
/// last two thirds.
pub fn run_experiment(series: &[f64], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let stream = prepare_stream(series, cfg.window, cfg.epsilon)?;
    let epsilon = stream.meta.epsilon;
    let normalization = stream.meta.normalization.expect("set by prepare_stream");
    let data = &stream.examples;
    let split = split_index(data.len());
    let (train, _) = data.split_at(split);
    let n = cfg.window;

    let mut results = Vec::with_capacity(cfg.algorithms.len());
    for kind in &cfg.algorithms {
        let ridge = match (&cfg.ridge, kind.has_ridge()) {
            (_, false) => None,
            (RidgeChoice::Fixed(a), true) => Some(*a),
            (RidgeChoice::Grid(g), true) => Some(grid_search_ridge(train, kind, g)?),
        };
        let a = ridge.unwrap_or(1.0);
        let mut f = build_forecaster(kind, n, CLASSES, a)?;
        let start = Instant::now();
        let (ledger, _) = run_online(data, &mut f)?;
        let elapsed = start.elapsed().as_secs_f64();
        let (mse, amse) = mse_amse(&ledger.per_step()[split..])?;
        let bound_slack = match kind.bound() {
            Some(b) => Some(bound_value(data, &b, a)?.bound - ledger.cumulative()),
            None => None,
        };
        log::info!("{}: ridge {ridge:?}, mse {mse:.5}, amse {amse:.5}", kind.name());
        results.push(AlgorithmResult {
            algorithm: kind.name().to_string(),
            mse,
            amse,
            time_seconds: if cfg.record_timing { elapsed } else { 0.0 },
            ridge,
            bound_slack,
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        epsilon,
        normalization,
        stream_len: data.len(),
        split_index: split,
        results,
    })
}
