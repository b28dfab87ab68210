//! Best-in-hindsight comparators and the worst-case loss bounds of the three
//! forecasters, plus a verifier that runs a forecaster and reports the slack.
//!
//! Every bound has the form `L_T(forecaster) <= L_T(expert) + penalty`, and
//! holds for every comparator. The verifier uses the comparator minimizing
//! the right-hand side's loss-plus-penalty, which makes the check as tight as
//! possible at the regularizer the bound names.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::caar::Caar;
use crate::error::{check_len, Error, Result};
use crate::harness::run_online;
use crate::kaar::{Kaar, Kernel};
use crate::maar::{Maar, MaarConfig};
use crate::structured::StructuredSystem;
use crate::types::{squared_distance, Example, Forecaster, Signal};

/// Slack below this is treated as a violated bound.
pub const SLACK_TOLERANCE: f64 = 1e-6;

/// Linear expert `xi^i = 1/d + alpha_i' x` for `i < d`, last class the
/// remainder. `alpha` stacks the `d - 1` blocks of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExpert {
    pub alpha: Vec<f64>,
    pub n: usize,
    pub d: usize,
}

impl LinearExpert {
    pub fn zero(n: usize, d: usize) -> Self {
        Self { alpha: vec![0.0; n * (d - 1)], n, d }
    }

    pub fn predict(&self, x: &Signal) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let mut xi = Vec::with_capacity(d);
        let mut rest = 1.0;
        for block in self.alpha.chunks(n) {
            let v = 1.0 / d as f64 + block.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum::<f64>();
            rest -= v;
            xi.push(v);
        }
        xi.push(rest);
        xi
    }

    pub fn norm_sq(&self) -> f64 {
        self.alpha.iter().map(|v| v * v).sum()
    }
}

/// `f_i(x) = sum_t c_{i,t} K(x_t, x)` for `i < d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpert {
    /// Block `i` holds the `T` coefficients of `f_i`.
    pub coeffs: Vec<f64>,
    pub kernel: Kernel,
    pub support: Vec<Signal>,
    pub d: usize,
}

impl KernelExpert {
    pub fn predict(&self, x: &Signal) -> Result<Vec<f64>> {
        let t = self.support.len();
        let kx: Vec<f64> = self
            .support
            .iter()
            .map(|s| crate::kaar::kernel_eval(&self.kernel, s, x))
            .collect::<Result<_>>()?;
        let d = self.d;
        let mut xi = Vec::with_capacity(d);
        let mut rest = 1.0;
        for block in self.coeffs.chunks(t.max(1)).take(d - 1) {
            let v = 1.0 / d as f64 + block.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
            rest -= v;
            xi.push(v);
        }
        while xi.len() < d - 1 {
            let v = 1.0 / d as f64;
            rest -= v;
            xi.push(v);
        }
        xi.push(rest);
        Ok(xi)
    }

    /// `sum_i |f_i|^2 = sum_i c_i' K c_i`.
    pub fn norm_sq(&self) -> f64 {
        let t = self.support.len();
        if t == 0 {
            return 0.0;
        }
        let gram = self.kernel.gram(&self.support);
        self.coeffs
            .chunks(t)
            .map(|c| {
                let c = DVector::from_column_slice(c);
                c.dot(&(&gram * &c))
            })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }
}

fn dims(data: &[Example]) -> Option<(usize, usize)> {
    data.first().map(|e| (e.x.dim(), e.y.dim()))
}

fn check_data(data: &[Example], n: usize, d: usize) -> Result<()> {
    for e in data {
        check_len(n, e.x.dim())?;
        check_len(d, e.y.dim())?;
    }
    Ok(())
}

/// Cumulative Brier loss of a linear expert.
pub fn expert_loss(alpha: &LinearExpert, data: &[Example]) -> Result<f64> {
    check_len(alpha.n * (alpha.d - 1), alpha.alpha.len())?;
    check_data(data, alpha.n, alpha.d)?;
    Ok(data
        .iter()
        .map(|e| squared_distance(e.y.as_slice(), &alpha.predict(&e.x)))
        .sum())
}

/// Cumulative Brier loss of a kernel expert.
pub fn kernel_expert_loss(f: &KernelExpert, data: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for e in data {
        check_len(f.d, e.y.dim())?;
        total += squared_distance(e.y.as_slice(), &f.predict(&e.x)?);
    }
    Ok(total)
}

/// Minimizes `L_T(alpha) + reg |alpha|^2`; returns the minimizer and the
/// minimum.
pub fn best_linear_expert(data: &[Example], n: usize, d: usize, reg: f64) -> Result<(LinearExpert, f64)> {
    MaarConfig::new(n, d, reg)?;
    check_data(data, n, d)?;
    let mut c = DMatrix::zeros(n, n);
    // rhs = -h/2 with h_i = -2 sum (y^i - y^d) x
    let mut rhs = DVector::zeros(n * (d - 1));
    for e in data {
        let x = DVector::from_column_slice(e.x.as_slice());
        c.ger(1.0, &x, &x, 1.0);
        let y = e.y.as_slice();
        for i in 0..d - 1 {
            rhs.rows_mut(i * n, n).axpy(y[i] - y[d - 1], &x, 1.0);
        }
    }
    let alpha = StructuredSystem::factor(reg, d, &c)?.solve(&rhs)?;
    let expert = LinearExpert { alpha: alpha.as_slice().to_vec(), n, d };
    let objective = expert_loss(&expert, data)? + reg * expert.norm_sq();
    Ok((expert, objective))
}

struct KernelFit {
    expert: KernelExpert,
    loss: f64,
    norm_sq: f64,
    /// `ln det(aI + (I + J) ⊗ K)`
    log_det: f64,
}

fn fit_kernel_expert(data: &[Example], kernel: Kernel, reg: f64) -> Result<KernelFit> {
    let Some((n, d)) = dims(data) else {
        return Err(Error::InvalidParameter("kernel expert needs at least one example".into()));
    };
    MaarConfig::new(n, d, reg)?;
    check_data(data, n, d)?;
    let t = data.len();
    let support: Vec<Signal> = data.iter().map(|e| e.x.clone()).collect();
    let gram = kernel.gram(&support);
    let mut rhs = DVector::zeros(t * (d - 1));
    for (s, e) in data.iter().enumerate() {
        let y = e.y.as_slice();
        for i in 0..d - 1 {
            rhs[i * t + s] = y[i] - y[d - 1];
        }
    }
    let system = StructuredSystem::factor(reg, d, &gram)?;
    let coeffs = system.solve(&rhs)?;

    // Evaluate on the data through the Gram matrix.
    let m = d - 1;
    let fitted: Vec<DVector<f64>> = (0..m).map(|i| &gram * coeffs.rows(i * t, t)).collect();
    let norm_sq: f64 = (0..m).map(|i| coeffs.rows(i * t, t).dot(&fitted[i])).sum();
    let centre = 1.0 / d as f64;
    let mut loss = 0.0;
    for (s, e) in data.iter().enumerate() {
        let y = e.y.as_slice();
        let mut rest = 1.0;
        for i in 0..m {
            let xi = centre + fitted[i][s];
            rest -= xi;
            loss += (y[i] - xi).powi(2);
        }
        loss += (y[m] - rest).powi(2);
    }
    let expert = KernelExpert { coeffs: coeffs.as_slice().to_vec(), kernel, support, d };
    Ok(KernelFit { expert, loss, norm_sq, log_det: system.log_det() })
}

/// Minimizer of `L_T(f) + reg sum_i |f_i|^2` over the RKHS, in representer
/// form. Returns the expert, `L_T(f)` and `sum_i |f_i|^2`.
pub fn best_kernel_expert(data: &[Example], kernel: Kernel, reg: f64) -> Result<(KernelExpert, f64, f64)> {
    let fit = fit_kernel_expert(data, kernel, reg)?;
    Ok((fit.expert, fit.loss, fit.norm_sq))
}

fn log_term(t: usize, x_max: f64, a: f64) -> f64 {
    (t as f64 * x_max * x_max / a + 1.0).ln()
}

/// One-dimensional AAR for outcomes in `[lo, hi]`:
/// `a |alpha|^2 + n (hi - lo)^2 / 4 ln(T X^2 / a + 1)` on top of the expert loss.
pub fn bound_rhs_scalar(t: usize, x_max: f64, n: usize, lo: f64, hi: f64, a: f64, norm_sq: f64) -> f64 {
    a * norm_sq + n as f64 * (hi - lo).powi(2) / 4.0 * log_term(t, x_max, a)
}

/// Component-wise forecaster: `d a |alpha|^2 + (n d / 4) ln(T X^2 / a + 1)`.
pub fn bound_rhs_component_sum(t: usize, x_max: f64, n: usize, d: usize, a: f64, norm_sq: f64) -> f64 {
    d as f64 * a * norm_sq + (n * d) as f64 / 4.0 * log_term(t, x_max, a)
}

/// mAAR run with ridge `2a`: `2a |alpha|^2 + (n (d-1) / 2) ln(T X^2 / a + 1)`.
pub fn bound_rhs_double_ridge(t: usize, x_max: f64, n: usize, d: usize, a: f64, norm_sq: f64) -> f64 {
    2.0 * a * norm_sq + (n * (d - 1)) as f64 / 2.0 * log_term(t, x_max, a)
}

/// mAAR run with ridge `a`:
/// `a |alpha|^2 + (n (d-2) / 2) ln(T X^2 / a + 1) + (n / 2) ln(T X^2 d / a + 1)`.
pub fn bound_rhs_eigen_split(t: usize, x_max: f64, n: usize, d: usize, a: f64, norm_sq: f64) -> f64 {
    let wide = (t as f64 * x_max * x_max * d as f64 / a + 1.0).ln();
    a * norm_sq + (n * (d - 2)) as f64 / 2.0 * log_term(t, x_max, a) + n as f64 / 2.0 * wide
}

/// Kernel forecaster: `L_T(f) + a sum |f_i|^2 + (1/2) log_det`, where
/// `log_det = ln det(I + (I + J) ⊗ K / a)` (see [`normalized_log_det`]).
pub fn bound_rhs_log_det(expert_loss: f64, norm_sq: f64, a: f64, log_det: f64) -> f64 {
    expert_loss + a * norm_sq + 0.5 * log_det
}

/// Horizon-tuned kernel regret: `2 c F sqrt((d - 1) T)`.
pub fn bound_rhs_horizon_tuned(c_f: f64, f_budget: f64, d: usize, t: usize) -> f64 {
    2.0 * c_f * f_budget * (((d - 1) * t) as f64).sqrt()
}

/// `ln det(I + (I + J) ⊗ K / a) = ln det A - T (d - 1) ln a`.
pub fn normalized_log_det(a: f64, d: usize, gram: &DMatrix<f64>) -> Result<f64> {
    let t = gram.nrows();
    if t == 0 {
        return Ok(0.0);
    }
    Ok(crate::kaar::kernel_log_det(a, d, gram)? - (t * (d - 1)) as f64 * a.ln())
}

/// Largest `sqrt(K(x, x))` over the stream: the embedding constant as seen
/// on observed data.
pub fn empirical_embedding_constant(kernel: &Kernel, data: &[Example]) -> f64 {
    data.iter()
        .map(|e| crate::kaar::kernel_eval(kernel, &e.x, &e.x).unwrap_or(0.0).max(0.0).sqrt())
        .fold(0.0, f64::max)
}

/// Which guarantee to check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum BoundKind {
    /// cAAR with ridge `a`.
    CaarComponentSum,
    /// mAAR run with ridge `2a`.
    MaarDoubleRidge,
    /// mAAR run with ridge `a`.
    MaarEigenSplit,
    /// mKAAR with ridge `a`.
    KaarLogDet { kernel: Kernel },
    /// mKAAR with ridge tuned to the horizon and budget `F` on `sum |f_i|^2`.
    /// The supplied ridge is ignored.
    KaarHorizonTuned { kernel: Kernel, f_budget: f64 },
}

impl BoundKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoundKind::CaarComponentSum => "caar/component-sum",
            BoundKind::MaarDoubleRidge => "maar/double-ridge",
            BoundKind::MaarEigenSplit => "maar/eigen-split",
            BoundKind::KaarLogDet { .. } => "kaar/log-det",
            BoundKind::KaarHorizonTuned { .. } => "kaar/horizon-tuned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub trials: usize,
    /// Ridge the forecaster ran with.
    pub ridge: f64,
    pub algorithm_loss: f64,
    pub expert_loss: f64,
    pub bound_value: f64,
    pub slack: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.slack >= -SLACK_TOLERANCE
    }
}

fn max_abs_signal(data: &[Example]) -> f64 {
    data.iter().map(|e| e.x.max_abs()).fold(0.0, f64::max)
}

/// Ridge the forecaster actually runs with under `kind`.
pub fn effective_ridge(kind: &BoundKind, data: &[Example], a: f64) -> Result<f64> {
    match kind {
        BoundKind::MaarDoubleRidge => Ok(2.0 * a),
        BoundKind::KaarHorizonTuned { kernel, f_budget } => {
            if !(*f_budget > 0.0) {
                return Err(Error::InvalidParameter(format!("budget must be positive, got {f_budget}")));
            }
            let Some((_, d)) = dims(data) else {
                return Err(Error::InvalidParameter("cannot tune on an empty stream".into()));
            };
            let c_f = empirical_embedding_constant(kernel, data);
            if !(c_f > 0.0) {
                return Err(Error::InvalidParameter("kernel vanishes on every signal".into()));
            }
            Ok(c_f * (((d - 1) * data.len()) as f64).sqrt() / f_budget)
        }
        _ => Ok(a),
    }
}

/// The forecaster a bound is stated for, running with ridge `ridge`.
pub fn bound_forecaster(kind: &BoundKind, n: usize, d: usize, ridge: f64) -> Result<Box<dyn Forecaster>> {
    let cfg = MaarConfig::new(n, d, ridge)?;
    Ok(match kind {
        BoundKind::CaarComponentSum => Box::new(Caar::new(cfg)),
        BoundKind::MaarDoubleRidge | BoundKind::MaarEigenSplit => Box::new(Maar::new(cfg)),
        BoundKind::KaarLogDet { kernel } | BoundKind::KaarHorizonTuned { kernel, .. } => {
            Box::new(Kaar::new(n, d, ridge, *kernel)?.with_incremental_factors())
        }
    })
}

/// Comparator loss and right-hand side of the bound named by `kind`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub ridge: f64,
    pub expert_loss: f64,
    pub bound: f64,
}

/// Evaluates the bound on `data` without running the forecaster.
pub fn bound_value(data: &[Example], kind: &BoundKind, a: f64) -> Result<BoundValue> {
    let Some((n, d)) = dims(data) else {
        return Err(Error::InvalidParameter("cannot evaluate a bound on an empty stream".into()));
    };
    let t = data.len();
    let x_max = max_abs_signal(data);
    let ridge = effective_ridge(kind, data, a)?;
    let linear = |reg: f64| -> Result<(f64, f64)> {
        let (alpha, _) = best_linear_expert(data, n, d, reg)?;
        Ok((expert_loss(&alpha, data)?, alpha.norm_sq()))
    };
    let (expert, bound) = match kind {
        BoundKind::CaarComponentSum => {
            let (el, norm) = linear(d as f64 * a)?;
            (el, el + bound_rhs_component_sum(t, x_max, n, d, a, norm))
        }
        BoundKind::MaarDoubleRidge => {
            let (el, norm) = linear(2.0 * a)?;
            (el, el + bound_rhs_double_ridge(t, x_max, n, d, a, norm))
        }
        BoundKind::MaarEigenSplit => {
            let (el, norm) = linear(a)?;
            (el, el + bound_rhs_eigen_split(t, x_max, n, d, a, norm))
        }
        BoundKind::KaarLogDet { kernel } => {
            let fit = fit_kernel_expert(data, *kernel, a)?;
            let log_det = fit.log_det - (t * (d - 1)) as f64 * a.ln();
            (fit.loss, bound_rhs_log_det(fit.loss, fit.norm_sq, a, log_det))
        }
        BoundKind::KaarHorizonTuned { kernel, f_budget } => {
            let c_f = empirical_embedding_constant(kernel, data);
            let (f, _, norm_sq) = best_kernel_expert(data, *kernel, ridge)?;
            let f = if norm_sq > *f_budget { f.scaled((f_budget / norm_sq).sqrt()) } else { f };
            let el = kernel_expert_loss(&f, data)?;
            (el, el + bound_rhs_horizon_tuned(c_f, *f_budget, d, t))
        }
    };
    Ok(BoundValue { ridge, expert_loss: expert, bound })
}

/// Runs the forecaster named by `kind` over `data` and compares its loss to
/// the bound's right-hand side at the best comparator.
pub fn verify_run(data: &[Example], kind: BoundKind, a: f64) -> Result<BoundReport> {
    let value = bound_value(data, &kind, a)?;
    let (n, d) = dims(data).expect("bound_value rejects empty streams");
    let mut f = bound_forecaster(&kind, n, d, value.ridge)?;
    let alg_loss = run_online(data, &mut f)?.0.cumulative();
    Ok(BoundReport {
        bound: kind.label().to_string(),
        trials: data.len(),
        ridge: value.ridge,
        algorithm_loss: alg_loss,
        expert_loss: value.expert_loss,
        bound_value: value.bound,
        slack: value.bound - alg_loss,
    })
}
