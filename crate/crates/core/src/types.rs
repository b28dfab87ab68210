//! Domain types shared by every forecaster: simplex points, signals, the
//! Brier loss and a running loss ledger.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Absolute tolerance on the component sum of simplex and hyperplane points.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Most negative component still accepted as a probability.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-12;

/// A point of the probability simplex: forecasts and outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::NotInSimplex("empty vector".into()));
        }
        check_finite(&p, "probability vector")?;
        if let Some(v) = p.iter().find(|&&v| v < NEGATIVITY_TOLERANCE) {
            return Err(Error::NotInSimplex(format!("negative component {v}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotInSimplex(format!("components sum to {sum}")));
        }
        Ok(Self(p))
    }

    /// Wraps components produced by code that constructs simplex points by
    /// design. Checked in debug builds only.
    pub(crate) fn from_trusted(p: Vec<f64>) -> Self {
        debug_assert!(Self::new(p.clone()).is_ok(), "not in simplex: {p:?}");
        Self(p)
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index (1-based) of the vertex this vector sits on, if it is one-hot.
    pub fn as_vertex(&self) -> Option<Vertex> {
        let mut hit = None;
        for (i, &v) in self.0.iter().enumerate() {
            if v == 1.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(i + 1);
            } else if v != 0.0 {
                return None;
            }
        }
        hit.map(Vertex)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A point of the hyperplane `sum(g) = 1`; may leave the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        check_finite(&g, "prediction vector")?;
        let sum: f64 = g.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "prediction components sum to {sum}, expected 1"
            )));
        }
        Ok(Self(g))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for PredictionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ProbabilityVector> for PredictionVector {
    fn from(p: ProbabilityVector) -> Self {
        Self(p.0)
    }
}

/// Side information announced before each forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("empty signal".into()));
        }
        check_finite(&x, "signal")?;
        Ok(Self(x))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(x: Vec<f64>) -> Result<Self> {
        Self::new(x)
    }
}

impl From<Signal> for Vec<f64> {
    fn from(x: Signal) -> Self {
        x.0
    }
}

/// One trial of a game: the signal and the outcome that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Signal,
    pub y: ProbabilityVector,
}

impl Example {
    pub fn new(x: Signal, y: ProbabilityVector) -> Self {
        Self { x, y }
    }
}

/// One-based class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex(pub usize);

/// One-hot probability vector for `v` in dimension `d`.
pub fn vertex_to_probability(v: Vertex, d: usize) -> Result<ProbabilityVector> {
    if v.0 == 0 || v.0 > d {
        return Err(Error::VertexOutOfRange { index: v.0, d });
    }
    let mut p = vec![0.0; d];
    p[v.0 - 1] = 1.0;
    Ok(ProbabilityVector(p))
}

/// Squared Euclidean distance between the outcome and the forecast.
pub fn brier_loss(y: &ProbabilityVector, g: &impl AsRef<[f64]>) -> Result<f64> {
    let g = g.as_ref();
    check_len(y.dim(), g.len())?;
    Ok(squared_distance(y.as_slice(), g))
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Running total of per-trial losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLedger {
    cumulative: f64,
    per_step: Vec<f64>,
}

impl LossLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, loss: f64) {
        debug_assert!(loss >= 0.0);
        self.cumulative += loss;
        self.per_step.push(loss);
    }

    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub fn count(&self) -> usize {
        self.per_step.len()
    }

    pub fn per_step(&self) -> &[f64] {
        &self.per_step
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }
}

/// An online forecaster. `predict` never sees the outcome it is scored on.
pub trait Forecaster {
    fn classes(&self) -> usize;

    fn signal_dim(&self) -> usize;

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector>;

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()>;
}

impl<F: Forecaster + ?Sized> Forecaster for Box<F> {
    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn signal_dim(&self) -> usize {
        (**self).signal_dim()
    }

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector> {
        (**self).predict(x)
    }

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        (**self).update(x, y)
    }
}
