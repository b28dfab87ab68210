use std::collections::VecDeque;

use crate::error::{check_len, Error, Result};
use crate::types::{brier_loss, Example, Forecaster, LossLedger, ProbabilityVector, Signal};

/// Number of past outcomes the baseline averages.
pub const BASELINE_WINDOW: usize = 10;

/// Predict, score, then reveal the outcome: the forecaster only ever sees
/// past outcomes.
pub fn run_online<F: Forecaster + ?Sized>(
    data: &[Example],
    forecaster: &mut F,
) -> Result<(LossLedger, Vec<ProbabilityVector>)> {
    let mut ledger = LossLedger::new();
    let mut forecasts = Vec::with_capacity(data.len());
    for e in data {
        let p = forecaster.predict(&e.x)?;
        ledger.record(brier_loss(&e.y, &p)?);
        forecasts.push(p);
        forecaster.update(&e.x, &e.y)?;
    }
    Ok((ledger, forecasts))
}

/// Mean loss and the mean of the running means over the given steps.
pub fn mse_amse(losses: &[f64]) -> Result<(f64, f64)> {
    if losses.is_empty() {
        return Err(Error::InvalidParameter("no steps to average".into()));
    }
    let mut total = 0.0;
    let mut running = 0.0;
    for (k, l) in losses.iter().enumerate() {
        total += l;
        running += total / (k + 1) as f64;
    }
    let count = losses.len() as f64;
    Ok((total / count, running / count))
}

/// Mean of the last ten outcomes, ignoring the signal.
#[derive(Debug, Clone)]
pub struct SimpleBaseline {
    n: usize,
    d: usize,
    recent: VecDeque<ProbabilityVector>,
}

impl SimpleBaseline {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d, recent: VecDeque::with_capacity(BASELINE_WINDOW) }
    }
}

impl Forecaster for SimpleBaseline {
    fn classes(&self) -> usize {
        self.d
    }

    fn signal_dim(&self) -> usize {
        self.n
    }

    fn predict(&self, x: &Signal) -> Result<ProbabilityVector> {
        check_len(self.n, x.dim())?;
        if self.recent.is_empty() {
            return Ok(ProbabilityVector::uniform(self.d));
        }
        let mut mean = vec![0.0; self.d];
        for y in &self.recent {
            for (m, v) in mean.iter_mut().zip(y.as_slice()) {
                *m += v;
            }
        }
        let k = self.recent.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        let sum: f64 = mean.iter().sum();
        mean.iter_mut().for_each(|m| *m /= sum);
        Ok(ProbabilityVector::from_trusted(mean))
    }

    fn update(&mut self, x: &Signal, y: &ProbabilityVector) -> Result<()> {
        check_len(self.n, x.dim())?;
        check_len(self.d, y.dim())?;
        if self.recent.len() == BASELINE_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(y.clone());
        Ok(())
    }
}

/// Baseline forecasts for every step of `data`.
pub fn simple_baseline(data: &[Example]) -> Result<Vec<ProbabilityVector>> {
    let Some(first) = data.first() else {
        return Ok(Vec::new());
    };
    let mut b = SimpleBaseline::new(first.x.dim(), first.y.dim());
    Ok(run_online(data, &mut b)?.1)
}
