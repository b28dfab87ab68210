//! Substitution function of the multi-class Brier game.
//!
//! Given the (shifted) generalized prediction `r`, the forecast is
//! `gamma_i = (s - r_i)^+ / 2` where `s` solves `sum_i (s - r_i)^+ = 2`.
//! The left side is piecewise linear and increasing in `s` with breakpoints
//! at the `r_i`, so `s` is found exactly by sorting `r` and scanning.
//! Adding a constant to every `r_i` shifts `s` by the same constant and
//! leaves the forecast unchanged.

use crate::error::{check_finite, Error, Result};
use crate::types::ProbabilityVector;

/// Per-outcome potential losses, known up to a common additive constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPrediction(Vec<f64>);

impl GeneralizedPrediction {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "generalized prediction needs d >= 2 entries, got {}",
                r.len()
            )));
        }
        check_finite(&r, "generalized prediction")?;
        Ok(Self(r))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Solves `sum_i (s - r_i)^+ = 2` for `s`.
pub fn substitution_level(r: &GeneralizedPrediction) -> f64 {
    let mut sorted = r.0.clone();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    for k in 0..sorted.len() {
        prefix += sorted[k];
        // With the k+1 smallest entries active: (k+1) s - prefix = 2.
        let s = (2.0 + prefix) / (k + 1) as f64;
        match sorted.get(k + 1) {
            Some(&next) if s > next => continue,
            _ => return s,
        }
    }
    unreachable!("the last segment always contains the root")
}

/// Maps a generalized prediction to the forecast in the simplex.
pub fn solve_substitution(r: &GeneralizedPrediction) -> ProbabilityVector {
    let s = substitution_level(r);
    let gamma: Vec<f64> = r.0.iter().map(|&ri| (s - ri).max(0.0) / 2.0).collect();
    ProbabilityVector::from_trusted(gamma)
}
