//! Seeded synthetic series and streams.
//!
//! Series (with `e_t` i.i.d. standard normal, `y_0 = 0` where a start is needed):
//!
//! * `ar1`:  `y_t = phi * y_{t-1} + noise * e_t`
//! * `sine`: `y_t = amplitude * sin(2 pi t / period) + noise * e_t`
//! * `walk`: `y_t = y_{t-1} + step * e_t`

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{brier_loss, vertex_to_probability, Example, Forecaster, ProbabilityVector, Signal, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthKind {
    Ar1 { phi: f64, noise: f64 },
    Sine { amplitude: f64, period: f64, noise: f64 },
    Walk { step: f64 },
}

impl SynthKind {
    /// `phi = 0.5`, unit noise.
    pub fn ar1() -> Self {
        SynthKind::Ar1 { phi: 0.5, noise: 1.0 }
    }

    /// Unit amplitude, period 50, noise 0.1.
    pub fn sine() -> Self {
        SynthKind::Sine { amplitude: 1.0, period: 50.0, noise: 0.1 }
    }

    /// Unit steps.
    pub fn walk() -> Self {
        SynthKind::Walk { step: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::Ar1 { .. } => "ar1",
            SynthKind::Sine { .. } => "sine",
            SynthKind::Walk { .. } => "walk",
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ar1" => Ok(Self::ar1()),
            "sine" => Ok(Self::sine()),
            "walk" => Ok(Self::walk()),
            other => Err(Error::InvalidParameter(format!("unknown synthetic series {other:?}"))),
        }
    }
}

pub fn synth_series(kind: SynthKind, length: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = move || -> f64 { rng.sample(StandardNormal) };
    let mut prev = 0.0;
    (0..length)
        .map(|t| {
            let y = match kind {
                SynthKind::Ar1 { phi, noise: s } => phi * prev + s * noise(),
                SynthKind::Sine { amplitude, period, noise: s } => {
                    amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin() + s * noise()
                }
                SynthKind::Walk { step } => prev + step * noise(),
            };
            prev = y;
            y
        })
        .collect()
}

fn random_signal<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Signal {
    Signal::new((0..n).map(|_| rng.random_range(-scale..=scale)).collect()).expect("finite draws")
}

/// Uniform signals in `[-scale, scale]^n`. Outcomes are vertices, except
/// roughly one in four which is a random interior point.
pub fn random_stream<R: Rng>(rng: &mut R, t: usize, n: usize, d: usize, scale: f64) -> Vec<Example> {
    (0..t)
        .map(|_| {
            let x = random_signal(rng, n, scale);
            let y = if rng.random_bool(0.25) {
                let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = w.iter().sum();
                let mut p: Vec<f64> = w.iter().map(|v| v / s).collect();
                let head: f64 = p[..d - 1].iter().sum();
                p[d - 1] = (1.0 - head).max(0.0);
                ProbabilityVector::new(p).expect("normalized weights")
            } else {
                vertex_to_probability(Vertex(rng.random_range(1..=d)), d).expect("in range")
            };
            Example::new(x, y)
        })
        .collect()
}

/// Random signals; each outcome is the vertex on which the forecaster's
/// current forecast loses most (lowest index on ties). The forecaster is
/// updated along the way.
pub fn adversarial_stream<F: Forecaster + ?Sized, R: Rng>(
    forecaster: &mut F,
    rng: &mut R,
    t: usize,
    scale: f64,
) -> Result<Vec<Example>> {
    let (n, d) = (forecaster.signal_dim(), forecaster.classes());
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        let x = random_signal(rng, n, scale);
        let p = forecaster.predict(&x)?;
        let mut worst = (f64::NEG_INFINITY, Vertex(1));
        for v in 1..=d {
            let loss = brier_loss(&vertex_to_probability(Vertex(v), d)?, &p)?;
            if loss > worst.0 {
                worst = (loss, Vertex(v));
            }
        }
        let y = vertex_to_probability(worst.1, d)?;
        forecaster.update(&x, &y)?;
        out.push(Example::new(x, y));
    }
    Ok(out)
}
