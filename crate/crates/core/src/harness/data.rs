use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::types::{vertex_to_probability, Example, Signal, Vertex};

/// Next value above the tube.
pub const UP: Vertex = Vertex(1);
/// Next value below the tube.
pub const DOWN: Vertex = Vertex(2);
/// Change within `[-epsilon, epsilon]`.
pub const TUBE: Vertex = Vertex(3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub max_abs: f64,
}

/// Centres the series and scales it into `[-1, 1]`.
pub fn normalize_series(raw: &[f64]) -> Result<(Vec<f64>, Normalization)> {
    if raw.is_empty() {
        return Err(Error::SeriesTooShort { needed: 0, got: 0 });
    }
    check_finite(raw, "series")?;
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let max_abs = raw.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if !(max_abs > 0.0) {
        return Err(Error::ConstantSeries);
    }
    let out = raw.iter().map(|v| (v - mean) / max_abs).collect();
    Ok((out, Normalization { mean, max_abs }))
}

/// Median of `|y_{t+1} - y_t|`; an even count averages the middle pair.
pub fn median_epsilon(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 1, got: series.len() });
    }
    check_finite(series, "series")?;
    let mut changes: Vec<f64> = series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    changes.sort_by(f64::total_cmp);
    let k = changes.len();
    Ok(if k % 2 == 1 {
        changes[k / 2]
    } else {
        0.5 * (changes[k / 2 - 1] + changes[k / 2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub window: usize,
    pub epsilon: f64,
    pub normalization: Option<Normalization>,
}

/// Signals built from a sliding window with one-hot up/down/tube outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub examples: Vec<Example>,
    pub meta: StreamMeta,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// The signal at step `t` is `y_{t-window}, .., y_{t-1}`; the outcome labels
/// `y_t - y_{t-1}`. Steps without a full window are skipped.
pub fn label_stream(series: &[f64], window: usize, epsilon: f64) -> Result<LabeledStream> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least 1".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if series.len() <= window {
        return Err(Error::SeriesTooShort { needed: window, got: series.len() });
    }
    check_finite(series, "series")?;
    if epsilon == 0.0 {
        log::warn!("epsilon is 0: the tube class only catches exact repeats");
    }
    let examples = (window..series.len())
        .map(|t| {
            let delta = series[t] - series[t - 1];
            let label = if delta > epsilon {
                UP
            } else if delta < -epsilon {
                DOWN
            } else {
                TUBE
            };
            Ok(Example::new(
                Signal::new(series[t - window..t].to_vec())?,
                vertex_to_probability(label, 3)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(LabeledStream {
        examples,
        meta: StreamMeta { window, epsilon, normalization: None },
    })
}

/// First index of the test segment: `floor(len / 3)`.
pub fn split_index(len: usize) -> usize {
    len / 3
}

/// First third for ridge selection, the rest for testing.
pub fn split_train_test(stream: &LabeledStream) -> (&[Example], &[Example]) {
    stream.examples.split_at(split_index(stream.len()))
}

/// One observation per line; a non-numeric first line is taken as a header.
pub fn read_series<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 1 {
            return Err(Error::Format(format!(
                "line {}: expected one value, found {} fields",
                line + 1,
                record.len()
            )));
        }
        let field = &record[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::Format(format!("line {}: non-finite value", line + 1))),
            Err(_) if line == 0 => log::debug!("treating {field:?} as a header"),
            Err(_) => return Err(Error::Format(format!("line {}: not a number: {field:?}", line + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Format("no observations".into()));
    }
    Ok(out)
}

pub fn read_series_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_series(std::fs::File::open(path)?)
}
