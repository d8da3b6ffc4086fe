//! Error and SNR metrics between a clean reference and an estimate, and the
//! per-method comparison report.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::signal::Waveform;

/// Largest length difference [`EvalPair::new`] silently trims away.
pub const MAX_TRIM: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: reference {reference}, estimate {estimate}")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("sample rate mismatch: reference {reference} Hz, estimate {estimate} Hz")]
    RateMismatch { reference: u32, estimate: u32 },
    #[error("signals are empty")]
    Empty,
    #[error("SNR is undefined for a constant reference")]
    ConstantReference,
}

fn check(reference: &[f64], estimate: &[f64]) -> Result<(), MetricError> {
    if reference.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            reference: reference.len(),
            estimate: estimate.len(),
        });
    }
    if reference.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Summed absolute error `Σ |c - p|`.
pub fn rmse_paper(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricError> {
    check(reference, estimate)?;
    Ok(reference
        .iter()
        .zip(estimate)
        .map(|(c, p)| (c - p).abs())
        .sum())
}

/// Root of the mean squared error.
pub fn rmse_standard(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricError> {
    check(reference, estimate)?;
    let sse: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(c, p)| (c - p) * (c - p))
        .sum();
    Ok(math::sqrt(sse / reference.len() as f64))
}

/// Median of `|c - p|`; even lengths average the two middle values.
pub fn med_abs_err(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricError> {
    check(reference, estimate)?;
    let diffs: Vec<f64> = reference
        .iter()
        .zip(estimate)
        .map(|(c, p)| (c - p).abs())
        .collect();
    Ok(math::median(&diffs).expect("non-empty"))
}

/// `10 log10(Σ (c - mean c)² / Σ (c - p)²)`; `+inf` for an exact match.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> Result<f64, MetricError> {
    check(reference, estimate)?;
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let signal: f64 = reference.iter().map(|c| (c - mean) * (c - mean)).sum();
    if signal == 0.0 {
        return Err(MetricError::ConstantReference);
    }
    let noise: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(c, p)| (c - p) * (c - p))
        .sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(signal / noise))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub rmse_paper: f64,
    pub rmse_standard: f64,
    pub med_abs_err: f64,
    pub snr_db: f64,
}

impl Metrics {
    pub fn compute(reference: &[f64], estimate: &[f64]) -> Result<Self, MetricError> {
        Ok(Self {
            rmse_paper: rmse_paper(reference, estimate)?,
            rmse_standard: rmse_standard(reference, estimate)?,
            med_abs_err: med_abs_err(reference, estimate)?,
            snr_db: snr_db(reference, estimate)?,
        })
    }

    /// Arithmetic mean of each field; `None` for an empty slice.
    pub fn mean(all: &[Metrics]) -> Option<Self> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(Self {
            rmse_paper: avg(|m| m.rmse_paper),
            rmse_standard: avg(|m| m.rmse_standard),
            med_abs_err: avg(|m| m.med_abs_err),
            snr_db: avg(|m| m.snr_db),
        })
    }
}

/// Reference and estimate of one recording at a common rate and length.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub id: String,
    pub reference: Vec<f64>,
    pub estimate: Vec<f64>,
    /// Samples dropped from the longer signal to equalize lengths.
    pub trimmed: usize,
}

impl EvalPair {
    /// Trims the longer signal when lengths differ by at most [`MAX_TRIM`].
    pub fn new(
        id: impl Into<String>,
        reference: &Waveform,
        estimate: &Waveform,
    ) -> Result<Self, MetricError> {
        if reference.sample_rate_hz != estimate.sample_rate_hz {
            return Err(MetricError::RateMismatch {
                reference: reference.sample_rate_hz,
                estimate: estimate.sample_rate_hz,
            });
        }
        let (a, b) = (reference.len(), estimate.len());
        if a.abs_diff(b) > MAX_TRIM {
            return Err(MetricError::LengthMismatch {
                reference: a,
                estimate: b,
            });
        }
        let n = a.min(b);
        Ok(Self {
            id: id.into(),
            reference: reference.samples[..n].to_vec(),
            estimate: estimate.samples[..n].to_vec(),
            trimmed: a.abs_diff(b),
        })
    }

    pub fn metrics(&self) -> Result<Metrics, MetricError> {
        Metrics::compute(&self.reference, &self.estimate)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportRow {
    pub method: String,
    pub recording_id: String,
    pub metrics: Metrics,
}

/// Per-recording metrics for several methods, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, method: &str, recording_id: &str, metrics: Metrics) {
        if !self.methods.iter().any(|m| m == method) {
            self.methods.push(method.into());
        }
        self.rows.push(ReportRow {
            method: method.into(),
            recording_id: recording_id.into(),
            metrics,
        });
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn mean(&self, method: &str) -> Option<Metrics> {
        let all: Vec<Metrics> = self.rows_for(method).map(|r| r.metrics).collect();
        Metrics::mean(&all)
    }

    /// `(method, mean metrics)` in method order.
    pub fn means(&self) -> Vec<(String, Metrics)> {
        self.methods
            .iter()
            .filter_map(|m| self.mean(m).map(|x| (m.clone(), x)))
            .collect()
    }
}
