//! Descriptive statistics used by the benchmark reports.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("statistic of an empty sample")]
    Empty,
    #[error("sample contains NaN")]
    NaN,
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(StatsError::NaN);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p / 100 * n)`, with rank 1 for `p = 0`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "nearest_rank of an empty slice");
    let n = sorted.len();
    let rank = libm::ceil(p / 100.0 * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

pub fn compute_percentiles(samples: &[f64]) -> Result<Percentiles, StatsError> {
    let v = sorted(samples)?;
    Ok(Percentiles {
        p50: nearest_rank(&v, 50.0),
        p95: nearest_rank(&v, 95.0),
        max: v[v.len() - 1],
    })
}

/// Percentile with linear interpolation between closest ranks, the
/// convention of most plotting libraries' box plots.
pub fn linear_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); zero for one sample.
pub fn sample_std(samples: &[f64]) -> Result<f64, StatsError> {
    let m = mean(samples)?;
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - m) * (x - m)).sum();
    Ok(libm::sqrt(ss / (samples.len() - 1) as f64))
}

/// Standard deviation pooled over groups after removing each group's mean.
pub fn pooled_std(groups: &[Vec<f64>]) -> Result<f64, StatsError> {
    let mut ss = 0.0;
    let mut dof = 0usize;
    for g in groups.iter().filter(|g| !g.is_empty()) {
        let m = mean(g)?;
        ss += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
        dof += g.len() - 1;
    }
    if dof == 0 {
        return Err(StatsError::Empty);
    }
    Ok(libm::sqrt(ss / dof as f64))
}

/// Box plot summary of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self, StatsError> {
        let v = sorted(samples)?;
        Ok(Self {
            n: v.len(),
            min: v[0],
            q1: linear_quantile(&v, 0.25),
            median: linear_quantile(&v, 0.5),
            q3: linear_quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: mean(&v)?,
            std: sample_std(&v)?,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}
