//! Summary statistics, histograms and confidence intervals for simulation
//! output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::analysis::TransmissionPdf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    /// Sample variance (divides by `count - 1`); zero for a single sample.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Option<Summary> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary {
            count: samples.len() as u64,
            mean,
            variance,
            min,
            max,
        })
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Closed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Self {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Entirely below `other`, with no overlap.
    pub fn below(&self, other: &Interval) -> bool {
        self.upper < other.lower
    }
}

/// Two-sided Student-t quantile: `t` with `P(|T| <= t) = level`.
pub fn t_quantile(level: f64, dof: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
    let p = 0.5 + level / 2.0;
    if !dof.is_finite() || dof > 1e7 {
        return z_quantile(level);
    }
    StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(p)
}

/// Two-sided standard normal quantile.
pub fn z_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// t-interval for the mean of i.i.d. samples.
pub fn mean_ci(samples: &[f64], level: f64) -> Option<Interval> {
    let s = Summary::of(samples)?;
    if s.count < 2 {
        return None;
    }
    let t = t_quantile(level, (s.count - 1) as f64);
    Some(Interval::centered(s.mean, t * s.std_error()))
}

/// Batch-means interval for the mean of a correlated series: the series is
/// cut into `batches` contiguous batches whose means are treated as i.i.d.
pub fn batch_means_ci(series: &[f64], batches: usize, level: f64) -> Option<Interval> {
    mean_ci(&batch_means(series, batches)?, level)
}

/// Means of `batches` equal contiguous batches; a remainder shorter than
/// one batch is dropped.
pub fn batch_means(series: &[f64], batches: usize) -> Option<Vec<f64>> {
    let size = series.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return None;
    }
    Some(
        series
            .chunks_exact(size)
            .take(batches)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect(),
    )
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> Interval {
    assert!(trials > 0, "no trials");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_quantile(level);
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval::centered(center, half)
}

/// Total-variation distance between two pmfs on `0..`; missing entries
/// count as zero.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

/// Integer-valued histogram.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: usize) {
        *self.counts.entry(value).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (v, c) in &other.counts {
            *self.counts.entry(*v).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn count(&self, value: usize) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    pub fn max_value(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    /// Relative frequencies indexed by value.
    pub fn pmf(&self) -> Vec<f64> {
        let Some(max) = self.max_value() else {
            return Vec::new();
        };
        let mut out = vec![0.0; max + 1];
        for (v, c) in &self.counts {
            out[*v] = *c as f64 / self.total as f64;
        }
        out
    }

    pub fn summary(&self) -> Option<Summary> {
        if self.total == 0 {
            return None;
        }
        let n = self.total as f64;
        let mean = self.counts.iter().map(|(v, c)| *v as f64 * *c as f64).sum::<f64>() / n;
        let ss = self
            .counts
            .iter()
            .map(|(v, c)| (*v as f64 - mean).powi(2) * *c as f64)
            .sum::<f64>();
        Some(Summary {
            count: self.total,
            mean,
            variance: if self.total > 1 { ss / (n - 1.0) } else { 0.0 },
            min: *self.counts.keys().next()? as f64,
            max: self.max_value()? as f64,
        })
    }

    /// TV distance to an analytic pdf, the pdf's tail mass counted as
    /// disagreement unless the histogram reaches it.
    pub fn tv_to_pdf(&self, pdf: &TransmissionPdf) -> f64 {
        let emp = self.pmf();
        let beyond: f64 = emp.iter().skip(pdf.values.len()).sum();
        let inside = tv_distance(&emp[..emp.len().min(pdf.values.len())], &pdf.values);
        inside + 0.5 * (beyond + pdf.tail_mass)
    }
}

impl FromIterator<usize> for Histogram {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for v in iter {
            h.add(v);
        }
        h
    }
}
