//! Estimator results, batch-means standard errors and running moments.

use serde::{Deserialize, Serialize};

/// Parameter columns of a result row. Absent values are left empty in CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub d: Option<usize>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub eps: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<i64>,
    #[serde(rename = "N")]
    pub n: Option<i64>,
    #[serde(rename = "M")]
    pub m: Option<i64>,
    #[serde(rename = "K")]
    pub k: Option<i64>,
    pub delta: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub ell: Option<i64>,
    pub bc: Option<String>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
}

/// A transformed estimate, e.g. `tau = -log(prob) / L^(d-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub observable: String,
    pub params: ParamRecord,
    pub samples: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub derived: Option<Derived>,
    /// `bound` when only a one-sided bound could be reported.
    pub flag: Option<String>,
    /// Not part of the CSV output, which must be reproducible.
    pub wall_seconds: f64,
}

pub const FLAG_BOUND: &str = "bound";

impl EstimatorResult {
    pub fn new(observable: impl Into<String>, params: ParamRecord, samples: u64, estimate: f64, stderr: f64) -> Self {
        EstimatorResult {
            observable: observable.into(),
            params,
            samples,
            estimate,
            stderr: stderr.max(0.0),
            derived: None,
            flag: None,
            wall_seconds: 0.0,
        }
    }

    /// Build from per-chain sample streams merged in chain order.
    pub fn from_chains(observable: impl Into<String>, params: ParamRecord, chains: &[Vec<f64>]) -> Self {
        let (mean, se, n) = pooled_mean_se(chains);
        Self::new(observable, params, n as u64, mean, se)
    }

    pub fn with_derived(mut self, name: impl Into<String>, value: f64, stderr: f64) -> Self {
        self.derived = Some(Derived { name: name.into(), value, stderr });
        self
    }

    pub fn is_bound(&self) -> bool {
        self.flag.as_deref() == Some(FLAG_BOUND)
    }

    /// Attach `-log(estimate) / area` with a delta-method stderr. A zero
    /// estimate turns into a one-sided lower bound from the 95% upper
    /// confidence limit `1 - 0.05^(1/n)` of the probability.
    pub fn with_log_rate(mut self, name: &str, area: f64) -> Self {
        if self.estimate > 0.0 {
            let v = -self.estimate.ln() / area;
            let se = self.stderr / (self.estimate * area);
            self.derived = Some(Derived { name: name.into(), value: v + 0.0, stderr: se });
        } else {
            let upper = 1.0 - 0.05f64.powf(1.0 / self.samples.max(1) as f64);
            let v = -upper.ln() / area;
            self.derived = Some(Derived { name: format!("{name}_lower"), value: v, stderr: 0.0 });
            self.flag = Some(FLAG_BOUND.into());
        }
        self
    }
}

/// Mean and standard error of one correlated stream by non-overlapping batch
/// means with batch size `floor(sqrt(n))`.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let b = ((n as f64).sqrt() as usize).max(1);
    let nb = n / b;
    if nb >= 2 && b > 1 {
        let bm: Vec<f64> = xs.chunks_exact(b).map(|c| c.iter().sum::<f64>() / b as f64).collect();
        let m = bm.iter().sum::<f64>() / nb as f64;
        let var = bm.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
        return (mean, (var / nb as f64).sqrt());
    }
    if n >= 2 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        return (mean, (var / n as f64).sqrt());
    }
    (mean, 0.0)
}

/// Combine independent chains: sample-size weighted mean, variances added.
pub fn pooled_mean_se(chains: &[Vec<f64>]) -> (f64, f64, usize) {
    let total: usize = chains.iter().map(Vec::len).sum();
    if total == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for c in chains.iter().filter(|c| !c.is_empty()) {
        let w = c.len() as f64 / total as f64;
        let (m, se) = batch_means(c);
        mean += w * m;
        var += w * w * se * se;
    }
    (mean, var.sqrt(), total)
}

/// `|a - b|` in units of the combined standard error.
pub fn z_distance(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let s = (se_a * se_a + se_b * se_b).sqrt();
    if s == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / s
    }
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error assuming independent draws.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_has_zero_error() {
        let (m, se) = batch_means(&[1.0; 1000]);
        assert_eq!((m, se), (1.0, 0.0));
    }

    #[test]
    fn iid_batch_error_is_close_to_naive() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3, 0, crate::rng::Purpose::Synthetic);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.gen::<f64>()).collect();
        let (_, se) = batch_means(&xs);
        let naive = (1.0 / 12.0 / 40_000.0f64).sqrt();
        assert!((se / naive - 1.0).abs() < 0.25, "{se} vs {naive}");
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut all = RunningStats::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = RunningStats::default();
        let mut b = RunningStats::default();
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
        assert_eq!(a.count(), 100);
    }

    #[test]
    fn log_rate_bound_on_zero_count() {
        let r = EstimatorResult::new("x", ParamRecord::default(), 100, 0.0, 0.0).with_log_rate("tau", 4.0);
        assert!(r.is_bound());
        let d = r.derived.unwrap();
        assert!(d.value > 0.0 && d.name == "tau_lower");
        let r = EstimatorResult::new("x", ParamRecord::default(), 100, 1.0, 0.0).with_log_rate("tau", 4.0);
        assert_eq!(r.derived.unwrap().value, 0.0);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-20);
    }
}
