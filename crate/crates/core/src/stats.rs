//! Summary statistics and the hypothesis tests used by the verifiers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_lr;

/// Pass thresholds shared by every statistical check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest accepted `|z|`.
    #[serde(default = "default_z")]
    pub z_max: f64,
    /// Smallest accepted KS p-value.
    #[serde(default = "default_ks")]
    pub ks_p_min: f64,
}

fn default_z() -> f64 {
    3.9
}

fn default_ks() -> f64 {
    1e-3
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { z_max: default_z(), ks_p_min: default_ks() }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }

    pub fn from_iter<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        Self::from_samples(&xs.into_iter().collect::<Vec<_>>())
    }

    /// Bernoulli frequency; the standard error uses the observed frequency.
    pub fn from_bools<I: IntoIterator<Item = bool>>(xs: I) -> Self {
        let mut n = 0usize;
        let mut k = 0usize;
        for b in xs {
            n += 1;
            k += b as usize;
        }
        let p = k as f64 / n as f64;
        Self { mean: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n }
    }

    /// `(mean - exact) / stderr`; zero when both the error and the
    /// discrepancy vanish.
    pub fn z_against(&self, exact: f64) -> f64 {
        z_score(self.mean - exact, self.stderr)
    }
}

/// Running sums for [`Estimate`]; values are added in a fixed order so the
/// result does not depend on scheduling.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 { ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean, stderr: (var / n).sqrt(), n: self.n }
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// z-score for `a - b` of two independent estimates.
pub fn two_sample_z(a: &Estimate, b: &Estimate) -> f64 {
    z_score(a.mean - b.mean, a.stderr.hypot(b.stderr))
}

/// Combined standard error of two independent estimates.
pub fn combined_stderr(a: &Estimate, b: &Estimate) -> f64 {
    a.stderr.hypot(b.stderr)
}

pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * variance).sqrt())
}

/// CDF of `Gamma(shape, scale)`.
pub fn gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(shape, x / scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    KsResult { statistic: d, p_value: kolmogorov_p(d, n), n }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let eff = (n * m) as f64 / (n + m) as f64;
    KsResult { statistic: d, p_value: kolmogorov_tail(d, eff), n: n.min(m) }
}

/// Asymptotic p-value of the KS statistic `d` at sample size `n`, with
/// Stephens' finite-sample correction.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    kolmogorov_tail(d, n as f64)
}

fn kolmogorov_tail(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_q(lambda)
}

/// `Q(λ) = P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small λ
        let pi = std::f64::consts::PI;
        let y = (-pi * pi / (8.0 * lambda * lambda)).exp();
        let s: f64 = (0..20).map(|k| y.powi((2 * k + 1) * (2 * k + 1))).sum();
        (1.0 - (2.0 * pi).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Pearson chi-square goodness of fit against uniform bins; returns the
/// upper-tail p-value.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expect = n as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(chi2)
}

/// Empirical quantile by linear interpolation of the sorted sample.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}
