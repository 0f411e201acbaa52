//! Zeros of squared Bessel-0 bridges on one cable.
//!
//! On an interval of length `T`, the sum of a squared Brownian bridge and
//! two squared Bessel-0 processes started from `ℓ₁` at one end and `ℓ₂` at
//! the other has a zero exactly when the first zero `t₁` of the `ℓ₁` process
//! precedes the last zero `t₂` of the rest. Both are one-dimensional:
//!
//! * `ℓ₁/(2t₁) - ℓ₁/(2T)` is `Exp(1)`;
//! * `s = (ℓ₂/2T)·t₂/(T - t₂)` is `Gamma(½, 1)`.
//!
//! Integrating over the pair gives
//! `π^{-1/2} ∫₀^∞ exp(-λ/s - s) s^{-1/2} ds = e^{-2√λ}`, `λ = ℓ₁ℓ₂/(2T)²`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_to_infinity;
use crate::report::TestRecord;
use crate::rng::replicate;
use crate::stats::{Estimate, Thresholds};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeProblem {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must be positive and finite")))
    }
}

impl BridgeProblem {
    pub fn new(t: f64, l1: f64, l2: f64) -> Result<Self> {
        check_positive("T", t)?;
        check_positive("l1", l1)?;
        check_positive("l2", l2)?;
        Ok(Self { t, l1, l2 })
    }

    /// The symmetric problem on `[0, 1]` with the given `λ`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        let l = 2.0 * lambda.sqrt();
        Self::new(1.0, l, l)
    }

    pub fn lambda(&self) -> f64 {
        self.l1 * self.l2 / (2.0 * self.t).powi(2)
    }
}

pub fn zero_probability_closed_form(p: &BridgeProblem) -> f64 {
    (-2.0 * p.lambda().sqrt()).exp()
}

/// `∫₀^∞ exp(-λ/s - s) s^{-1/2} ds`, computed as `2∫₀^∞ exp(-λ/t² - t²) dt`.
pub fn bridge_integral(lambda: f64, rel_tol: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be finite and nonnegative")));
    }
    if !(rel_tol >= 1e-12) {
        return Err(Error::InvalidParameter(format!("rel_tol = {rel_tol} is below 1e-12")));
    }
    let f = |t: f64| {
        if t == 0.0 {
            if lambda > 0.0 { 0.0 } else { 1.0 }
        } else {
            (-lambda / (t * t) - t * t).exp()
        }
    };
    // the quadrature must beat the requested tolerance with some margin
    let r = integrate_to_infinity(f, 0.0, 0.0, 0.1 * rel_tol)?;
    Ok(2.0 * r.value)
}

pub fn zero_probability_quadrature(p: &BridgeProblem, rel_tol: f64) -> Result<f64> {
    Ok(bridge_integral(p.lambda(), rel_tol)? / std::f64::consts::PI.sqrt())
}

/// Density of the first zero of the `ℓ₁` process conditioned to vanish
/// before `T`.
pub fn first_zero_density(t1: f64, l1: f64, t: f64) -> f64 {
    if t1 <= 0.0 || t1 >= t {
        return 0.0;
    }
    l1 / (2.0 * t1 * t1) * (l1 / (2.0 * t) - l1 / (2.0 * t1)).exp()
}

/// Density of the last zero of the squared bridge from 0 to `ℓ₂`.
pub fn last_zero_density(t2: f64, l2: f64, t: f64) -> f64 {
    if t2 <= 0.0 || t2 >= t {
        return 0.0;
    }
    let rest = t - t2;
    (l2 * t).sqrt() * (l2 / (2.0 * t) - l2 / (2.0 * rest)).exp()
        / (2.0 * std::f64::consts::PI * t2 * rest.powi(3)).sqrt()
}

pub fn sample_first_zero<R: Rng + ?Sized>(l1: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_positive("l1", l1)?;
    check_positive("T", t)?;
    let e: f64 = l1 / (2.0 * t) + rng.sample::<f64, _>(Exp1);
    Ok((l1 / (2.0 * e)).min(t))
}

pub fn sample_last_zero<R: Rng + ?Sized>(l2: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_positive("l2", l2)?;
    check_positive("T", t)?;
    let s: f64 = Gamma::new(0.5, 1.0).expect("valid shape").sample(rng);
    let q = 2.0 * t * s / l2;
    Ok(t * q / (1.0 + q))
}

/// Frequency of `t₁ ≤ t₂` over independent draws; the standard error is
/// the binomial one at the observed frequency.
pub fn three_process_zero_mc(p: &BridgeProblem, replicas: usize, seed: u64) -> Estimate {
    let hits = replicate(replicas, seed, |rng| {
        let t1 = sample_first_zero(p.l1, p.t, rng).expect("validated");
        let t2 = sample_last_zero(p.l2, p.t, rng).expect("validated");
        t1 <= t2
    });
    Estimate::from_bools(hits)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeRow {
    pub lambda: f64,
    pub closed: f64,
    pub quadrature: f64,
    pub mc: f64,
    pub stderr: f64,
    pub z: f64,
}

/// For each `λ`: the integral against `√π e^{-2√λ}` and the three-process
/// frequency against `e^{-2√λ}`. The z-score uses the binomial standard
/// error at the exact probability, which stays meaningful when the event is
/// rare.
pub fn bridge_check(
    lambdas: &[f64],
    replicas: usize,
    seed: u64,
    rel_tol: f64,
    th: &Thresholds,
) -> Result<(Vec<BridgeRow>, Vec<TestRecord>)> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let p = BridgeProblem::from_lambda(lambda)?;
        let closed = zero_probability_closed_form(&p);
        let integral = bridge_integral(lambda, rel_tol)?;
        let target = std::f64::consts::PI.sqrt() * closed;
        records.push(TestRecord::exact_match(
            format!("bridge-integral[{lambda}]"),
            "int_0^inf exp(-lambda/s - s) ds/sqrt(s) = sqrt(pi) exp(-2 sqrt(lambda))",
            target,
            integral,
            rel_tol * target,
        ));
        let mc = three_process_zero_mc(&p, replicas, seed.wrapping_add(i as u64));
        let est = Estimate { stderr: (closed * (1.0 - closed) / replicas as f64).sqrt(), ..mc };
        let record = TestRecord::z_test(
            format!("three-process[{lambda}]"),
            "P(first zero <= last zero) = exp(-2 sqrt(lambda))",
            closed,
            est,
            th,
        );
        rows.push(BridgeRow {
            lambda,
            closed,
            quadrature: integral / std::f64::consts::PI.sqrt(),
            mc: mc.mean,
            stderr: est.stderr,
            z: record.z.unwrap_or(f64::NAN),
        });
        records.push(record);
    }
    Ok((rows, records))
}
