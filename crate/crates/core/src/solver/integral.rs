//! Recovering the aquatic density at a fixed point from the winged history.
//!
//! While `x` stays inside the habitat,
//! `A(x, t) = e^{-int_0^t k} [A0 + int_0^t r M(s) e^{int_0^s k} ds]`
//! with `k = r M / K2 + mu2 + gamma`.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::error::{Error, Result};

/// Winged density recorded at one physical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHistory {
    pub x: f64,
    /// Increasing sample times starting at 0.
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    /// `A0(x)`.
    pub a0: f64,
}

impl ProbeHistory {
    pub fn new(x: f64, a0: f64) -> Self {
        Self {
            x,
            times: Vec::new(),
            m: Vec::new(),
            a0,
        }
    }

    pub fn push(&mut self, t: f64, m: f64) {
        self.times.push(t);
        self.m.push(m);
    }
}

/// `A(x, t)` at the last recorded time, with trapezoid quadrature of both
/// the exponent and the outer integral.
pub fn reconstruct_a_integral(history: &ProbeHistory, profile: &CoefficientProfile) -> Result<f64> {
    let ProbeHistory { x, times, m, a0 } = history;
    if times.is_empty() || times.len() != m.len() {
        return Err(Error::MissingHistory(format!(
            "probe at x = {x}: {} times, {} samples",
            times.len(),
            m.len()
        )));
    }
    if times[0].abs() > 1e-12 {
        return Err(Error::MissingHistory(format!(
            "probe at x = {x} starts at t = {}, not 0",
            times[0]
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::MissingHistory(format!(
            "probe at x = {x}: sample times must increase"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingHistory(format!("probe at x = {x}: non-finite sample")));
    }
    let c = profile.rates(*x);
    let decay = c.mu2 + c.gamma;
    let k = |mv: f64| c.r * mv / profile.k2 + decay;

    // Cumulative exponent K(t_j) and the integrand r M e^{K}.
    let mut big_k = 0.0;
    let mut outer = 0.0;
    let mut prev = c.r * m[0];
    for j in 1..times.len() {
        let dt = times[j] - times[j - 1];
        big_k += 0.5 * dt * (k(m[j - 1]) + k(m[j]));
        let cur = c.r * m[j] * big_k.exp();
        outer += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    Ok((-big_k).exp() * (a0 + outer))
}
