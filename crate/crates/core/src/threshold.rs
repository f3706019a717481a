//! Threshold index R0 of the Dirichlet problem on a fixed interval, the
//! principal eigenvalue lambda0 of the linearised two-stage system, and the
//! time trace of R0 along the free-boundary interval.
//!
//! The primary discretisation works with the exponentially gauged unknown
//! `Psi = exp(-nu x / (2D)) phi`, which turns the advective operator into
//! the symmetric `-D d_xx + nu^2/(4D) + mu1`. With
//! `W = r gamma / (mu2 + gamma)` the threshold solves the symmetric pencil
//! `W Psi = R0^2 L Psi`.

use serde::Serialize;

use crate::coefficients::{CoefficientProfile, Rates};
use crate::error::{Error, Result};
use crate::linalg::{normalize_max, SignSymmetricTridiag, SymTridiag};
use crate::parallel::{self, Strategy};

pub const MIN_RESOLUTION: usize = 16;
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 10_000;
pub const LAMBDA_TOLERANCE: f64 = 1e-8;

/// Closed interval `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub p: f64,
    pub q: f64,
}

impl Interval {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self {
            p: -half_width,
            q: half_width,
        }
    }

    pub fn length(&self) -> f64 {
        self.q - self.p
    }

    fn check(&self, resolution: usize) -> Result<()> {
        if !(self.p.is_finite() && self.q.is_finite()) || self.q <= self.p {
            return Err(Error::DegenerateDomain {
                g: self.p,
                h: self.q,
            });
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidArgument(format!(
                "threshold resolution {resolution} is below {MIN_RESOLUTION}"
            )));
        }
        Ok(())
    }
}

/// Uniform grid with `resolution` cells; the operators act on interior nodes.
struct Grid {
    spacing: f64,
    interior: Vec<f64>,
    rates: Vec<Rates>,
}

impl Grid {
    fn new(interval: Interval, profile: &CoefficientProfile, resolution: usize) -> Self {
        let spacing = interval.length() / resolution as f64;
        let interior: Vec<f64> = (1..resolution)
            .map(|i| interval.p + i as f64 * spacing)
            .collect();
        let rates = interior.iter().map(|&x| profile.rates(x)).collect();
        Self {
            spacing,
            interior,
            rates,
        }
    }

    /// `-D d_xx + nu^2/(4D) + mu1 - extra_i` in gauged form.
    fn gauged_operator(
        &self,
        profile: &CoefficientProfile,
        extra: impl Fn(&Rates) -> f64,
    ) -> SymTridiag {
        let d = profile.d;
        let h2 = self.spacing * self.spacing;
        let gauge = profile.nu * profile.nu / (4.0 * d);
        let diag = self
            .rates
            .iter()
            .map(|c| 2.0 * d / h2 + gauge + c.mu1 - extra(c))
            .collect();
        let off = vec![-d / h2; self.interior.len().saturating_sub(1)];
        SymTridiag::new(diag, off)
    }

    fn recruitment(&self) -> Vec<f64> {
        self.rates.iter().map(Rates::recruitment).collect()
    }
}

/// R0 together with the principal eigenfunction pair on the interval grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R0Solution {
    pub interval: Interval,
    pub r0: f64,
    /// Node abscissae including both endpoints.
    pub x: Vec<f64>,
    /// Winged-stage eigenfunction, zero at the endpoints.
    pub eigen_m: Vec<f64>,
    /// Aquatic-stage eigenfunction, zero at the endpoints.
    pub eigen_a: Vec<f64>,
    pub resolution: usize,
    pub iterations: usize,
}

/// Full threshold report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub interval: Interval,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub lambda0: f64,
    pub x: Vec<f64>,
    pub eigen_m: Vec<f64>,
    pub eigen_a: Vec<f64>,
    pub resolution: usize,
}

/// R0 by power iteration on `L^{-1} W` for the gauged symmetric pencil.
pub fn compute_r0(
    interval: Interval,
    profile: &CoefficientProfile,
    resolution: usize,
) -> Result<R0Solution> {
    interval.check(resolution)?;
    let grid = Grid::new(interval, profile, resolution);
    let op = grid.gauged_operator(profile, |_| 0.0);
    let weight = grid.recruitment();
    let lu = op.factor();

    let n = grid.interior.len();
    let mut v = vec![1.0; n];
    let mut rho_prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < POWER_MAX_ITERATIONS {
        iterations += 1;
        let mut z: Vec<f64> = v.iter().zip(&weight).map(|(a, w)| a * w).collect();
        lu.solve_in_place(&mut z);
        let lz = op.mul_vec(&z);
        let num: f64 = z.iter().zip(&weight).map(|(a, w)| a * a * w).sum();
        let den: f64 = z.iter().zip(&lz).map(|(a, b)| a * b).sum();
        let rho = num / den;
        normalize_max(&mut z);
        v = z;
        last_change = ((rho - rho_prev) / rho).abs();
        rho_prev = rho;
        if last_change <= POWER_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence {
            iterations,
            last_change,
        });
    }
    let r0 = rho_prev.sqrt();

    // Un-gauge: phi = exp(nu x / (2D)) Psi, referenced to the right end to
    // keep the exponent non-positive for nu >= 0.
    let k = profile.nu / (2.0 * profile.d);
    let x_ref = if k >= 0.0 { interval.q } else { interval.p };
    let mut eigen_m = Vec::with_capacity(n + 2);
    let mut eigen_a = Vec::with_capacity(n + 2);
    eigen_m.push(0.0);
    eigen_a.push(0.0);
    for ((&x, c), psi) in grid.interior.iter().zip(&grid.rates).zip(&v) {
        let phi = (k * (x - x_ref)).exp() * psi;
        eigen_m.push(phi);
        eigen_a.push(c.r * phi / (r0 * (c.mu2 + c.gamma)));
    }
    eigen_m.push(0.0);
    eigen_a.push(0.0);
    let norm = max_abs(&eigen_m) + max_abs(&eigen_a);
    eigen_m.iter_mut().for_each(|v| *v /= norm);
    eigen_a.iter_mut().for_each(|v| *v /= norm);

    let mut x = Vec::with_capacity(n + 2);
    x.push(interval.p);
    x.extend_from_slice(&grid.interior);
    x.push(interval.q);

    Ok(R0Solution {
        interval,
        r0,
        x,
        eigen_m,
        eigen_a,
        resolution,
        iterations,
    })
}

/// R0 from the non-symmetric central-difference discretisation of
/// `-D phi'' + nu phi' + mu1 phi = R0^{-2} W phi`, without the gauge.
/// Solved by Sturm bisection after a diagonal similarity; independent of the
/// power iteration in [`compute_r0`].
pub fn compute_r0_direct(
    interval: Interval,
    profile: &CoefficientProfile,
    resolution: usize,
) -> Result<f64> {
    interval.check(resolution)?;
    let grid = Grid::new(interval, profile, resolution);
    let d = profile.d;
    let h = grid.spacing;
    let n = grid.interior.len();
    let t = SignSymmetricTridiag {
        lower: vec![-d / (h * h) - profile.nu / (2.0 * h); n],
        diag: grid.rates.iter().map(|c| 2.0 * d / (h * h) + c.mu1).collect(),
        upper: vec![-d / (h * h) + profile.nu / (2.0 * h); n],
    };
    let (sym, _) = t.symmetrize().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cell Peclet number |nu| h / (2D) = {} >= 1; refine the grid",
            profile.nu.abs() * h / (2.0 * d)
        ))
    })?;
    let weight = grid.recruitment();
    let sigma = sym.smallest_eigenvalue(Some(&weight));
    Ok(1.0 / sigma.sqrt())
}

/// Principal eigenvalue `kappa(lambda)` of the gauged scalar reduction
/// `-D d_xx + nu^2/(4D) + mu1 - r gamma / (mu2 + gamma - lambda)`.
fn reduced_eigenvalue(grid: &Grid, profile: &CoefficientProfile, lambda: f64) -> f64 {
    let op = grid.gauged_operator(profile, |c| c.r * c.gamma / (c.mu2 + c.gamma - lambda));
    op.smallest_eigenvalue(None)
}

/// Principal eigenvalue lambda0 of the linearised system, found as the root
/// of `kappa(lambda) - lambda` by bisection.
pub fn compute_lambda0(
    interval: Interval,
    profile: &CoefficientProfile,
    resolution: usize,
) -> Result<f64> {
    interval.check(resolution)?;
    let grid = Grid::new(interval, profile, resolution);
    let scale = grid
        .rates
        .iter()
        .map(|c| c.r.max(c.gamma).max(c.mu1).max(c.mu2))
        .fold(0.0, f64::max);
    let ceiling = grid
        .rates
        .iter()
        .map(|c| c.mu2 + c.gamma)
        .fold(f64::INFINITY, f64::min);
    let mut lo = -10.0 * scale;
    let mut hi = ceiling - 1e-6;
    let f = |lam: f64| reduced_eigenvalue(&grid, profile, lam) - lam;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
    }
    while hi - lo > LAMBDA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// R0, lambda0 and the eigenfunction pair.
pub fn threshold_report(
    interval: Interval,
    profile: &CoefficientProfile,
    resolution: usize,
) -> Result<ThresholdReport> {
    let sol = compute_r0(interval, profile, resolution)?;
    let lambda0 = compute_lambda0(interval, profile, resolution)?;
    Ok(ThresholdReport {
        interval,
        r0: sol.r0,
        lambda0,
        x: sol.x,
        eigen_m: sol.eigen_m,
        eigen_a: sol.eigen_a,
        resolution,
    })
}

/// Closed form for constant coefficients:
/// `sqrt((r gamma/(mu2+gamma)) / (D (pi/(q-p))^2 + nu^2/(4D) + mu1))`.
pub fn homogeneous_r0(rates: Rates, d: f64, nu: f64, length: f64) -> f64 {
    let pi_l = std::f64::consts::PI / length;
    (rates.recruitment() / (d * pi_l * pi_l + nu * nu / (4.0 * d) + rates.mu1)).sqrt()
}

/// Poincare-type upper bound using extreme rates on the interval, sampled on
/// a fine grid.
pub fn poincare_upper_bound(interval: Interval, profile: &CoefficientProfile) -> f64 {
    let samples = 4096;
    let (mut r_max, mut g_max, mut m2_min, mut g_min, mut m1_min) =
        (0.0_f64, 0.0_f64, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for i in 0..=samples {
        let x = interval.p + interval.length() * i as f64 / samples as f64;
        let c = profile.rates(x);
        r_max = r_max.max(c.r);
        g_max = g_max.max(c.gamma);
        m2_min = m2_min.min(c.mu2);
        g_min = g_min.min(c.gamma);
        m1_min = m1_min.min(c.mu1);
    }
    let pi_l = std::f64::consts::PI / interval.length();
    let d = profile.d;
    let nu = profile.nu;
    (r_max * g_max / (m2_min + g_min) / (d * pi_l * pi_l + nu * nu / (4.0 * d) + m1_min)).sqrt()
}

/// Limit of R0 over ever larger intervals for a homogenised far field:
/// `sqrt((r gamma/(mu2+gamma))_inf / (mu1_inf + nu^2/(4D)))`.
pub fn far_field_limit(profile: &CoefficientProfile) -> f64 {
    let lim = profile.limits();
    (lim.recruitment() / (lim.mu1 + profile.nu * profile.nu / (4.0 * profile.d))).sqrt()
}

/// R0 along a sequence of `(t, g, h)` front records.
pub fn r0f_trace(
    fronts: &[(f64, f64, f64)],
    profile: &CoefficientProfile,
    resolution: usize,
    strategy: Strategy,
) -> Result<Vec<(f64, f64)>> {
    if fronts.is_empty() {
        return Err(Error::InvalidArgument("R0F trace of an empty trajectory".into()));
    }
    parallel::try_map(strategy, fronts, |&(t, g, h)| {
        compute_r0(Interval::new(g, h), profile, resolution).map(|s| (t, s.r0))
    })
}

/// R0 for many intervals at once.
pub fn r0_batch(
    intervals: &[Interval],
    profile: &CoefficientProfile,
    resolution: usize,
    strategy: Strategy,
) -> Result<Vec<f64>> {
    parallel::try_map(strategy, intervals, |&iv| {
        compute_r0(iv, profile, resolution).map(|s| s.r0)
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ProfileSpec;
    use std::f64::consts::PI;

    fn homog(mu1: f64, d: f64, nu: f64) -> CoefficientProfile {
        CoefficientProfile::homogeneous(1.0, 1.0, mu1, 1.0, d, nu, 1.0, 1.0).unwrap()
    }

    fn hetero() -> CoefficientProfile {
        CoefficientProfile::new(
            ProfileSpec::bump(1.0, 0.8, 0.3, 1.0),
            ProfileSpec::bump(1.0, -0.3, -1.0, 2.0),
            ProfileSpec::bump(0.2, 0.1, 0.5, 1.5),
            ProfileSpec::constant(1.0),
            1.0,
            0.2,
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_half_pi_interval() {
        // D (pi / (q - p))^2 = 1, so R0 = sqrt(0.5 / 1.25) = sqrt(0.4).
        let sol = compute_r0(Interval::new(-PI / 2.0, PI / 2.0), &homog(0.25, 1.0, 0.0), 512)
            .unwrap();
        assert!((sol.r0 - 0.4_f64.sqrt()).abs() / 0.4_f64.sqrt() < 1e-4, "{}", sol.r0);
        assert!((0.4_f64.sqrt() - 0.63246).abs() < 1e-5);
    }

    #[test]
    fn eigenpair_is_positive_and_normalised() {
        let sol = compute_r0(Interval::new(-2.0, 3.0), &hetero(), 128).unwrap();
        let n = sol.x.len();
        assert_eq!(sol.eigen_m[0], 0.0);
        assert_eq!(sol.eigen_a[n - 1], 0.0);
        assert!(sol.eigen_m[1..n - 1].iter().all(|&v| v > 0.0));
        assert!(sol.eigen_a[1..n - 1].iter().all(|&v| v > 0.0));
        let norm = max_abs(&sol.eigen_m) + max_abs(&sol.eigen_a);
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn r0_decreases_with_advection() {
        let iv = Interval::new(-3.0, 3.0);
        let a = compute_r0(iv, &hetero().with_nu(0.0), 256).unwrap().r0;
        let b = compute_r0(iv, &hetero().with_nu(0.5), 256).unwrap().r0;
        assert!(b < a);
    }

    #[test]
    fn nested_intervals_increase_r0() {
        let p = hetero();
        let a = compute_r0(Interval::new(-1.0, 1.0), &p, 256).unwrap().r0;
        let b = compute_r0(Interval::new(-2.0, 2.0), &p, 256).unwrap().r0;
        assert!(a <= b);
    }

    #[test]
    fn lambda0_signs() {
        let p = homog(0.25, 1.0, 0.0);
        // Tiny interval: strongly subcritical.
        let small = Interval::symmetric(0.2);
        assert!(compute_r0(small, &p, 128).unwrap().r0 < 0.2);
        assert!(compute_lambda0(small, &p, 128).unwrap() > 0.0);
        // Large interval with a high-risk far field.
        let big = Interval::symmetric(30.0);
        assert!(compute_r0(big, &p, 256).unwrap().r0 > 1.0);
        assert!(compute_lambda0(big, &p, 256).unwrap() < 0.0);
    }

    #[test]
    fn lambda0_vanishes_at_critical_length() {
        // Homogeneous: R0 = 1 exactly when D (pi/L)^2 = recruitment - mu1 - nu^2/(4D);
        // solve for the discrete critical length by bisection on the discrete R0.
        let p = homog(0.25, 1.0, 0.0);
        let n = 256;
        let (mut lo, mut hi) = (1.0, 20.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if compute_r0_direct(Interval::symmetric(mid / 2.0), &p, n).unwrap() < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let len = 0.5 * (lo + hi);
        let iv = Interval::symmetric(len / 2.0);
        let r0 = compute_r0(iv, &p, n).unwrap().r0;
        assert!((r0 - 1.0).abs() < 1e-8, "{r0}");
        let lam = compute_lambda0(iv, &p, n).unwrap();
        assert!(lam.abs() < 1e-6, "{lam}");
    }

    #[test]
    fn gauge_invariance() {
        let iv = Interval::new(-2.5, 4.0);
        let p = hetero();
        let a = compute_r0(iv, &p, 1024).unwrap().r0;
        let b = compute_r0_direct(iv, &p, 1024).unwrap();
        assert!((a - b).abs() / a < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn degenerate_inputs() {
        let p = homog(0.25, 1.0, 0.0);
        assert!(matches!(
            compute_r0(Interval::new(1.0, 1.0), &p, 64),
            Err(Error::DegenerateDomain { .. })
        ));
        assert!(matches!(
            compute_r0(Interval::new(0.0, 1.0), &p, 8),
            Err(Error::InvalidArgument(_))
        ));
        assert!(r0f_trace(&[], &p, 64, Strategy::Sequential).is_err());
    }

    #[test]
    fn trace_of_static_and_growing_fronts() {
        let p = hetero();
        let fixed: Vec<_> = (0..5).map(|i| (i as f64, -1.0, 1.0)).collect();
        let trace = r0f_trace(&fixed, &p, 128, Strategy::Parallel).unwrap();
        assert!(trace.windows(2).all(|w| w[0].1 == w[1].1));
        let first = compute_r0(Interval::new(-1.0, 1.0), &p, 128).unwrap().r0;
        assert_eq!(trace[0].1, first);

        let growing: Vec<_> = (0..5)
            .map(|i| (i as f64, -1.0 - 0.3 * i as f64, 1.0 + 0.2 * i as f64))
            .collect();
        let trace = r0f_trace(&growing, &p, 128, Strategy::Sequential).unwrap();
        assert!(trace.windows(2).all(|w| w[1].1 > w[0].1));
    }
}
