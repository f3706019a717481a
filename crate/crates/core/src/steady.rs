//! Bounded positive stationary solution on the whole line, approached by
//! Dirichlet truncations `[-L, L]`.
//!
//! Eliminating the aquatic stage reduces the stationary system to
//! `-D M'' + nu M' = F(x, M)` with
//! `F(x, M) = gamma A(M) (1 - M/K1) - mu1 M` and `A(M) = r M / (r M/K2 + mu2 + gamma)`.
//! Each truncation is solved by monotone iteration from above (`M = K1`)
//! and from below (a small multiple of the principal eigenfunction); the
//! two limits must agree.

use serde::Serialize;

use crate::coefficients::{CoefficientProfile, Rates};
use crate::error::{Error, Result};
use crate::interp::UniformSamples;
use crate::linalg::{normalize_max, SignSymmetricTridiag, TridiagLu};
use crate::parallel::{self, Strategy};
use crate::threshold::{compute_lambda0, compute_r0, Interval};

/// Successive-iterate tolerance of the monotone sweeps.
pub const SWEEP_TOLERANCE: f64 = 1e-10;
/// Largest accepted gap between the upper and lower limits.
pub const SANDWICH_TOLERANCE: f64 = 1e-6;
/// Consecutive truncations closer than this on the window count as converged.
pub const GLOBAL_TOLERANCE: f64 = 1e-6;
/// Default observation window half-width.
pub const DEFAULT_WINDOW: f64 = 5.0;
const MAX_SWEEPS: usize = 200_000;
const MIN_CELLS: usize = 16;

/// Stationary densities on `[-L, L]`, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySolution {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub x: Vec<f64>,
    #[serde(rename = "M_star")]
    pub m_star: Vec<f64>,
    #[serde(rename = "A_star")]
    pub a_star: Vec<f64>,
    /// Max-norm residual of the discrete stationary equation.
    pub residual: f64,
    /// Max-norm gap between the upper and lower limits.
    pub sandwich_gap: f64,
    pub sweeps: usize,
}

impl StationarySolution {
    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Cubic interpolant of `M_star`; `None` outside `[-L, L]`.
    pub fn m_at(&self, x: f64) -> Option<f64> {
        UniformSamples::new(self.x[0], self.spacing(), &self.m_star).cubic(x)
    }
}

/// Aquatic density balancing winged density `m` at rest:
/// `A = r M / (r M / K2 + mu2 + gamma)`.
pub fn close_a(m: f64, x: f64, profile: &CoefficientProfile) -> f64 {
    closure(m, &profile.rates(x), profile.k2)
}

fn closure(m: f64, c: &Rates, k2: f64) -> f64 {
    let rm = c.r * m;
    if rm == 0.0 {
        return 0.0;
    }
    rm / (rm / k2 + c.mu2 + c.gamma)
}

fn reaction(m: f64, c: &Rates, profile: &CoefficientProfile) -> f64 {
    c.gamma * closure(m, c, profile.k2) * (1.0 - m / profile.k1) - c.mu1 * m
}

/// Reaction per unit winged density, `F(x, u) / u`; strictly decreasing in
/// `u > 0`, which is what makes the positive solution unique.
pub fn reaction_per_density(u: f64, x: f64, profile: &CoefficientProfile) -> f64 {
    let c = profile.rates(x);
    c.gamma * c.r / (c.r * u / profile.k2 + c.mu2 + c.gamma) * (1.0 - u / profile.k1) - c.mu1
}

/// Cell count for half-width `l` at `resolution` cells per unit length,
/// rounded up to an even number.
pub fn cells_for(l: f64, resolution: f64) -> usize {
    let c = (2.0 * l * resolution).round().max(MIN_CELLS as f64) as usize;
    c + c % 2
}

/// Discrete problem on the interior nodes of `[-L, L]`.
struct Discrete<'a> {
    profile: &'a CoefficientProfile,
    dx: f64,
    rates: Vec<Rates>,
    /// Monotonicity shift, bounding `-dF/dM` on `[0, K1]`.
    shift: Vec<f64>,
    lu: TridiagLu,
}

impl<'a> Discrete<'a> {
    fn new(profile: &'a CoefficientProfile, l: f64, cells: usize) -> Result<Self> {
        let dx = 2.0 * l / cells as f64;
        let (d, nu) = (profile.d, profile.nu);
        if nu.abs() * dx / (2.0 * d) >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "cell Peclet number |nu| dx / (2D) = {} >= 1; raise the resolution",
                nu.abs() * dx / (2.0 * d)
            )));
        }
        let rates: Vec<Rates> = (1..cells)
            .map(|i| profile.rates(-l + i as f64 * dx))
            .collect();
        let shift: Vec<f64> = rates
            .iter()
            .map(|c| c.gamma * profile.k2 / profile.k1 + c.mu1)
            .collect();
        let n = cells - 1;
        let off = d / (dx * dx);
        let lower = vec![-off - nu / (2.0 * dx); n];
        let upper = vec![-off + nu / (2.0 * dx); n];
        let diag: Vec<f64> = shift.iter().map(|k| 2.0 * off + k).collect();
        Ok(Self {
            profile,
            dx,
            rates,
            shift,
            lu: TridiagLu::new(&lower, &diag, &upper),
        })
    }

    /// `-D M'' + nu M'` at interior node `i` (zero Dirichlet data).
    fn transport(&self, m: &[f64], i: usize) -> f64 {
        let left = if i == 0 { 0.0 } else { m[i - 1] };
        let right = m.get(i + 1).copied().unwrap_or(0.0);
        let (d, nu, dx) = (self.profile.d, self.profile.nu, self.dx);
        -d * (left - 2.0 * m[i] + right) / (dx * dx) + nu * (right - left) / (2.0 * dx)
    }

    fn residual(&self, m: &[f64]) -> f64 {
        (0..m.len())
            .map(|i| (self.transport(m, i) - reaction(m[i], &self.rates[i], self.profile)).abs())
            .fold(0.0, f64::max)
    }

    /// One monotone sweep: `(L + k) M_new = F(M_old) + k M_old`.
    fn sweep(&self, m: &[f64]) -> Vec<f64> {
        let mut rhs: Vec<f64> = m
            .iter()
            .zip(&self.rates)
            .zip(&self.shift)
            .map(|((&mi, c), k)| reaction(mi, c, self.profile) + k * mi)
            .collect();
        self.lu.solve_in_place(&mut rhs);
        rhs
    }

    fn iterate(&self, mut m: Vec<f64>) -> Result<(Vec<f64>, usize)> {
        let mut change = f64::INFINITY;
        for k in 1..=MAX_SWEEPS {
            let next = self.sweep(&m);
            change = next
                .iter()
                .zip(&m)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            m = next;
            if change < SWEEP_TOLERANCE {
                return Ok((m, k));
            }
        }
        Err(Error::EigenNoConvergence {
            iterations: MAX_SWEEPS,
            last_change: change,
        })
    }

    /// Principal eigenpair of the linearisation at zero,
    /// `-D phi'' + nu phi' - F_M(x, 0) phi = sigma phi`, with `phi > 0`.
    fn linearised_eigenpair(&self) -> Option<(f64, Vec<f64>)> {
        let n = self.rates.len();
        let (d, nu, dx) = (self.profile.d, self.profile.nu, self.dx);
        let off = d / (dx * dx);
        let t = SignSymmetricTridiag {
            lower: vec![-off - nu / (2.0 * dx); n],
            diag: self
                .rates
                .iter()
                .map(|c| 2.0 * off + c.mu1 - c.recruitment())
                .collect(),
            upper: vec![-off + nu / (2.0 * dx); n],
        };
        let (sym, scaling) = t.symmetrize()?;
        let sigma = sym.smallest_eigenvalue(None);
        let v = sym.eigenvector(sigma, None);
        // Undo the similarity: phi_i = s_i v_i.
        let mut phi: Vec<f64> = v.iter().zip(&scaling).map(|(vi, si)| vi * si).collect();
        if phi.iter().sum::<f64>() < 0.0 {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        normalize_max(&mut phi);
        Some((sigma, phi))
    }

    fn is_lower_solution(&self, m: &[f64]) -> bool {
        (0..m.len()).all(|i| {
            let lhs = self.transport(m, i);
            let rhs = reaction(m[i], &self.rates[i], self.profile);
            lhs <= rhs + 1e-14 * rhs.abs().max(1e-300)
        })
    }
}

/// Positive stationary solution on `[-L, L]` with Dirichlet data, at
/// `resolution` cells per unit length.
pub fn solve_truncated(
    half_width: f64,
    profile: &CoefficientProfile,
    resolution: f64,
) -> Result<StationarySolution> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::DegenerateDomain {
            g: -half_width,
            h: half_width,
        });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "steady resolution must be positive, got {resolution}"
        )));
    }
    let cells = cells_for(half_width, resolution);
    let interval = Interval::symmetric(half_width);
    let r0 = compute_r0(interval, profile, cells)?.r0;
    if r0 <= 1.0 {
        return Err(Error::SubcriticalDomain { half_width, r0 });
    }
    let disc = Discrete::new(profile, half_width, cells)?;
    let (sigma, phi) = disc
        .linearised_eigenpair()
        .ok_or_else(|| Error::InvalidArgument("linearised operator is not sign-symmetric".into()))?;
    if sigma >= 0.0 {
        // Discretely critical even though R0 > 1: no positive lower solution.
        return Err(Error::SubcriticalDomain { half_width, r0 });
    }

    let lambda0 = compute_lambda0(interval, profile, cells)?;
    let k = profile.k1.min(profile.k2);
    let r_max = disc.rates.iter().map(|c| c.r).fold(0.0, f64::max);
    let mut delta = (lambda0.abs() * k / (2.0 * r_max)).min(0.1);
    let mut lower: Vec<f64> = phi.iter().map(|p| delta * p).collect();
    let mut halvings = 0;
    while !disc.is_lower_solution(&lower) {
        halvings += 1;
        if halvings > 80 {
            return Err(Error::SubcriticalDomain { half_width, r0 });
        }
        delta *= 0.5;
        lower = phi.iter().map(|p| delta * p).collect();
    }

    let upper = vec![profile.k1; cells - 1];
    let (up, up_sweeps) = disc.iterate(upper)?;
    let (low, low_sweeps) = disc.iterate(lower)?;
    let gap = up
        .iter()
        .zip(&low)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > SANDWICH_TOLERANCE {
        return Err(Error::UniquenessGapWarning {
            gap,
            tolerance: SANDWICH_TOLERANCE,
        });
    }
    let interior: Vec<f64> = up.iter().zip(&low).map(|(a, b)| 0.5 * (a + b)).collect();
    let residual = disc.residual(&interior);

    let dx = disc.dx;
    let x: Vec<f64> = (0..=cells).map(|i| -half_width + i as f64 * dx).collect();
    let mut m_star = Vec::with_capacity(cells + 1);
    m_star.push(0.0);
    m_star.extend_from_slice(&interior);
    m_star.push(0.0);
    let a_star = x
        .iter()
        .zip(&m_star)
        .map(|(&xi, &mi)| close_a(mi, xi, profile))
        .collect();
    Ok(StationarySolution {
        half_width,
        x,
        m_star,
        a_star,
        residual,
        sandwich_gap: gap,
        sweeps: up_sweeps.max(low_sweeps),
    })
}

/// One row of the truncation convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Max difference to the previous truncation on the window; `None` for
    /// the first row.
    pub sup_diff: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalSolution {
    pub solution: StationarySolution,
    pub table: Vec<ConvergenceRow>,
    pub window: f64,
    pub converged: bool,
    /// Largest amount by which a shorter truncation exceeds a longer one on
    /// the shorter domain (should be at round-off level).
    pub monotonicity_violation: f64,
}

/// Truncations `L0 2^k`, `k = 0..=4`, with `L0` the smallest power of two
/// whose interval has `R0 > 1.05`.
pub fn default_l_sequence(profile: &CoefficientProfile, resolution: f64) -> Result<Vec<f64>> {
    let mut l0 = 1.0 / 64.0;
    loop {
        let cells = cells_for(l0, resolution);
        if compute_r0(Interval::symmetric(l0), profile, cells)?.r0 > 1.05 {
            break;
        }
        l0 *= 2.0;
        if l0 > 1e4 {
            return Err(Error::SubcriticalDomain {
                half_width: l0,
                r0: compute_r0(Interval::symmetric(l0), profile, cells)?.r0,
            });
        }
    }
    Ok((0..=4).map(|k| l0 * f64::from(1u32 << k)).collect())
}

/// Solves every truncation in `l_sequence` and compares consecutive ones on
/// `[-window, window]` (clipped to the shorter domain).
pub fn solve_global(
    profile: &CoefficientProfile,
    resolution: f64,
    l_sequence: &[f64],
    window: f64,
    strategy: Strategy,
) -> Result<GlobalSolution> {
    if l_sequence.is_empty() {
        return Err(Error::InvalidArgument("empty truncation sequence".into()));
    }
    if l_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "truncation half-widths must increase strictly, got {l_sequence:?}"
        )));
    }
    let solutions = parallel::try_map(strategy, l_sequence, |&l| solve_truncated(l, profile, resolution))?;
    Ok(assemble(solutions, window))
}

/// Doublings appended by [`solve_global_auto`] after the default sequence.
pub const MAX_EXTENSIONS: usize = 4;

/// Default sequence, then doubles the largest truncation until consecutive
/// solutions agree on the window or [`MAX_EXTENSIONS`] is spent.
pub fn solve_global_auto(
    profile: &CoefficientProfile,
    resolution: f64,
    window: f64,
    strategy: Strategy,
) -> Result<GlobalSolution> {
    let seq = default_l_sequence(profile, resolution)?;
    let mut solutions = parallel::try_map(strategy, &seq, |&l| solve_truncated(l, profile, resolution))?;
    for _ in 0..MAX_EXTENSIONS {
        let (last, prev) = (&solutions[solutions.len() - 1], &solutions[solutions.len() - 2]);
        if window_diff(last, prev, window) < GLOBAL_TOLERANCE {
            break;
        }
        let l = 2.0 * last.half_width;
        solutions.push(solve_truncated(l, profile, resolution)?);
    }
    Ok(assemble(solutions, window))
}

fn window_diff(sol: &StationarySolution, prev: &StationarySolution, window: f64) -> f64 {
    let w = window.min(prev.half_width);
    let samples = 1000;
    (0..=samples)
        .map(|j| {
            let x = -w + 2.0 * w * j as f64 / samples as f64;
            (sol.m_at(x).unwrap_or(0.0) - prev.m_at(x).unwrap_or(0.0)).abs()
        })
        .fold(0.0, f64::max)
}

fn assemble(solutions: Vec<StationarySolution>, window: f64) -> GlobalSolution {
    let mut table = Vec::with_capacity(solutions.len());
    let mut violation: f64 = 0.0;
    for (k, sol) in solutions.iter().enumerate() {
        let sup_diff = (k > 0).then(|| window_diff(sol, &solutions[k - 1], window));
        if k > 0 {
            let prev = &solutions[k - 1];
            for (&x, &m) in prev.x.iter().zip(&prev.m_star) {
                violation = violation.max(m - sol.m_at(x).unwrap_or(0.0));
            }
        }
        table.push(ConvergenceRow {
            half_width: sol.half_width,
            sup_diff,
            residual: sol.residual,
        });
    }
    let converged = match table.last().and_then(|r| r.sup_diff) {
        Some(d) => d < GLOBAL_TOLERANCE,
        None => false,
    };
    GlobalSolution {
        solution: solutions.into_iter().last().expect("non-empty"),
        table,
        window,
        converged,
        monotonicity_violation: violation,
    }
}
