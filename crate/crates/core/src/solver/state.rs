use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::error::{Error, Result};

/// Smallest accepted grid.
pub const MIN_NODES: usize = 16;

/// Relative slack allowed on the discrete bounds `0 <= M <= K1`, `0 <= A <= K2`.
pub const BOUND_TOLERANCE: f64 = 1e-10;

/// One snapshot of the free-boundary solution. Densities live on `N + 1`
/// uniform nodes of the computational interval `[-h0, h0]`; node `i` sits at
/// the physical point `g + i (h - g) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub h0: f64,
    pub m: Vec<f64>,
    pub a: Vec<f64>,
}

impl SimulationState {
    pub fn nodes(&self) -> usize {
        self.m.len() - 1
    }

    pub fn width(&self) -> f64 {
        self.h - self.g
    }

    /// Physical cell size.
    pub fn cell(&self) -> f64 {
        self.width() / self.nodes() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.g + i as f64 * self.cell()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nodes()).map(|i| self.x(i)).collect()
    }

    /// Computational coordinate of node `i`.
    pub fn y(&self, i: usize) -> f64 {
        -self.h0 + 2.0 * self.h0 * i as f64 / self.nodes() as f64
    }

    pub fn sup_m(&self) -> f64 {
        self.m.iter().cloned().fold(0.0, f64::max)
    }

    pub fn sup_a(&self) -> f64 {
        self.a.iter().cloned().fold(0.0, f64::max)
    }
}

/// Shape of the initial densities on `[-h0, h0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialShape {
    /// `M0 = a cos(pi x / (2 h0))`, `A0 = b cos(pi x / (2 h0))`.
    Cosine { a: f64, b: f64 },
    /// Piecewise-linear rows `(x, M0, A0)` spanning exactly `[-h0, h0]`.
    Table { rows: Vec<(f64, f64, f64)> },
}

/// Initial densities and the initial half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub h0: f64,
    pub shape: InitialShape,
}

impl InitialData {
    pub fn cosine(h0: f64, a: f64, b: f64) -> Self {
        Self {
            h0,
            shape: InitialShape::Cosine { a, b },
        }
    }

    /// Same shape with both densities multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            InitialShape::Cosine { a, b } => InitialShape::Cosine {
                a: a * factor,
                b: b * factor,
            },
            InitialShape::Table { rows } => InitialShape::Table {
                rows: rows
                    .iter()
                    .map(|&(x, m, a)| (x, m * factor, a * factor))
                    .collect(),
            },
        };
        Self { h0: self.h0, shape }
    }

    /// `(M0(x), A0(x))`; zero outside `[-h0, h0]`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x.abs() > self.h0 {
            return (0.0, 0.0);
        }
        match &self.shape {
            InitialShape::Cosine { a, b } => {
                let c = (std::f64::consts::FRAC_PI_2 * x / self.h0).cos().max(0.0);
                (a * c, b * c)
            }
            InitialShape::Table { rows } => {
                let k = rows.partition_point(|r| r.0 <= x).clamp(1, rows.len() - 1);
                let (x0, m0, a0) = rows[k - 1];
                let (x1, m1, a1) = rows[k];
                let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                (m0 + (m1 - m0) * t, a0 + (a1 - a0) * t)
            }
        }
    }

    /// Samples onto `n + 1` nodes with exact zeros at both ends.
    pub fn sample(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut m = vec![0.0; n + 1];
        let mut a = vec![0.0; n + 1];
        for i in 1..n {
            let x = -self.h0 + 2.0 * self.h0 * i as f64 / n as f64;
            let (mi, ai) = self.eval(x);
            m[i] = mi;
            a[i] = ai;
        }
        (m, a)
    }

    /// Max of `|M0|` plus max of `|M0'|`, estimated on a fine grid.
    pub fn m0_c1_norm(&self) -> f64 {
        let n = 4096;
        let (m, _) = self.sample(n);
        let dx = 2.0 * self.h0 / n as f64;
        let sup = m.iter().cloned().fold(0.0, f64::max);
        let slope = m
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dx).abs())
            .fold(0.0, f64::max);
        sup + slope
    }

    /// Zero at `+-h0`, strictly inside `(0, K)` in between.
    pub fn validate(&self, profile: &CoefficientProfile) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInitialData(m));
        if !(self.h0.is_finite() && self.h0 > 0.0) {
            return bad(format!("h0 must be positive, got {}", self.h0));
        }
        match &self.shape {
            InitialShape::Cosine { a, b } => {
                if !(*a > 0.0 && *a < profile.k1) {
                    return bad(format!("winged amplitude {a} must lie in (0, K1 = {})", profile.k1));
                }
                if !(*b > 0.0 && *b < profile.k2) {
                    return bad(format!("aquatic amplitude {b} must lie in (0, K2 = {})", profile.k2));
                }
            }
            InitialShape::Table { rows } => {
                if rows.len() < 3 {
                    return bad("initial table needs at least three rows".into());
                }
                let (first, last) = (rows[0], rows[rows.len() - 1]);
                let tol = 1e-12 * self.h0;
                if (first.0 + self.h0).abs() > tol || (last.0 - self.h0).abs() > tol {
                    return bad(format!(
                        "initial table must span [-h0, h0] = [{}, {}]",
                        -self.h0, self.h0
                    ));
                }
                if first.1 != 0.0 || first.2 != 0.0 || last.1 != 0.0 || last.2 != 0.0 {
                    return bad("initial densities must vanish at +-h0".into());
                }
                for (i, w) in rows.windows(2).enumerate() {
                    if w[1].0 <= w[0].0 {
                        return bad(format!("initial table abscissae must increase (row {})", i + 1));
                    }
                }
                for (i, &(x, m, a)) in rows[1..rows.len() - 1].iter().enumerate() {
                    if !(m > 0.0 && m < profile.k1) || !(a > 0.0 && a < profile.k2) {
                        return bad(format!(
                            "row {} (x = {x}): need 0 < M0 < K1 and 0 < A0 < K2, got ({m}, {a})",
                            i + 1
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Time-step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DtPolicy {
    Fixed { dt: f64 },
    /// `dt = factor * dy^2` with `dy = 2 h0 / N`.
    Cfl { factor: f64 },
}

/// Order of the one-sided derivative in the Stefan condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum StencilOrder {
    First,
    Second,
}

impl From<StencilOrder> for u8 {
    fn from(s: StencilOrder) -> u8 {
        match s {
            StencilOrder::First => 1,
            StencilOrder::Second => 2,
        }
    }
}

impl TryFrom<u8> for StencilOrder {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(StencilOrder::First),
            2 => Ok(StencilOrder::Second),
            other => Err(format!("boundary stencil order must be 1 or 2, got {other}")),
        }
    }
}

/// Every numerical knob of the time integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of cells; nodes are `n + 1`.
    pub n: usize,
    pub dt: DtPolicy,
    /// Expansion capability in the Stefan conditions.
    pub mu: f64,
    pub horizon: f64,
    pub output_interval: f64,
    pub boundary_stencil_order: StencilOrder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 256,
            dt: DtPolicy::Fixed { dt: 0.005 },
            mu: 1.0,
            horizon: 10.0,
            output_interval: 0.5,
            boundary_stencil_order: StencilOrder::Second,
        }
    }
}

impl SolverConfig {
    pub fn time_step(&self, h0: f64) -> f64 {
        match self.dt {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Cfl { factor } => {
                let dy = 2.0 * h0 / self.n as f64;
                factor * dy * dy
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSolverConfig(m));
        if self.n < MIN_NODES || !self.n.is_multiple_of(2) {
            return bad(format!("n must be an even integer >= {MIN_NODES}, got {}", self.n));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt.is_finite() && dt > 0.0) => {
                return bad(format!("time step must be positive, got {dt}"))
            }
            DtPolicy::Cfl { factor } if !(factor.is_finite() && factor > 0.0) => {
                return bad(format!("CFL factor must be positive, got {factor}"))
            }
            _ => {}
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return bad(format!("horizon must be non-negative, got {}", self.horizon));
        }
        if !(self.output_interval.is_finite() && self.output_interval > 0.0) {
            return bad(format!(
                "output interval must be positive, got {}",
                self.output_interval
            ));
        }
        Ok(())
    }
}
