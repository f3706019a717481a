//! Heterogeneous environment: spatial rate profiles, their far-field limits,
//! and the standing checks on those limits (high-risk far field, small
//! advection).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default radius beyond which every rate must sit at its far-field limit.
pub const DEFAULT_HOMOGENIZATION_RADIUS: f64 = 50.0;
/// Default tolerance for the far-field comparison.
pub const DEFAULT_FAR_FIELD_TOLERANCE: f64 = 1e-6;

/// A concrete family for one spatially varying rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// `left` for `x < at`, `right` for `x >= at`.
    Step {
        left: f64,
        right: f64,
        at: f64,
    },
    /// `base + amplitude * exp(-((x - center) / width)^2)`.
    Bump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Piecewise-linear through `points`, equal to `limit` outside them.
    Tabulated {
        points: Vec<(f64, f64)>,
        limit: f64,
    },
}

impl ProfileSpec {
    pub fn constant(value: f64) -> Self {
        ProfileSpec::Constant { value }
    }

    pub fn bump(base: f64, amplitude: f64, center: f64, width: f64) -> Self {
        ProfileSpec::Bump {
            base,
            amplitude,
            center,
            width,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProfileSpec::Constant { .. } => "constant",
            ProfileSpec::Step { .. } => "step",
            ProfileSpec::Bump { .. } => "bump",
            ProfileSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Checks that every evaluation will be finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        let pos = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidProfile(format!(
                    "{name} must be finite and positive, got {v}"
                )))
            }
        };
        match self {
            ProfileSpec::Constant { value } => pos("value", *value),
            ProfileSpec::Step { left, right, at } => {
                pos("left", *left)?;
                pos("right", *right)?;
                if !at.is_finite() {
                    return bad(format!("step location must be finite, got {at}"));
                }
                Ok(())
            }
            ProfileSpec::Bump {
                base,
                amplitude,
                center,
                width,
            } => {
                pos("base", *base)?;
                pos("width", *width)?;
                if !amplitude.is_finite() || !center.is_finite() {
                    return bad("bump amplitude and center must be finite".into());
                }
                if base + amplitude.min(0.0) <= 0.0 {
                    return bad(format!(
                        "bump dips to {} which is not positive",
                        base + amplitude
                    ));
                }
                Ok(())
            }
            ProfileSpec::Tabulated { points, limit } => {
                pos("limit", *limit)?;
                if points.is_empty() {
                    return bad("tabulated profile needs at least one point".into());
                }
                for (i, &(x, v)) in points.iter().enumerate() {
                    if !x.is_finite() {
                        return bad(format!("table abscissa {i} is not finite"));
                    }
                    pos(&format!("table value {i}"), v)?;
                    if i > 0 && x <= points[i - 1].0 {
                        return bad(format!("table abscissae must increase strictly (row {i})"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Pointwise value without validation of the result.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Step { left, right, at } => {
                if x < *at {
                    *left
                } else {
                    *right
                }
            }
            ProfileSpec::Bump {
                base,
                amplitude,
                center,
                width,
            } => {
                let z = (x - center) / width;
                base + amplitude * (-z * z).exp()
            }
            ProfileSpec::Tabulated { points, limit } => {
                let first = points[0].0;
                let last = points[points.len() - 1].0;
                if x < first || x > last || x.is_nan() {
                    return if x.is_nan() { f64::NAN } else { *limit };
                }
                let k = points.partition_point(|p| p.0 <= x);
                if k == points.len() {
                    return points[k - 1].1;
                }
                let (x0, v0) = points[k - 1];
                let (x1, v1) = points[k];
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Limits as `x -> -inf` and `x -> +inf`.
    pub fn far_field(&self) -> (f64, f64) {
        match self {
            ProfileSpec::Constant { value } => (*value, *value),
            ProfileSpec::Step { left, right, .. } => (*left, *right),
            ProfileSpec::Bump { base, .. } => (*base, *base),
            ProfileSpec::Tabulated { limit, .. } => (*limit, *limit),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Step { left, right, .. } => left.min(*right),
            ProfileSpec::Bump {
                base, amplitude, ..
            } => base + amplitude.min(0.0),
            ProfileSpec::Tabulated { points, limit } => {
                points.iter().map(|p| p.1).fold(*limit, f64::min)
            }
        }
    }
}

/// Evaluates a profile, rejecting non-finite results.
pub fn evaluate_profile(spec: &ProfileSpec, x: f64) -> Result<f64> {
    let v = spec.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidProfile(format!(
            "{} profile evaluates to {v} at x = {x}",
            spec.kind()
        )))
    }
}

/// Reads a two-column `(x, value)` table; `#` starts a comment, columns may be
/// separated by whitespace or commas.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text)
        .map_err(|m| Error::InvalidProfile(format!("{}: {m}", path.display())))
}

pub fn parse_table(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    Ok(parse_columns(text, 2)?
        .into_iter()
        .map(|row| (row[0], row[1]))
        .collect())
}

/// Rows of exactly `width` numbers; `#` comments, whitespace or comma separators.
pub fn parse_columns(text: &str, width: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != width {
            return Err(format!(
                "line {}: expected {width} columns, found {}",
                lineno + 1,
                cols.len()
            ));
        }
        let row = cols
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| format!("line {}: `{s}`: {e}", lineno + 1))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Rates at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub r: f64,
    pub gamma: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Rates {
    /// `r gamma / (mu2 + gamma)`: net winged recruitment per winged adult.
    #[inline]
    pub fn recruitment(&self) -> f64 {
        self.r * self.gamma / (self.mu2 + self.gamma)
    }
}

/// The model environment. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    pub r: ProfileSpec,
    pub gamma: ProfileSpec,
    pub mu1: ProfileSpec,
    pub mu2: ProfileSpec,
    #[serde(rename = "D")]
    pub d: f64,
    pub nu: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub homogenization_radius: f64,
    pub far_field_tolerance: f64,
}

impl CoefficientProfile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: ProfileSpec,
        gamma: ProfileSpec,
        mu1: ProfileSpec,
        mu2: ProfileSpec,
        d: f64,
        nu: f64,
        k1: f64,
        k2: f64,
    ) -> Result<Self> {
        let p = Self {
            r,
            gamma,
            mu1,
            mu2,
            d,
            nu,
            k1,
            k2,
            homogenization_radius: DEFAULT_HOMOGENIZATION_RADIUS,
            far_field_tolerance: DEFAULT_FAR_FIELD_TOLERANCE,
        };
        p.validate()?;
        Ok(p)
    }

    /// Constant rates everywhere.
    #[allow(clippy::too_many_arguments)]
    pub fn homogeneous(
        r: f64,
        gamma: f64,
        mu1: f64,
        mu2: f64,
        d: f64,
        nu: f64,
        k1: f64,
        k2: f64,
    ) -> Result<Self> {
        Self::new(
            ProfileSpec::constant(r),
            ProfileSpec::constant(gamma),
            ProfileSpec::constant(mu1),
            ProfileSpec::constant(mu2),
            d,
            nu,
            k1,
            k2,
        )
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu, ..self.clone() }
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..self.clone() }
    }

    pub fn specs(&self) -> [(&'static str, &ProfileSpec); 4] {
        [
            ("r", &self.r),
            ("gamma", &self.gamma),
            ("mu1", &self.mu1),
            ("mu2", &self.mu2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, spec) in self.specs() {
            spec.validate()
                .map_err(|e| Error::InvalidProfile(format!("{name}: {e}")))?;
            let (left, right) = spec.far_field();
            if left != right {
                return Err(Error::AsymmetricFarField {
                    name: name.to_string(),
                    left,
                    right,
                });
            }
        }
        let positive = [
            ("D", self.d),
            ("K1", self.k1),
            ("K2", self.k2),
            ("homogenization_radius", self.homogenization_radius),
            ("far_field_tolerance", self.far_field_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.nu.is_finite() {
            return Err(Error::InvalidProfile("nu must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn rates(&self, x: f64) -> Rates {
        Rates {
            r: self.r.value(x),
            gamma: self.gamma.value(x),
            mu1: self.mu1.value(x),
            mu2: self.mu2.value(x),
        }
    }

    /// Declared limits at infinity (equal at both ends by construction).
    pub fn limits(&self) -> Rates {
        Rates {
            r: self.r.far_field().1,
            gamma: self.gamma.far_field().1,
            mu1: self.mu1.far_field().1,
            mu2: self.mu2.far_field().1,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.specs()
            .iter()
            .all(|(_, s)| matches!(s, ProfileSpec::Constant { .. }))
    }
}

/// Outcome of the high-risk far-field check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionVerdict {
    /// `r_inf gamma_inf / (mu2_inf + gamma_inf) - mu1_inf`.
    pub margin: f64,
    pub pass: bool,
    /// Worst absolute deviation between sampled far-field values and the
    /// declared limits beyond the homogenization radius.
    pub max_far_field_deviation: f64,
    pub far_field_match: bool,
}

/// High-risk far-field check plus a sampled check that the profiles have
/// actually homogenised beyond the configured radius.
pub fn check_assumption_h(profile: &CoefficientProfile, tolerance: f64) -> AssumptionVerdict {
    let lim = profile.limits();
    let margin = lim.recruitment() - lim.mu1;
    let radius = profile.homogenization_radius;
    let mut worst = 0.0_f64;
    for k in 0..=32 {
        let x = radius * (1.0 + k as f64 / 8.0);
        for (_, spec) in profile.specs() {
            let (left, right) = spec.far_field();
            worst = worst
                .max((spec.value(-x) - left).abs())
                .max((spec.value(x) - right).abs());
        }
    }
    AssumptionVerdict {
        margin,
        pass: margin > 0.0,
        max_far_field_deviation: worst,
        far_field_match: worst <= tolerance,
    }
}

/// Outcome of the small-advection check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvectionVerdict {
    /// `2 D sqrt((r gamma - mu1 (mu2 + gamma)) / (mu2 + gamma))` at infinity;
    /// NaN when the far field is not high-risk.
    pub bound: f64,
    pub nu_abs: f64,
    pub pass: bool,
}

pub fn check_small_advection(profile: &CoefficientProfile) -> AdvectionVerdict {
    let lim = profile.limits();
    let sum = lim.mu2 + lim.gamma;
    let numer = lim.r * lim.gamma - lim.mu1 * sum;
    let bound = if numer > 0.0 {
        2.0 * profile.d * (numer / sum).sqrt()
    } else {
        f64::NAN
    };
    let nu_abs = profile.nu.abs();
    AdvectionVerdict {
        bound,
        nu_abs,
        pass: bound.is_finite() && nu_abs < bound,
    }
}
