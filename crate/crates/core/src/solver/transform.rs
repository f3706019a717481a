//! Front-fixing change of variables
//! `y = 2 h0 x / (h - g) - h0 (h + g) / (h - g)`, which maps the moving
//! habitat `[g, h]` onto the fixed interval `[-h0, h0]`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Computational coordinate of the physical point `x`.
pub fn to_computational(x: f64, g: f64, h: f64, h0: f64) -> f64 {
    2.0 * h0 * x / (h - g) - h0 * (h + g) / (h - g)
}

/// Physical point of the computational coordinate `y`.
pub fn to_physical(y: f64, g: f64, h: f64, h0: f64) -> f64 {
    0.5 * (h + g) + y * (h - g) / (2.0 * h0)
}

/// Transport coefficient multiplying `w_y` in the fixed frame:
/// moving-frame drift `y (h' - g')/(h - g) + h0 (h' + g')/(h - g)` minus
/// the advection `2 nu h0 / (h - g)`.
#[inline]
pub fn advection_coefficient(y: f64, g: f64, h: f64, g_rate: f64, h_rate: f64, h0: f64, nu: f64) -> f64 {
    frame_drift(y, g, h, g_rate, h_rate, h0) - 2.0 * nu * h0 / (h - g)
}

/// Moving-frame part of the transport coefficient only.
#[inline]
pub fn frame_drift(y: f64, g: f64, h: f64, g_rate: f64, h_rate: f64, h0: f64) -> f64 {
    let w = h - g;
    y * (h_rate - g_rate) / w + h0 * (h_rate + g_rate) / w
}

/// Diffusion coefficient `4 h0^2 D / (h - g)^2` in the fixed frame.
#[inline]
pub fn diffusion_coefficient(g: f64, h: f64, h0: f64, d: f64) -> f64 {
    let w = h - g;
    4.0 * h0 * h0 * d / (w * w)
}

/// The transformed problem's coefficients sampled at the computational nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedFrame {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub advection: Vec<f64>,
    pub diffusion: f64,
}

/// Coefficients of the fixed-interval problem for fronts `g < h` moving at
/// `g_rate`, `h_rate`, on `n + 1` computational nodes.
#[allow(clippy::too_many_arguments)]
pub fn transform_to_fixed(
    g: f64,
    h: f64,
    g_rate: f64,
    h_rate: f64,
    h0: f64,
    n: usize,
    d: f64,
    nu: f64,
) -> Result<FixedFrame> {
    if !(h > g) {
        return Err(Error::DegenerateDomain { g, h });
    }
    let y: Vec<f64> = (0..=n).map(|i| -h0 + 2.0 * h0 * i as f64 / n as f64).collect();
    let x = y.iter().map(|&yi| to_physical(yi, g, h, h0)).collect();
    let advection = y
        .iter()
        .map(|&yi| advection_coefficient(yi, g, h, g_rate, h_rate, h0, nu))
        .collect();
    Ok(FixedFrame {
        y,
        x,
        advection,
        diffusion: diffusion_coefficient(g, h, h0, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_start_with_static_fronts() {
        let h0 = 1.5;
        let f = transform_to_fixed(-h0, h0, 0.0, 0.0, h0, 8, 0.7, 0.3).unwrap();
        for (y, x) in f.y.iter().zip(&f.x) {
            assert!((y - x).abs() < 1e-15);
        }
        assert!(f.advection.iter().all(|&a| (a + 0.3).abs() < 1e-15));
        assert!((f.diffusion - 0.7).abs() < 1e-15);
    }

    #[test]
    fn doubled_domain_quarter_diffusion() {
        let h0 = 2.0;
        assert!((diffusion_coefficient(-2.0 * h0, 2.0 * h0, h0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn right_front_maps_to_right_end() {
        for g in [-10.0, -3.0, 0.5] {
            assert!((to_computational(2.0, g, 2.0, 1.3) - 1.3).abs() < 1e-14);
            assert!((to_computational(g, g, 2.0, 1.3) + 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn maps_invert_each_other() {
        let (g, h, h0) = (-3.2, 5.1, 1.0);
        for k in 0..=10 {
            let x = g + (h - g) * k as f64 / 10.0;
            let back = to_physical(to_computational(x, g, h, h0), g, h, h0);
            assert!((back - x).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_domain() {
        assert!(matches!(
            transform_to_fixed(1.0, 1.0, 0.0, 0.0, 1.0, 8, 1.0, 0.0),
            Err(Error::DegenerateDomain { .. })
        ));
    }
}
