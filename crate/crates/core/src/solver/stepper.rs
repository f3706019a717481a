//! One time step of the front-fixed system.
//!
//! Order inside a step:
//! 1. fronts move by the Stefan condition evaluated on the old winged field;
//! 2. the winged field is advanced with implicit diffusion and implicit
//!    upwind transport, the reaction taken explicitly;
//! 3. the aquatic field is integrated exactly along its local linear ODE with
//!    the winged density frozen, then carried to the new physical node
//!    positions (it does not move in physical space);
//! 4. endpoints are reset to zero and the discrete bounds are checked.

use crate::coefficients::CoefficientProfile;
use crate::error::{Error, Result};
use crate::interp::UniformSamples;
use crate::linalg::TridiagLu;

use super::state::{SimulationState, SolverConfig, StencilOrder, BOUND_TOLERANCE};
use super::transform::{advection_coefficient, diffusion_coefficient};

/// Front velocities computed at the start of the most recent step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrontRates {
    pub g_rate: f64,
    pub h_rate: f64,
}

/// `(dM/dy at y = -h0, dM/dy at y = h0)` from one-sided differences.
pub fn boundary_slopes(m: &[f64], dy: f64, order: StencilOrder) -> (f64, f64) {
    let n = m.len() - 1;
    match order {
        StencilOrder::First => ((m[1] - m[0]) / dy, (m[n] - m[n - 1]) / dy),
        StencilOrder::Second => (
            (-3.0 * m[0] + 4.0 * m[1] - m[2]) / (2.0 * dy),
            (3.0 * m[n] - 4.0 * m[n - 1] + m[n - 2]) / (2.0 * dy),
        ),
    }
}

/// Stefan velocities `g' = -mu M_x(g)`, `h' = -mu M_x(h)`, with the
/// computational slope scaled by `2 h0 / (h - g)`. Clipped so the fronts
/// never retreat.
pub fn front_rates(state: &SimulationState, mu: f64, order: StencilOrder) -> FrontRates {
    let n = state.nodes();
    let dy = 2.0 * state.h0 / n as f64;
    let scale = 2.0 * state.h0 / state.width();
    let (left, right) = boundary_slopes(&state.m, dy, order);
    FrontRates {
        g_rate: (-mu * scale * left).min(0.0),
        h_rate: (-mu * scale * right).max(0.0),
    }
}

/// Exact solution after `dt` of `A' = r (1 - A/K2) M - (mu2 + gamma) A`
/// with `M` held fixed.
#[inline]
pub fn aquatic_update(a: f64, m: f64, r: f64, decay: f64, k2: f64, dt: f64) -> f64 {
    let rate = r * m / k2 + decay;
    if rate == 0.0 {
        return a;
    }
    let eq = r * m / rate;
    eq + (a - eq) * (-rate * dt).exp()
}

/// Advances `state` by `dt`.
pub fn step(
    state: &SimulationState,
    profile: &CoefficientProfile,
    config: &SolverConfig,
    dt: f64,
) -> Result<(SimulationState, FrontRates)> {
    let n = state.nodes();
    let h0 = state.h0;
    let dy = 2.0 * h0 / n as f64;
    if !(state.h > state.g) {
        return Err(Error::DegenerateDomain {
            g: state.g,
            h: state.h,
        });
    }

    let rates = front_rates(state, config.mu, config.boundary_stencil_order);
    let g_new = state.g + dt * rates.g_rate;
    let h_new = state.h + dt * rates.h_rate;
    let t_new = state.t + dt;
    if !(g_new.is_finite() && h_new.is_finite()) {
        return Err(Error::NumericalBlowup {
            t: t_new,
            field: "front",
        });
    }

    let old_cell = state.width() / n as f64;
    let local: Vec<_> = (0..=n)
        .map(|i| profile.rates(state.g + i as f64 * old_cell))
        .collect();

    // Winged stage.
    let diff = diffusion_coefficient(g_new, h_new, h0, profile.d) * dt / (dy * dy);
    let interior = n - 1;
    let mut lower = vec![0.0; interior];
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    for k in 0..interior {
        let i = k + 1;
        let y = -h0 + i as f64 * dy;
        let adv = advection_coefficient(y, g_new, h_new, rates.g_rate, rates.h_rate, h0, profile.nu)
            * dt
            / dy;
        lower[k] = -diff;
        upper[k] = -diff;
        diag[k] = 1.0 + 2.0 * diff;
        if adv > 0.0 {
            upper[k] -= adv;
            diag[k] += adv;
        } else {
            lower[k] += adv;
            diag[k] -= adv;
        }
        let c = &local[i];
        let (mi, ai) = (state.m[i], state.a[i]);
        rhs[k] = mi + dt * (c.gamma * ai * (1.0 - mi / profile.k1) - c.mu1 * mi);
    }
    TridiagLu::new(&lower, &diag, &upper).solve_in_place(&mut rhs);
    let mut m = Vec::with_capacity(n + 1);
    m.push(0.0);
    m.extend_from_slice(&rhs);
    m.push(0.0);

    // Aquatic stage at the old physical nodes.
    let mut a_old_nodes: Vec<f64> = (0..=n)
        .map(|i| {
            let c = &local[i];
            aquatic_update(state.a[i], state.m[i], c.r, c.mu2 + c.gamma, profile.k2, dt)
        })
        .collect();
    a_old_nodes[0] = 0.0;
    a_old_nodes[n] = 0.0;
    let a = if g_new == state.g && h_new == state.h {
        a_old_nodes
    } else {
        let samples = UniformSamples::new(state.g, old_cell, &a_old_nodes);
        let new_cell = (h_new - g_new) / n as f64;
        let mut a = vec![0.0; n + 1];
        for (j, aj) in a.iter_mut().enumerate().take(n).skip(1) {
            let x = g_new + j as f64 * new_cell;
            *aj = samples.cubic(x).unwrap_or(0.0).clamp(0.0, profile.k2);
        }
        a
    };

    let next = SimulationState {
        t: t_new,
        g: g_new,
        h: h_new,
        h0,
        m,
        a,
    };
    check_bounds(&next, profile)?;
    Ok((next, rates))
}

fn check_bounds(state: &SimulationState, profile: &CoefficientProfile) -> Result<()> {
    for (field, values, bound) in [("M", &state.m, profile.k1), ("A", &state.a, profile.k2)] {
        for &v in values.iter() {
            if !v.is_finite() {
                return Err(Error::NumericalBlowup { t: state.t, field });
            }
            if v < -BOUND_TOLERANCE * bound || v > bound * (1.0 + BOUND_TOLERANCE) {
                return Err(Error::SchemeInstability {
                    t: state.t,
                    field,
                    value: v,
                    bound,
                });
            }
        }
    }
    Ok(())
}
