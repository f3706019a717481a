//! Property tests over randomised profiles, initial data and intervals.

use proptest::prelude::*;

use aedes_core::classify::{compare_trajectories, run_classified, Label, Thresholds};
use aedes_core::coefficients::{CoefficientProfile, ProfileSpec};
use aedes_core::solver::{
    front_speed_bound, Control, DtPolicy, FrontRates, InitialData, Simulation, SimulationState, SolverConfig,
};
use aedes_core::steady::{close_a, reaction_per_density, solve_truncated};
use aedes_core::threshold::{compute_r0, compute_r0_direct, poincare_upper_bound, Interval};
use aedes_core::Result;

fn bump(base: f64) -> impl Strategy<Value = ProfileSpec> {
    (-0.5..0.9f64, -3.0..3.0f64, 0.3..2.0f64)
        .prop_map(move |(a, c, w)| ProfileSpec::bump(base, a * base, c, w))
}

prop_compose! {
    fn profile()(
        r in bump(2.0),
        gamma in bump(1.0),
        mu1 in bump(0.3),
        mu2 in bump(0.6),
        d in 0.3..2.0f64,
        nu in -0.5..0.5f64,
        k1 in 0.5..2.0f64,
        k2 in 0.5..2.0f64,
    ) -> CoefficientProfile {
        CoefficientProfile::new(r, gamma, mu1, mu2, d, nu, k1, k2).unwrap()
    }
}

fn solver(n: usize, dt: f64, mu: f64, horizon: f64) -> SolverConfig {
    SolverConfig {
        n,
        dt: DtPolicy::Fixed { dt },
        mu,
        horizon,
        output_interval: 0.1,
        ..SolverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_stay_in_the_invariant_box(
        p in profile(),
        h0 in 0.3..3.0f64,
        sa in 0.05..0.95f64,
        sb in 0.05..0.95f64,
        mu in 0.1..4.0f64,
    ) {
        let init = InitialData::cosine(h0, sa * p.k1, sb * p.k2);
        let bound = front_speed_bound(&p, &init, mu);
        let sim = Simulation::new(p.clone(), &init, solver(64, 0.01, mu, 2.0)).unwrap();
        let mut prev = (sim.initial.g, sim.initial.h);
        let mut worst_rate: f64 = 0.0;
        let mut mon = |s: &SimulationState, r: FrontRates| -> Result<Control> {
            let (m_lo, m_hi) = s.m.iter().fold((0.0f64, 0.0f64), |a, &v| (a.0.min(v), a.1.max(v)));
            let (a_lo, a_hi) = s.a.iter().fold((0.0f64, 0.0f64), |a, &v| (a.0.min(v), a.1.max(v)));
            assert!(m_lo >= -1e-10 * p.k1 && m_hi <= p.k1 * (1.0 + 1e-10));
            assert!(a_lo >= -1e-10 * p.k2 && a_hi <= p.k2 * (1.0 + 1e-10));
            assert!(s.h >= prev.1 && s.g <= prev.0);
            prev = (s.g, s.h);
            worst_rate = worst_rate.max(r.h_rate).max(-r.g_rate);
            Ok(Control::Continue)
        };
        sim.run_with(&mut mon).unwrap();
        prop_assert!(worst_rate <= bound, "{} > {}", worst_rate, bound);
    }

    #[test]
    fn nested_initial_data_stay_ordered(
        p in profile(),
        h0 in 0.5..2.0f64,
        s in 0.1..0.9f64,
        mu in 0.2..3.0f64,
    ) {
        let upper = InitialData::cosine(h0, 0.8 * p.k1, 0.8 * p.k2);
        let verdict = |n: usize| {
            let cfg = solver(n, 0.64 / n as f64, mu, 1.5);
            let run = |init: &InitialData| Simulation::new(p.clone(), init, cfg.clone()).unwrap().run().unwrap();
            compare_trajectories("nested", &run(&upper.scaled(s)), &run(&upper), &p)
        };
        let v = verdict(64);
        // Grid tolerance: interpolating the upper run across the kink at its
        // front costs O(cell^2).
        let eps = v.cell * v.cell;
        prop_assert!(v.front_violation <= v.cell, "{:?}", v);
        prop_assert!(v.density_violation_m <= eps * p.k1 && v.density_violation_a <= eps * p.k2, "{:?}", v);
        if !v.pass {
            let fine = verdict(256);
            prop_assert!(
                fine.density_violation_m <= v.density_violation_m / 4.0
                    && fine.density_violation_a <= v.density_violation_a / 4.0,
                "{:?} -> {:?}", v, fine
            );
        }
    }

    #[test]
    fn r0_falls_as_advection_grows(p in profile(), half in 0.5..4.0f64, n1 in 0.0..0.5f64, dn in 0.05..1.0f64) {
        let iv = Interval::symmetric(half);
        let r = |nu: f64| compute_r0(iv, &p.with_nu(nu), 256).unwrap().r0;
        prop_assert!(r(n1) > r(n1 + dn));
        prop_assert!(r(-n1) > r(-(n1 + dn)));
    }

    #[test]
    fn r0_decays_under_fast_diffusion(p in profile(), half in 0.5..4.0f64) {
        let iv = Interval::symmetric(half);
        let first = compute_r0(iv, &p.with_d(10.0), 256).unwrap().r0;
        let mut prev = f64::INFINITY;
        for d in [10.0, 100.0, 1000.0] {
            let q = p.with_d(d);
            let r0 = compute_r0(iv, &q, 256).unwrap().r0;
            prop_assert!(r0 < prev);
            // The discrete Dirichlet eigenvalue sits below (pi/L)^2 by the
            // factor (sin t / t)^2, t = pi/(2n).
            let t = std::f64::consts::PI / 512.0;
            prop_assert!(r0 <= poincare_upper_bound(iv, &q) * (t / t.sin()) * (1.0 + 1e-12));
            prev = r0;
        }
        // R0 ~ D^{-1/2} once diffusion dominates; lower-order terms keep the
        // two-decade ratio a little above 1/10.
        prop_assert!(prev < 0.2 * first, "{} vs {}", prev, first);
    }

    #[test]
    fn gauged_and_direct_r0_agree(p in profile(), c in -2.0..2.0f64, half in 0.3..4.0f64) {
        let iv = Interval::new(c - half, c + half);
        // Both are second order; extrapolate away the shared h^2 term.
        let rich = |f: &dyn Fn(usize) -> f64| (4.0 * f(1024) - f(512)) / 3.0;
        let a = rich(&|n| compute_r0(iv, &p, n).unwrap().r0);
        let b = rich(&|n| compute_r0_direct(iv, &p, n).unwrap());
        prop_assert!(((a - b) / a).abs() < 1e-6, "{} vs {}", a, b);
    }

    #[test]
    fn stationary_state_is_closed_and_gauged_decreasing(p in profile()) {
        let half = 8.0;
        prop_assume!(compute_r0(Interval::symmetric(half), &p, 256).unwrap().r0 > 1.02);
        let sol = solve_truncated(half, &p, 8.0).unwrap();
        for ((&x, &m), &a) in sol.x.iter().zip(&sol.m_star).zip(&sol.a_star) {
            let c = p.rates(x);
            let resid = c.r * (1.0 - a / p.k2) * m - (c.mu2 + c.gamma) * a;
            prop_assert!(resid.abs() < 1e-12, "closure residual {}", resid);
            prop_assert_eq!(a, close_a(m, x, &p));
            prop_assert!(m >= 0.0 && m <= p.k1 && a >= 0.0 && a <= p.k2);
        }
        // Per-density reaction strictly decreasing in u over the solution's range.
        let top = sol.m_star.iter().cloned().fold(0.0, f64::max);
        for k in 0..100 {
            let x = -half + 2.0 * half * (k as f64 + 0.5) / 100.0;
            let (u1, u2) = (top * 0.3, top * 0.9);
            prop_assert!(reaction_per_density(u2, x, &p) < reaction_per_density(u1, x, &p));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn vanishing_implies_subcritical_final_habitat(
        p in profile(),
        h0 in 0.2..1.0f64,
        mu in 0.05..1.0f64,
    ) {
        let init = InitialData::cosine(h0, 0.01 * p.k1, 0.01 * p.k2);
        let sim = Simulation::new(p.clone(), &init, solver(64, 0.02, mu, 60.0)).unwrap();
        let (_, out) = run_classified(&sim, Thresholds::default()).unwrap();
        if out.label == Label::Vanishing {
            prop_assert!(out.r0f < 1.0);
        }
    }

    #[test]
    fn spreading_persists_over_longer_horizons(p in profile(), h0 in 0.5..3.0f64, mu in 0.5..4.0f64) {
        let init = InitialData::cosine(h0, 0.5 * p.k1, 0.5 * p.k2);
        let short = Simulation::new(p.clone(), &init, solver(64, 0.02, mu, 5.0)).unwrap();
        let (_, a) = run_classified(&short, Thresholds::default()).unwrap();
        prop_assume!(a.label == Label::Spreading);
        let long = Simulation::new(p.clone(), &init, solver(64, 0.02, mu, 10.0)).unwrap();
        let (_, b) = run_classified(&long, Thresholds::default()).unwrap();
        prop_assert_eq!(b.label, Label::Spreading);
    }
}
