use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::error::{Error, Result};

use super::state::{InitialData, SimulationState, SolverConfig};
use super::stepper::{step, FrontRates};

/// Recorded output frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    #[serde(rename = "sup_M")]
    pub sup_m: f64,
    #[serde(rename = "sup_A")]
    pub sup_a: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub m: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub a: Vec<f64>,
}

impl Snapshot {
    pub fn of(state: &SimulationState) -> Self {
        Self {
            t: state.t,
            g: state.g,
            h: state.h,
            sup_m: state.sup_m(),
            sup_a: state.sup_a(),
            m: state.m.clone(),
            a: state.a.clone(),
        }
    }

    /// Physical node positions.
    pub fn xs(&self) -> Vec<f64> {
        let n = self.m.len().saturating_sub(1).max(1);
        (0..=n)
            .map(|i| self.g + (self.h - self.g) * i as f64 / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub h0: f64,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    /// Final state, including the dense fields.
    pub last: SimulationState,
    /// `true` when a monitor ended the run before the horizon.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn fronts(&self) -> Vec<(f64, f64, f64)> {
        self.snapshots.iter().map(|s| (s.t, s.g, s.h)).collect()
    }
}

/// Verdict of a monitor after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Observer invoked after every accepted step.
pub trait Monitor {
    fn observe(&mut self, state: &SimulationState, rates: FrontRates) -> Result<Control>;
}

impl<F> Monitor for F
where
    F: FnMut(&SimulationState, FrontRates) -> Result<Control>,
{
    fn observe(&mut self, state: &SimulationState, rates: FrontRates) -> Result<Control> {
        self(state, rates)
    }
}

/// A monitor that never stops the run.
pub struct NoMonitor;

impl Monitor for NoMonitor {
    fn observe(&mut self, _: &SimulationState, _: FrontRates) -> Result<Control> {
        Ok(Control::Continue)
    }
}

/// Upper bound on `|h'|` and `|g'|`. With
/// `C1 = max{1/(2 h0), |nu|/D + sqrt(K1/(2D)), 4 |M0|_{C1} / (3 K1)}`, the
/// barrier `K1 (2 C1 s - C1^2 s^2)`, `s` the distance to the front, keeps
/// `|M_x| <= 2 K1 C1` there, so the bound is `2 mu K1 C1`.
pub fn front_speed_bound(profile: &CoefficientProfile, initial: &InitialData, mu: f64) -> f64 {
    let d = profile.d;
    let c1 = (1.0 / (2.0 * initial.h0))
        .max(profile.nu.abs() / d + (profile.k1 / (2.0 * d)).sqrt())
        .max(4.0 * initial.m0_c1_norm() / (3.0 * profile.k1));
    2.0 * mu * profile.k1 * c1
}

/// A configured free-boundary run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub profile: CoefficientProfile,
    pub config: SolverConfig,
    pub initial: SimulationState,
}

impl Simulation {
    pub fn new(profile: CoefficientProfile, initial: &InitialData, config: SolverConfig) -> Result<Self> {
        profile.validate()?;
        config.validate()?;
        initial.validate(&profile)?;
        let (m, a) = initial.sample(config.n);
        let state = SimulationState {
            t: 0.0,
            g: -initial.h0,
            h: initial.h0,
            h0: initial.h0,
            m,
            a,
        };
        Ok(Self {
            profile,
            config,
            initial: state,
        })
    }

    /// Starts from an arbitrary state (for instance the zero solution).
    pub fn from_state(profile: CoefficientProfile, state: SimulationState, config: SolverConfig) -> Result<Self> {
        profile.validate()?;
        config.validate()?;
        if state.m.len() != config.n + 1 || state.a.len() != config.n + 1 {
            return Err(Error::InvalidInitialData(format!(
                "state has {} / {} nodes, grid needs {}",
                state.m.len(),
                state.a.len(),
                config.n + 1
            )));
        }
        if !(state.h > state.g) {
            return Err(Error::DegenerateDomain {
                g: state.g,
                h: state.h,
            });
        }
        Ok(Self {
            profile,
            config,
            initial: state,
        })
    }

    pub fn dt(&self) -> f64 {
        self.config.time_step(self.initial.h0)
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.run_with(&mut NoMonitor)
    }

    /// Integrates up to the horizon, recording a snapshot at `t = 0`, every
    /// output interval and at the end.
    pub fn run_with<M: Monitor + ?Sized>(&self, monitor: &mut M) -> Result<Trajectory> {
        let dt = self.dt();
        let total = (self.config.horizon / dt - 1e-9).ceil().max(0.0) as usize;
        let every = ((self.config.output_interval / dt).round() as usize).max(1);
        let t0 = self.initial.t;
        let mut state = self.initial.clone();
        let mut snapshots = vec![Snapshot::of(&state)];
        let mut stopped_early = false;
        for k in 1..=total {
            let (mut next, rates) = step(&state, &self.profile, &self.config, dt)?;
            // Avoid drift in the clock from repeated addition.
            next.t = t0 + k as f64 * dt;
            state = next;
            let stop = monitor.observe(&state, rates)? == Control::Stop;
            if k % every == 0 || k == total || stop {
                snapshots.push(Snapshot::of(&state));
            }
            if stop {
                stopped_early = k < total;
                break;
            }
        }
        Ok(Trajectory {
            h0: self.initial.h0,
            dt,
            snapshots,
            last: state,
            stopped_early,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::state::DtPolicy;

    fn profile(k1: f64) -> CoefficientProfile {
        CoefficientProfile::homogeneous(2.0, 1.0, 0.2, 0.5, 1.0, 0.0, k1, 1.0).unwrap()
    }

    fn cfg(mu: f64, horizon: f64) -> SolverConfig {
        SolverConfig {
            n: 64,
            dt: DtPolicy::Fixed { dt: 0.01 },
            mu,
            horizon,
            output_interval: 0.1,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let sim = Simulation::new(profile(1.0), &init, cfg(1.0, 0.0)).unwrap();
        let tr = sim.run().unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.last, sim.initial);
    }

    #[test]
    fn runs_are_deterministic() {
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let sim = Simulation::new(profile(1.0), &init, cfg(1.0, 1.0)).unwrap();
        assert_eq!(sim.run().unwrap(), sim.run().unwrap());
    }

    #[test]
    fn snapshots_follow_output_interval() {
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let sim = Simulation::new(profile(1.0), &init, cfg(1.0, 1.0)).unwrap();
        let tr = sim.run().unwrap();
        let ts: Vec<f64> = tr.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 11);
        for (k, t) in ts.iter().enumerate() {
            assert!((t - 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn larger_mu_moves_fronts_further() {
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let run = |mu| {
            Simulation::new(profile(1.0), &init, cfg(mu, 2.0))
                .unwrap()
                .run()
                .unwrap()
                .last
        };
        let (a, b) = (run(0.5), run(2.0));
        assert!(b.h > a.h && b.g < a.g);
        assert!(a.h > 1.0);
    }

    #[test]
    fn fronts_respect_speed_bound_and_monotonicity() {
        let init = InitialData::cosine(1.0, 0.9, 0.5);
        let p = profile(1.0);
        let bound = front_speed_bound(&p, &init, 2.0);
        let sim = Simulation::new(p, &init, cfg(2.0, 2.0)).unwrap();
        let mut worst: f64 = 0.0;
        let mut prev = (sim.initial.g, sim.initial.h);
        let mut mon = |s: &SimulationState, r: FrontRates| -> Result<Control> {
            worst = worst.max(r.h_rate).max(-r.g_rate);
            assert!(s.h >= prev.1 && s.g <= prev.0);
            prev = (s.g, s.h);
            Ok(Control::Continue)
        };
        sim.run_with(&mut mon).unwrap();
        assert!(worst <= bound, "{worst} > {bound}");
    }

    #[test]
    fn monitor_can_stop() {
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let sim = Simulation::new(profile(1.0), &init, cfg(1.0, 5.0)).unwrap();
        let mut mon = |s: &SimulationState, _: FrontRates| -> Result<Control> {
            Ok(if s.t >= 0.25 { Control::Stop } else { Control::Continue })
        };
        let tr = sim.run_with(&mut mon).unwrap();
        assert!(tr.stopped_early);
        assert!((tr.last.t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pure_decay_without_recruitment() {
        // No larva-to-adult flux: M only diffuses and dies, A decays exactly.
        let p = CoefficientProfile::homogeneous(1.0, 1e-12, 0.5, 0.7, 1.0, 0.0, 1.0, 1.0).unwrap();
        let init = InitialData::cosine(1.0, 1e-8, 0.5);
        let sim = Simulation::new(p, &init, cfg(1e-6, 1.0)).unwrap();
        let tr = sim.run().unwrap();
        let i = 32;
        let expected = 0.5 * (-0.7_f64).exp();
        assert!((tr.last.a[i] - expected).abs() < 1e-6, "{}", tr.last.a[i]);
    }

    #[test]
    fn zero_state_stays_zero() {
        let n = 64;
        let s = SimulationState {
            t: 0.0,
            g: -2.0,
            h: 2.0,
            h0: 2.0,
            m: vec![0.0; n + 1],
            a: vec![0.0; n + 1],
        };
        let sim = Simulation::from_state(profile(1.0), s, cfg(1.0, 1.0)).unwrap();
        let tr = sim.run().unwrap();
        assert_eq!((tr.last.g, tr.last.h), (-2.0, 2.0));
        assert!(tr.last.m.iter().all(|&v| v == 0.0));
    }
}
