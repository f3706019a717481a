//! Spreading / vanishing classification of trajectories, the sharp
//! threshold in the expansion capability `mu`, and comparison experiments.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::error::{Error, Result};
use crate::interp::UniformSamples;
use crate::parallel::{self, Strategy};
use crate::solver::{
    Control, FrontRates, InitialData, Monitor, Simulation, SimulationState, Snapshot, SolverConfig,
    Trajectory,
};
use crate::threshold::{compute_r0, Interval};

/// Classification tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Margin around `R0 = 1`.
    pub eps_r: f64,
    /// Front-stall tolerance, relative to `h0`.
    pub eps_g: f64,
    /// Density tolerance, relative to `K1 + K2`.
    pub eps_d: f64,
    /// Trailing stall window as a fraction of the horizon.
    pub window_fraction: f64,
    /// Cells used for each R0 evaluation along the fronts.
    pub r0_resolution: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps_r: 1e-3,
            eps_g: 1e-6,
            eps_d: 1e-6,
            window_fraction: 0.1,
            r0_resolution: 256,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_r", self.eps_r),
            ("eps_g", self.eps_g),
            ("eps_d", self.eps_d),
            ("window_fraction", self.window_fraction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.window_fraction > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "window_fraction must not exceed 1, got {}",
                self.window_fraction
            )));
        }
        if self.r0_resolution < crate::threshold::MIN_RESOLUTION {
            return Err(Error::InvalidArgument(format!(
                "r0_resolution must be at least {}",
                crate::threshold::MIN_RESOLUTION
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Spreading,
    Vanishing,
    Undecided,
}

/// Which stopping rule produced the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `R0F >= 1 + eps_r`.
    Supercritical,
    /// Fronts stalled, densities negligible and `R0F <= 1 - eps_r`.
    Extinction,
    /// Neither rule fired by the horizon.
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: Label,
    pub rule: Rule,
    pub t: f64,
    pub gap: f64,
    #[serde(rename = "sup_M")]
    pub sup_m: f64,
    #[serde(rename = "sup_A")]
    pub sup_a: f64,
    #[serde(rename = "R0F")]
    pub r0f: f64,
}

/// Incremental rule evaluation over a sequence of front records.
pub struct Judge<'a> {
    profile: &'a CoefficientProfile,
    thresholds: Thresholds,
    window: f64,
    eps_g: f64,
    eps_d: f64,
    gaps: Vec<(f64, f64)>,
    cached: Option<((f64, f64), f64)>,
}

impl<'a> Judge<'a> {
    pub fn new(profile: &'a CoefficientProfile, thresholds: Thresholds, h0: f64, horizon: f64) -> Self {
        Self {
            profile,
            thresholds,
            window: thresholds.window_fraction * horizon,
            eps_g: thresholds.eps_g * h0,
            eps_d: thresholds.eps_d * (profile.k1 + profile.k2),
            gaps: Vec::new(),
            cached: None,
        }
    }

    fn r0f(&mut self, g: f64, h: f64) -> Result<f64> {
        if let Some((key, v)) = self.cached {
            if key == (g, h) {
                return Ok(v);
            }
        }
        let v = compute_r0(Interval::new(g, h), self.profile, self.thresholds.r0_resolution)?.r0;
        self.cached = Some(((g, h), v));
        Ok(v)
    }

    /// Records one frame and reports the rule that fires, if any.
    pub fn judge(&mut self, t: f64, g: f64, h: f64, sup_m: f64, sup_a: f64) -> Result<(Option<Rule>, f64)> {
        self.gaps.push((t, h - g));
        let r0f = self.r0f(g, h)?;
        let eps_r = self.thresholds.eps_r;
        if r0f >= 1.0 + eps_r {
            return Ok((Some(Rule::Supercritical), r0f));
        }
        if r0f < 1.0 - eps_r && sup_m + sup_a < self.eps_d && t >= self.window && self.window > 0.0 {
            let start = t - self.window;
            // Earliest record at or after the window start.
            let k = self.gaps.partition_point(|&(s, _)| s < start - 1e-9);
            let growth = (h - g) - self.gaps[k].1;
            if growth < self.eps_g {
                return Ok((Some(Rule::Extinction), r0f));
            }
        }
        Ok((None, r0f))
    }
}

fn outcome(rule: Option<Rule>, t: f64, g: f64, h: f64, sup_m: f64, sup_a: f64, r0f: f64) -> Outcome {
    let (label, rule) = match rule {
        Some(Rule::Supercritical) => (Label::Spreading, Rule::Supercritical),
        Some(Rule::Extinction) => (Label::Vanishing, Rule::Extinction),
        _ => (Label::Undecided, Rule::Horizon),
    };
    Outcome {
        label,
        rule,
        t,
        gap: h - g,
        sup_m,
        sup_a,
        r0f,
    }
}

/// Classifies a finished trajectory from its snapshots.
pub fn classify(
    trajectory: &Trajectory,
    profile: &CoefficientProfile,
    horizon: f64,
    thresholds: Thresholds,
) -> Result<Outcome> {
    let mut judge = Judge::new(profile, thresholds, trajectory.h0, horizon);
    let mut last = None;
    for s in &trajectory.snapshots {
        let (rule, r0f) = judge.judge(s.t, s.g, s.h, s.sup_m, s.sup_a)?;
        if rule.is_some() {
            return Ok(outcome(rule, s.t, s.g, s.h, s.sup_m, s.sup_a, r0f));
        }
        last = Some((s, r0f));
    }
    let (s, r0f): (&Snapshot, f64) = last.ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    Ok(outcome(None, s.t, s.g, s.h, s.sup_m, s.sup_a, r0f))
}

/// Monitor that applies the rules at every output time and stops the run
/// as soon as one fires.
pub struct ClassifyingMonitor<'a> {
    judge: Judge<'a>,
    every: usize,
    steps: usize,
    pub outcome: Option<Outcome>,
}

impl<'a> ClassifyingMonitor<'a> {
    pub fn new(sim: &'a Simulation, thresholds: Thresholds) -> Self {
        let dt = sim.dt();
        Self {
            judge: Judge::new(&sim.profile, thresholds, sim.initial.h0, sim.config.horizon),
            every: ((sim.config.output_interval / dt).round() as usize).max(1),
            steps: 0,
            outcome: None,
        }
    }

    fn frame(&mut self, s: &SimulationState) -> Result<Control> {
        let (rule, r0f) = self.judge.judge(s.t, s.g, s.h, s.sup_m(), s.sup_a())?;
        if rule.is_some() {
            self.outcome = Some(outcome(rule, s.t, s.g, s.h, s.sup_m(), s.sup_a(), r0f));
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    }
}

impl Monitor for ClassifyingMonitor<'_> {
    fn observe(&mut self, state: &SimulationState, _: FrontRates) -> Result<Control> {
        self.steps += 1;
        if self.steps.is_multiple_of(self.every) {
            return self.frame(state);
        }
        Ok(Control::Continue)
    }
}

/// Runs `sim`, stopping early once a rule fires, and classifies it.
pub fn run_classified(sim: &Simulation, thresholds: Thresholds) -> Result<(Trajectory, Outcome)> {
    thresholds.validate()?;
    let mut mon = ClassifyingMonitor::new(sim, thresholds);
    if mon.frame(&sim.initial)? == Control::Stop {
        let tr = Trajectory {
            h0: sim.initial.h0,
            dt: sim.dt(),
            snapshots: vec![Snapshot::of(&sim.initial)],
            last: sim.initial.clone(),
            stopped_early: sim.config.horizon > 0.0,
        };
        return Ok((tr, mon.outcome.expect("rule fired")));
    }
    let tr = sim.run_with(&mut mon)?;
    let out = match mon.outcome.take() {
        Some(o) => o,
        None => {
            let s = &tr.last;
            let (rule, r0f) = mon.judge.judge(s.t, s.g, s.h, s.sup_m(), s.sup_a())?;
            outcome(rule, s.t, s.g, s.h, s.sup_m(), s.sup_a(), r0f)
        }
    };
    Ok((tr, out))
}

/// One classification attempt during the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRun {
    pub mu: f64,
    pub horizon: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuStarReport {
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// `R0` of the initial habitat.
    pub r0f_initial: f64,
    /// Every attempt in the order it was made.
    pub runs: Vec<MuRun>,
}

impl MuStarReport {
    /// Final decisive label per probed `mu`, sorted by `mu`.
    pub fn labels(&self) -> Vec<(f64, Label)> {
        let mut out: Vec<(f64, Label)> = Vec::new();
        for r in &self.runs {
            match out.iter_mut().find(|(m, _)| *m == r.mu) {
                Some(e) => e.1 = r.outcome.label,
                None => out.push((r.mu, r.outcome.label)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// `true` when no probed `mu` spreads below one that vanishes.
    pub fn is_label_monotone(&self) -> bool {
        let labels = self.labels();
        let last_vanish = labels.iter().rposition(|l| l.1 == Label::Vanishing);
        let first_spread = labels.iter().position(|l| l.1 == Label::Spreading);
        match (last_vanish, first_spread) {
            (Some(v), Some(s)) => v < s,
            _ => true,
        }
    }
}

/// Doublings of the horizon granted to an undecided run.
pub const MAX_HORIZON_DOUBLINGS: usize = 3;

/// Brackets the sharp threshold `mu*`: runs with `mu <= mu*` vanish and
/// runs with `mu > mu*` spread. Bisects until `mu_hi - mu_lo < tol mu_hi`.
pub fn find_mu_star(
    initial: &InitialData,
    profile: &CoefficientProfile,
    config: &SolverConfig,
    bracket: (f64, f64),
    tol: f64,
    thresholds: Thresholds,
) -> Result<MuStarReport> {
    thresholds.validate()?;
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidBracket {
            mu_lo: lo,
            mu_hi: hi,
            reason: "need 0 < mu_lo < mu_hi".into(),
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let r0f_initial = compute_r0(
        Interval::symmetric(initial.h0),
        profile,
        thresholds.r0_resolution,
    )?
    .r0;
    let mut report = MuStarReport {
        mu_lo: 0.0,
        mu_hi: 0.0,
        r0f_initial,
        runs: Vec::new(),
    };
    if r0f_initial >= 1.0 {
        return Ok(report);
    }

    let decide = |mu: f64, runs: &mut Vec<MuRun>| -> Result<Label> {
        let mut cfg = config.clone();
        cfg.mu = mu;
        for _ in 0..=MAX_HORIZON_DOUBLINGS {
            let sim = Simulation::new(profile.clone(), initial, cfg.clone())?;
            let (_, out) = run_classified(&sim, thresholds)?;
            let label = out.label;
            runs.push(MuRun {
                mu,
                horizon: cfg.horizon,
                outcome: out,
            });
            if label != Label::Undecided {
                return Ok(label);
            }
            cfg.horizon *= 2.0;
        }
        Ok(Label::Undecided)
    };

    let l = decide(lo, &mut report.runs)?;
    if l != Label::Vanishing {
        return Err(Error::InvalidBracket {
            mu_lo: lo,
            mu_hi: hi,
            reason: format!("mu_lo = {lo} is {l:?}, expected Vanishing"),
        });
    }
    let l = decide(hi, &mut report.runs)?;
    if l != Label::Spreading {
        return Err(Error::InvalidBracket {
            mu_lo: lo,
            mu_hi: hi,
            reason: format!("mu_hi = {hi} is {l:?}, expected Spreading"),
        });
    }
    while hi - lo >= tol * hi {
        let mid = 0.5 * (lo + hi);
        match decide(mid, &mut report.runs)? {
            Label::Vanishing => lo = mid,
            Label::Spreading => hi = mid,
            Label::Undecided => {
                return Err(Error::InconclusiveRegion {
                    mu_lo: lo,
                    mu_hi: hi,
                    probe: mid,
                })
            }
        }
    }
    report.mu_lo = lo;
    report.mu_hi = hi;
    Ok(report)
}

/// Largest ordering violations between a lower and an upper run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub name: String,
    /// Largest `max(h_lo - h_hi, g_hi - g_lo, 0)` over output times.
    pub front_violation: f64,
    /// Largest physical cell size over the compared frames.
    pub cell: f64,
    /// Largest `M_lo - M_hi` and `A_lo - A_hi` on the shared domain.
    pub density_violation_m: f64,
    pub density_violation_a: f64,
    pub frames: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pairs: Vec<PairVerdict>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.pairs.iter().all(|p| p.pass)
    }
}

/// Density tolerance of a comparison pass, relative to the carrying capacity.
pub const DENSITY_ORDER_TOLERANCE: f64 = 1e-8;

/// Measures how far `upper` fails to dominate `lower` frame by frame.
pub fn compare_trajectories(
    name: &str,
    lower: &Trajectory,
    upper: &Trajectory,
    profile: &CoefficientProfile,
) -> PairVerdict {
    let mut front: f64 = 0.0;
    let mut cell: f64 = 0.0;
    let mut dm: f64 = 0.0;
    let mut da: f64 = 0.0;
    let mut frames = 0;
    for (a, b) in lower.snapshots.iter().zip(&upper.snapshots) {
        if (a.t - b.t).abs() > 1e-9 {
            continue;
        }
        frames += 1;
        front = front.max(a.h - b.h).max(b.g - a.g);
        let ca = (a.h - a.g) / (a.m.len() - 1) as f64;
        let cb = (b.h - b.g) / (b.m.len() - 1) as f64;
        cell = cell.max(ca).max(cb);
        let bm = UniformSamples::new(b.g, cb, &b.m);
        let ba = UniformSamples::new(b.g, cb, &b.a);
        if a.g == b.g && a.h == b.h && a.m.len() == b.m.len() {
            // Same nodes: compare directly.
            for i in 0..a.m.len() {
                dm = dm.max(a.m[i] - b.m[i]);
                da = da.max(a.a[i] - b.a[i]);
            }
            continue;
        }
        let (lo_x, hi_x) = (a.g.max(b.g), a.h.min(b.h));
        for (i, x) in a.xs().into_iter().enumerate() {
            if x < lo_x || x > hi_x {
                continue;
            }
            // Densities are non-negative; clamping removes cubic undershoot
            // next to a steep front.
            if let (Some(mb), Some(ab)) = (bm.cubic(x), ba.cubic(x)) {
                dm = dm.max(a.m[i] - mb.max(0.0));
                da = da.max(a.a[i] - ab.max(0.0));
            }
        }
    }
    let pass = front <= cell
        && dm <= DENSITY_ORDER_TOLERANCE * profile.k1
        && da <= DENSITY_ORDER_TOLERANCE * profile.k2;
    PairVerdict {
        name: name.to_string(),
        front_violation: front,
        cell,
        density_violation_m: dm,
        density_violation_a: da,
        frames,
        pass,
    }
}

/// Identical, half-scaled-data and ordered-`mu` pairs, run concurrently.
pub fn comparison_suite(
    profile: &CoefficientProfile,
    initial: &InitialData,
    config: &SolverConfig,
    mus: &[f64],
    strategy: Strategy,
) -> Result<ComparisonReport> {
    if mus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("mu values must increase, got {mus:?}")));
    }
    let with_mu = |mu: f64| SolverConfig {
        mu,
        ..config.clone()
    };
    let mut jobs: Vec<(String, InitialData, InitialData, SolverConfig, SolverConfig)> = vec![
        (
            "identical".into(),
            initial.clone(),
            initial.clone(),
            config.clone(),
            config.clone(),
        ),
        (
            "half-scaled data".into(),
            initial.scaled(0.5),
            initial.clone(),
            config.clone(),
            config.clone(),
        ),
    ];
    for w in mus.windows(2) {
        jobs.push((
            format!("mu {} vs {}", w[0], w[1]),
            initial.clone(),
            initial.clone(),
            with_mu(w[0]),
            with_mu(w[1]),
        ));
    }
    let pairs = parallel::try_map(strategy, &jobs, |(name, ia, ib, ca, cb)| {
        let a = Simulation::new(profile.clone(), ia, ca.clone())?.run()?;
        let b = Simulation::new(profile.clone(), ib, cb.clone())?.run()?;
        Ok::<_, Error>(compare_trajectories(name, &a, &b, profile))
    })?;
    Ok(ComparisonReport { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::DtPolicy;

    fn profile() -> CoefficientProfile {
        CoefficientProfile::homogeneous(2.0, 1.0, 0.2, 0.5, 1.0, 0.0, 1.0, 1.0).unwrap()
    }

    fn cfg(mu: f64, horizon: f64) -> SolverConfig {
        SolverConfig {
            n: 64,
            dt: DtPolicy::Fixed { dt: 0.01 },
            mu,
            horizon,
            output_interval: 0.5,
            ..SolverConfig::default()
        }
    }

    fn critical_half_width(p: &CoefficientProfile) -> f64 {
        // D (pi / 2L)^2 + mu1 = r gamma / (mu2 + gamma).
        let c = p.limits();
        std::f64::consts::PI / 2.0 / ((c.recruitment() - c.mu1) / p.d).sqrt()
    }

    #[test]
    fn supercritical_start_spreads_immediately() {
        let p = profile();
        let init = InitialData::cosine(2.0 * critical_half_width(&p), 0.5, 0.5);
        let sim = Simulation::new(p, &init, cfg(1.0, 10.0)).unwrap();
        let (tr, out) = run_classified(&sim, Thresholds::default()).unwrap();
        assert_eq!(out.label, Label::Spreading);
        assert_eq!(out.t, 0.0);
        assert_eq!(tr.snapshots.len(), 1);
        let post = classify(&sim.run().unwrap(), &sim.profile, 10.0, Thresholds::default()).unwrap();
        assert_eq!(post.label, Label::Spreading);
    }

    #[test]
    fn small_data_on_small_interval_vanishes() {
        let p = profile();
        let init = InitialData::cosine(0.5 * critical_half_width(&p), 1e-3, 1e-3);
        let sim = Simulation::new(p, &init, cfg(0.5, 60.0)).unwrap();
        let (_, out) = run_classified(&sim, Thresholds::default()).unwrap();
        assert_eq!(out.label, Label::Vanishing, "{out:?}");
        assert!(out.r0f < 1.0);
    }

    #[test]
    fn short_horizon_is_undecided() {
        let p = profile();
        let init = InitialData::cosine(0.5 * critical_half_width(&p), 1e-3, 1e-3);
        let sim = Simulation::new(p, &init, cfg(0.5, 0.5)).unwrap();
        let (_, out) = run_classified(&sim, Thresholds::default()).unwrap();
        assert_eq!(out.label, Label::Undecided);
        assert_eq!(out.rule, Rule::Horizon);
    }

    #[test]
    fn supercritical_start_gives_zero_threshold() {
        let p = profile();
        let init = InitialData::cosine(2.0 * critical_half_width(&p), 0.5, 0.5);
        let rep = find_mu_star(&init, &p, &cfg(1.0, 10.0), (0.1, 10.0), 0.05, Thresholds::default()).unwrap();
        assert_eq!((rep.mu_lo, rep.mu_hi), (0.0, 0.0));
        assert!(rep.runs.is_empty());
    }

    #[test]
    fn invalid_bracket_is_reported() {
        let p = profile();
        let init = InitialData::cosine(0.5 * critical_half_width(&p), 0.5, 0.5);
        assert!(matches!(
            find_mu_star(&init, &p, &cfg(1.0, 5.0), (2.0, 1.0), 0.05, Thresholds::default()),
            Err(Error::InvalidBracket { .. })
        ));
    }

    #[test]
    fn label_monotonicity_check() {
        let o = |label| Outcome {
            label,
            rule: Rule::Horizon,
            t: 0.0,
            gap: 1.0,
            sup_m: 0.0,
            sup_a: 0.0,
            r0f: 1.0,
        };
        let run = |mu, label| MuRun {
            mu,
            horizon: 1.0,
            outcome: o(label),
        };
        let mut rep = MuStarReport {
            mu_lo: 1.0,
            mu_hi: 2.0,
            r0f_initial: 0.5,
            runs: vec![
                run(1.0, Label::Vanishing),
                run(4.0, Label::Spreading),
                run(2.0, Label::Undecided),
                run(2.0, Label::Spreading),
            ],
        };
        assert!(rep.is_label_monotone());
        rep.runs.push(run(0.5, Label::Spreading));
        assert!(!rep.is_label_monotone());
    }

    #[test]
    fn identical_pair_has_no_violation() {
        let p = profile();
        let init = InitialData::cosine(1.0, 0.5, 0.5);
        let rep = comparison_suite(&p, &init, &cfg(1.0, 2.0), &[], Strategy::default()).unwrap();
        let same = &rep.pairs[0];
        assert_eq!(same.front_violation, 0.0);
        assert!(same.density_violation_m <= 0.0 && same.density_violation_a <= 0.0);
        assert!(same.pass);
    }
}
