//! One function per CLI task: run the computation described by a
//! [`RunConfig`] and persist its results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{comparison_suite, find_mu_star, run_classified};
use crate::coefficients::{CoefficientProfile, ProfileSpec};
use crate::config::{Format, RunConfig, TaskKind};
use crate::error::{ConfigErrors, Error, Result};
use crate::output::{columns_csv, steady_csv, steady_svg, Emitter};
use crate::parallel::{self, Strategy};
use crate::solver::Simulation;
use crate::steady::{solve_global, solve_global_auto};
use crate::threshold::{compute_lambda0, compute_r0, r0f_trace, threshold_report, Interval};

#[derive(Debug, Clone)]
pub struct TaskOutput {
    /// Human-readable result, one fact per line.
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// `false` when the task ran but its check failed (comparison
    /// violations, unconverged stationary state).
    pub ok: bool,
}

/// Runs `kind` on `config`, writing files to `out`.
pub fn run_task(kind: TaskKind, config: &RunConfig, out: &Path, strategy: Strategy) -> Result<TaskOutput> {
    if let Some(declared) = config.task {
        if declared != kind {
            let mut e = ConfigErrors::default();
            e.push("task.kind", format!("config is for `{declared}` but `{kind}` was requested"));
            return Err(Error::Config(e));
        }
    }
    let mut em = Emitter::new(out, kind, &config.run_hash(), &config.output.formats)?;
    let mut summary = String::new();
    let mut ok = true;
    let p = &config.profile;
    match kind {
        TaskKind::Simulate => {
            let sim = Simulation::new(p.clone(), &config.initial, config.solver.clone())?;
            let tr = sim.run()?;
            em.trajectory(&tr, &config.output.snapshot_times)?;
            let trace = r0f_trace(&tr.fronts(), p, config.classify.r0_resolution, strategy)?;
            em.r0f(&trace)?;
            let s = tr.snapshots.last().expect("a run records its initial state");
            let _ = writeln!(summary, "t = {}", s.t);
            let _ = writeln!(summary, "fronts = [{}, {}]", s.g, s.h);
            let _ = writeln!(summary, "sup M = {}, sup A = {}", s.sup_m, s.sup_a);
            let _ = writeln!(summary, "R0F = {}", trace.last().map_or(f64::NAN, |r| r.1));
        }
        TaskKind::Threshold => {
            let iv = config
                .threshold
                .interval
                .map_or(Interval::symmetric(config.initial.h0), |(a, b)| Interval::new(a, b));
            let rep = threshold_report(iv, p, config.threshold.resolution)?;
            em.json(".json", &rep)?;
            em.file(Format::Csv, "-eigen.csv", || {
                columns_csv(&["x", "phi_M", "phi_A"], &[&rep.x, &rep.eigen_m, &rep.eigen_a])
            })?;
            let _ = writeln!(summary, "interval = [{}, {}]", iv.p, iv.q);
            let _ = writeln!(summary, "R0 = {}", rep.r0);
            let _ = writeln!(summary, "lambda0 = {}", rep.lambda0);
        }
        TaskKind::Steady => {
            let res = config.steady.resolution;
            let window = config.steady.window;
            let g = match &config.steady.l_sequence {
                Some(seq) => solve_global(p, res, seq, window, strategy)?,
                None => solve_global_auto(p, res, window, strategy)?,
            };
            em.file(Format::Csv, ".csv", || steady_csv(&g.solution))?;
            #[derive(Serialize)]
            struct Summary<'a> {
                window: f64,
                converged: bool,
                monotonicity_violation: f64,
                residual: f64,
                sandwich_gap: f64,
                table: &'a [crate::steady::ConvergenceRow],
            }
            em.json(
                ".json",
                &Summary {
                    window: g.window,
                    converged: g.converged,
                    monotonicity_violation: g.monotonicity_violation,
                    residual: g.solution.residual,
                    sandwich_gap: g.solution.sandwich_gap,
                    table: &g.table,
                },
            )?;
            em.file(Format::Svg, ".svg", || steady_svg(&g.solution))?;
            for row in &g.table {
                let diff = row.sup_diff.map_or("-".to_string(), |d| format!("{d:.3e}"));
                let _ = writeln!(summary, "L = {:<10} sup diff = {diff:<10} residual = {:.3e}", row.half_width, row.residual);
            }
            let _ = writeln!(summary, "converged on [-{w}, {w}]: {}", g.converged, w = g.window);
            ok = g.converged;
        }
        TaskKind::Classify => {
            let sim = Simulation::new(p.clone(), &config.initial, config.solver.clone())?;
            let (tr, outcome) = run_classified(&sim, config.classify)?;
            em.trajectory(&tr, &config.output.snapshot_times)?;
            let trace = r0f_trace(&tr.fronts(), p, config.classify.r0_resolution, strategy)?;
            em.r0f(&trace)?;
            em.json("-outcome.json", &outcome)?;
            let _ = writeln!(summary, "label = {:?} ({:?} rule)", outcome.label, outcome.rule);
            let _ = writeln!(summary, "t = {}", outcome.t);
            let _ = writeln!(summary, "R0F = {}", outcome.r0f);
        }
        TaskKind::MuStar => {
            let m = &config.mu_star;
            let rep = find_mu_star(&config.initial, p, &config.solver, (m.mu_lo, m.mu_hi), m.tol, config.classify)?;
            em.json(".json", &rep)?;
            let mut text = String::new();
            let _ = writeln!(text, "R0F(0) = {}", rep.r0f_initial);
            if rep.r0f_initial >= 1.0 {
                let _ = writeln!(text, "spreading for every mu > 0: mu* = 0");
            } else {
                let _ = writeln!(text, "mu* in ({}, {}]", rep.mu_lo, rep.mu_hi);
            }
            for (mu, label) in rep.labels() {
                let _ = writeln!(text, "mu = {mu:<12} {label:?}");
            }
            em.file(Format::Json, ".txt", || text.clone())?;
            summary = text;
            ok = rep.is_label_monotone();
        }
        TaskKind::Compare => {
            let rep = comparison_suite(p, &config.initial, &config.solver, &config.compare.mus, strategy)?;
            em.json(".json", &rep)?;
            let mut text = String::new();
            for v in &rep.pairs {
                let _ = writeln!(
                    text,
                    "{:<4} {:<20} fronts {:.3e} (cell {:.3e})  M {:.3e}  A {:.3e}",
                    if v.pass { "ok" } else { "FAIL" },
                    v.name,
                    v.front_violation,
                    v.cell,
                    v.density_violation_m,
                    v.density_violation_a
                );
            }
            em.file(Format::Json, ".txt", || text.clone())?;
            summary = text;
            ok = rep.all_pass();
        }
    }
    Ok(TaskOutput {
        summary,
        files: em.into_written(),
        ok,
    })
}

/// One randomised draw of the sign check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignCase {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub lambda0: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheckReport {
    pub seed: u64,
    /// Draws with `|1 - R0|` inside the band, left out of the count.
    pub skipped: usize,
    pub cases: Vec<SignCase>,
}

impl SignCheckReport {
    pub fn mismatches(&self) -> usize {
        self.cases.iter().filter(|c| !c.agree).count()
    }
}

/// Random heterogeneous profile built from smooth bumps.
pub fn random_profile<R: Rng>(rng: &mut R) -> CoefficientProfile {
    let mut bump = |base: f64| {
        let amp = rng.gen_range(-0.5..0.9) * base;
        ProfileSpec::bump(base, amp, rng.gen_range(-3.0..3.0), rng.gen_range(0.3..2.0))
    };
    let (r, gamma, mu1, mu2) = (bump(2.0), bump(1.0), bump(0.3), bump(0.6));
    let d = rng.gen_range(0.3..2.0);
    let nu = rng.gen_range(-0.5..0.5);
    CoefficientProfile::new(r, gamma, mu1, mu2, d, nu, 1.0, 1.0).expect("bumps stay positive")
}

/// Compares `sign(1 - R0)` with `sign(lambda0)` on `count` random
/// profile/interval draws with `|1 - R0| > band`.
pub fn sign_check(seed: u64, count: usize, band: f64, resolution: usize, strategy: Strategy) -> Result<SignCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SignCheckReport {
        seed,
        skipped: 0,
        cases: Vec::with_capacity(count),
    };
    while report.cases.len() < count {
        let draws: Vec<(CoefficientProfile, Interval)> = (0..count - report.cases.len())
            .map(|_| {
                let p = random_profile(&mut rng);
                let c = rng.gen_range(-2.0..2.0);
                let half = rng.gen_range(0.3..4.0);
                (p, Interval::new(c - half, c + half))
            })
            .collect();
        let results = parallel::try_map(strategy, &draws, |(p, iv)| {
            let r0 = compute_r0(*iv, p, resolution)?.r0;
            if (1.0 - r0).abs() <= band {
                return Ok::<_, Error>(None);
            }
            let lambda0 = compute_lambda0(*iv, p, resolution)?;
            Ok(Some(SignCase {
                p: iv.p,
                q: iv.q,
                r0,
                lambda0,
                agree: (1.0 - r0).signum() == lambda0.signum(),
            }))
        })?;
        for r in results {
            match r {
                Some(c) => report.cases.push(c),
                None => report.skipped += 1,
            }
        }
    }
    Ok(report)
}
