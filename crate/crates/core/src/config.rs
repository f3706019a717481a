//! Run configuration: a TOML document with a fixed set of sections.
//!
//! ```toml
//! [task]
//! kind = "simulate"          # optional; must match the CLI subcommand
//!
//! [profile]
//! D = 1.0
//! nu = 0.0
//! K1 = 1.0
//! K2 = 1.0
//! homogenization_radius = 50.0   # optional
//! far_field_tolerance = 1e-6     # optional
//!
//! [profile.r]                  # also gamma, mu1, mu2
//! kind = "bump"                # constant | step | bump | tabulated
//! base = 2.0
//! amplitude = 0.5
//! center = 0.0
//! width = 1.0
//!
//! [initial]
//! h0 = 2.0
//! a = 0.5                      # cosine hump, or `table` / `file`
//! b = 0.5
//!
//! [solver]
//! n = 256
//! dt = 0.005                   # or cfl = <factor>
//! mu = 1.0
//! horizon = 10.0
//! output_interval = 0.5
//! boundary_stencil_order = 2
//! ```
//!
//! Optional task sections: `[threshold]`, `[steady]`, `[classify]`,
//! `[mu_star]`, `[compare]`, and `[output]`. Unknown keys are errors, and
//! every violation is reported, not just the first.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::classify::Thresholds;
use crate::coefficients::{
    parse_columns, read_table, CoefficientProfile, ProfileSpec, DEFAULT_FAR_FIELD_TOLERANCE,
    DEFAULT_HOMOGENIZATION_RADIUS,
};
use crate::error::{ConfigErrors, Error, Result};
use crate::solver::{DtPolicy, InitialData, InitialShape, SolverConfig, StencilOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Simulate,
    Threshold,
    Steady,
    Classify,
    MuStar,
    Compare,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Simulate,
        TaskKind::Threshold,
        TaskKind::Steady,
        TaskKind::Classify,
        TaskKind::MuStar,
        TaskKind::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Simulate => "simulate",
            TaskKind::Threshold => "threshold",
            TaskKind::Steady => "steady",
            TaskKind::Classify => "classify",
            TaskKind::MuStar => "mu-star",
            TaskKind::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTask {
    /// Cells on the interval.
    pub resolution: usize,
    /// Defaults to `[-h0, h0]`.
    pub interval: Option<(f64, f64)>,
}

impl Default for ThresholdTask {
    fn default() -> Self {
        Self {
            resolution: 512,
            interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyTask {
    /// Cells per unit length.
    pub resolution: f64,
    /// Defaults to the geometric sequence from the smallest supercritical
    /// power of two.
    pub l_sequence: Option<Vec<f64>>,
    pub window: f64,
}

impl Default for SteadyTask {
    fn default() -> Self {
        Self {
            resolution: 16.0,
            l_sequence: None,
            window: crate::steady::DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuStarTask {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub tol: f64,
}

impl Default for MuStarTask {
    fn default() -> Self {
        Self {
            mu_lo: 0.05,
            mu_hi: 20.0,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTask {
    pub mus: Vec<f64>,
}

impl Default for CompareTask {
    fn default() -> Self {
        Self {
            mus: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ndjson,
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Ndjson, Format::Csv, Format::Json, Format::Svg];

    pub fn name(self) -> &'static str {
        match self {
            Format::Ndjson => "ndjson",
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Times at which full density profiles are written; the final state is
    /// always written.
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: Format::ALL.to_vec(),
            snapshot_times: Vec::new(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<TaskKind>,
    pub profile: CoefficientProfile,
    pub initial: InitialData,
    pub solver: SolverConfig,
    pub threshold: ThresholdTask,
    pub steady: SteadyTask,
    pub classify: Thresholds,
    pub mu_star: MuStarTask,
    pub compare: CompareTask,
    pub output: OutputConfig,
}

/// Reads and parses a configuration file; data files are resolved relative
/// to its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&text, base)
}

/// Parses a document, resolving data files against the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new("."))
}

pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let mut errs = ConfigErrors::default();
        errs.push("<document>", e.to_string().trim().to_string());
        Error::Config(errs)
    })?;
    let mut w = Walker {
        errors: ConfigErrors::default(),
        base,
    };
    let cfg = w.root(&root);
    match cfg {
        Some(cfg) if w.errors.is_empty() => Ok(cfg),
        _ => Err(Error::Config(w.errors)),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

struct Walker<'a> {
    errors: ConfigErrors,
    base: &'a Path,
}

impl Walker<'_> {
    fn keys(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.errors.push(
                    join(path, k),
                    format!("unknown key (expected one of: {})", allowed.join(", ")),
                );
            }
        }
    }

    fn table<'t>(&mut self, parent: &'t Table, path: &str, key: &str, required: bool) -> Option<&'t Table> {
        match parent.get(key) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(join(path, key), "expected a table");
                None
            }
            None => {
                if required {
                    self.errors.push(join(path, key), "missing section");
                }
                None
            }
        }
    }

    fn number(&mut self, field: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            Value::Float(x) => {
                self.errors.push(field, format!("must be finite, got {x}"));
                None
            }
            other => {
                self.errors
                    .push(field, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn opt_f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let v = t.get(key)?;
        self.number(&join(path, key), v)
    }

    fn req_f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.errors.push(join(path, key), "missing");
            return None;
        }
        self.opt_f64(t, path, key)
    }

    fn positive(&mut self, path: &str, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.errors
                    .push(join(path, key), format!("must be positive, got {x}"));
                None
            }
            None => None,
        }
    }

    fn req_positive(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let v = self.req_f64(t, path, key);
        self.positive(path, key, v)
    }

    fn opt_positive(&mut self, t: &Table, path: &str, key: &str, default: f64) -> Option<f64> {
        match t.contains_key(key) {
            true => {
                let v = self.opt_f64(t, path, key);
                self.positive(path, key, v)
            }
            false => Some(default),
        }
    }

    fn opt_usize(&mut self, t: &Table, path: &str, key: &str, default: usize) -> Option<usize> {
        match t.get(key) {
            None => Some(default),
            Some(Value::Integer(i)) if *i > 0 => Some(*i as usize),
            Some(v) => {
                self.errors.push(
                    join(path, key),
                    format!("expected a positive integer, got {v}"),
                );
                None
            }
        }
    }

    fn string<'t>(&mut self, t: &'t Table, path: &str, key: &str) -> Option<&'t str> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                self.errors
                    .push(join(path, key), format!("expected a string, got {}", v.type_str()));
                None
            }
            None => None,
        }
    }

    fn numbers(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let field = join(path, key);
        match t.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, v) in items.iter().enumerate() {
                    match self.number(&format!("{field}[{i}]"), v) {
                        Some(x) => out.push(x),
                        None => ok = false,
                    }
                }
                ok.then_some(out)
            }
            v => {
                self.errors
                    .push(field, format!("expected an array, got {}", v.type_str()));
                None
            }
        }
    }

    /// Array of fixed-width numeric rows.
    fn rows(&mut self, t: &Table, path: &str, key: &str, width: usize) -> Option<Vec<Vec<f64>>> {
        let field = join(path, key);
        let Value::Array(items) = t.get(key)? else {
            self.errors.push(field, "expected an array of rows");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, row) in items.iter().enumerate() {
            let rf = format!("{field}[{i}]");
            match row {
                Value::Array(cols) if cols.len() == width => {
                    let vals: Vec<Option<f64>> = cols
                        .iter()
                        .enumerate()
                        .map(|(j, v)| self.number(&format!("{rf}[{j}]"), v))
                        .collect();
                    if vals.iter().all(Option::is_some) {
                        out.push(vals.into_iter().flatten().collect());
                    } else {
                        ok = false;
                    }
                }
                _ => {
                    self.errors
                        .push(rf, format!("expected a row of {width} numbers"));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn data_file(&mut self, field: &str, name: &str, width: usize) -> Option<Vec<Vec<f64>>> {
        let path = self.base.join(name);
        match std::fs::read_to_string(&path) {
            Ok(text) => match parse_columns(&text, width) {
                Ok(rows) => Some(rows),
                Err(m) => {
                    self.errors.push(field, format!("{}: {m}", path.display()));
                    None
                }
            },
            Err(e) => {
                self.errors
                    .push(field, format!("cannot read {}: {e}", path.display()));
                None
            }
        }
    }

    fn root(&mut self, root: &Table) -> Option<RunConfig> {
        self.keys(
            root,
            "",
            &[
                "task", "profile", "initial", "solver", "threshold", "steady", "classify", "mu_star",
                "compare", "output",
            ],
        );
        let task = self.task(root);
        let profile = self.table(root, "", "profile", true).and_then(|t| self.profile(t));
        let initial = self.table(root, "", "initial", true).and_then(|t| self.initial(t));
        let empty = Table::new();
        let t = self.table(root, "", "solver", false).unwrap_or(&empty);
        let solver = self.solver(t);
        let t = self.table(root, "", "threshold", false).unwrap_or(&empty);
        let threshold = self.threshold(t);
        let t = self.table(root, "", "steady", false).unwrap_or(&empty);
        let steady = self.steady(t);
        let t = self.table(root, "", "classify", false).unwrap_or(&empty);
        let classify = self.classify(t);
        let t = self.table(root, "", "mu_star", false).unwrap_or(&empty);
        let mu_star = self.mu_star(t);
        let t = self.table(root, "", "compare", false).unwrap_or(&empty);
        let compare = self.compare(t);
        let t = self.table(root, "", "output", false).unwrap_or(&empty);
        let output = self.output(t);

        let (profile, initial) = (profile?, initial?);
        if let Err(e) = initial.validate(&profile) {
            self.errors.push("initial", e.to_string());
        }
        Some(RunConfig {
            task: task?,
            profile,
            initial,
            solver: solver?,
            threshold: threshold?,
            steady: steady?,
            classify: classify?,
            mu_star: mu_star?,
            compare: compare?,
            output: output?,
        })
    }

    fn task(&mut self, root: &Table) -> Option<Option<TaskKind>> {
        let Some(t) = self.table(root, "", "task", false) else {
            return Some(None);
        };
        self.keys(t, "task", &["kind"]);
        let Some(kind) = self.string(t, "task", "kind") else {
            if !t.contains_key("kind") {
                self.errors.push("task.kind", "missing");
            }
            return None;
        };
        match TaskKind::parse(kind) {
            Some(k) => Some(Some(k)),
            None => {
                let names: Vec<&str> = TaskKind::ALL.iter().map(|k| k.name()).collect();
                self.errors.push(
                    "task.kind",
                    format!("unknown task `{kind}` (expected one of: {})", names.join(", ")),
                );
                None
            }
        }
    }

    fn profile(&mut self, t: &Table) -> Option<CoefficientProfile> {
        let path = "profile";
        self.keys(
            t,
            path,
            &[
                "D",
                "nu",
                "K1",
                "K2",
                "homogenization_radius",
                "far_field_tolerance",
                "r",
                "gamma",
                "mu1",
                "mu2",
            ],
        );
        let d = self.req_positive(t, path, "D");
        let nu = self.req_f64(t, path, "nu");
        let k1 = self.req_positive(t, path, "K1");
        let k2 = self.req_positive(t, path, "K2");
        let radius = self.opt_positive(t, path, "homogenization_radius", DEFAULT_HOMOGENIZATION_RADIUS);
        let tol = self.opt_positive(t, path, "far_field_tolerance", DEFAULT_FAR_FIELD_TOLERANCE);
        let mut specs = Vec::new();
        for name in ["r", "gamma", "mu1", "mu2"] {
            let sp = join(path, name);
            specs.push(
                self.table(t, path, name, true)
                    .and_then(|st| self.spec(st, &sp)),
            );
        }
        let [r, gamma, mu1, mu2]: [Option<ProfileSpec>; 4] = specs.try_into().ok()?;
        let p = CoefficientProfile {
            r: r?,
            gamma: gamma?,
            mu1: mu1?,
            mu2: mu2?,
            d: d?,
            nu: nu?,
            k1: k1?,
            k2: k2?,
            homogenization_radius: radius?,
            far_field_tolerance: tol?,
        };
        match p.validate() {
            Ok(()) => Some(p),
            Err(e) => {
                self.errors.push(path, e.to_string());
                None
            }
        }
    }

    fn spec(&mut self, t: &Table, path: &str) -> Option<ProfileSpec> {
        let kind = match self.string(t, path, "kind") {
            Some(k) => k,
            None => {
                if !t.contains_key("kind") {
                    self.errors.push(join(path, "kind"), "missing");
                }
                return None;
            }
        };
        let spec = match kind {
            "constant" => {
                self.keys(t, path, &["kind", "value"]);
                ProfileSpec::Constant {
                    value: self.req_f64(t, path, "value")?,
                }
            }
            "step" => {
                self.keys(t, path, &["kind", "left", "right", "at"]);
                let (left, right, at) = (
                    self.req_f64(t, path, "left"),
                    self.req_f64(t, path, "right"),
                    self.req_f64(t, path, "at"),
                );
                ProfileSpec::Step {
                    left: left?,
                    right: right?,
                    at: at?,
                }
            }
            "bump" => {
                self.keys(t, path, &["kind", "base", "amplitude", "center", "width"]);
                let (base, amplitude, center, width) = (
                    self.req_f64(t, path, "base"),
                    self.req_f64(t, path, "amplitude"),
                    self.req_f64(t, path, "center"),
                    self.req_f64(t, path, "width"),
                );
                ProfileSpec::Bump {
                    base: base?,
                    amplitude: amplitude?,
                    center: center?,
                    width: width?,
                }
            }
            "tabulated" => {
                self.keys(t, path, &["kind", "points", "file", "limit"]);
                let limit = self.req_f64(t, path, "limit");
                let points = match (t.contains_key("points"), t.contains_key("file")) {
                    (true, true) => {
                        self.errors
                            .push(path, "`points` and `file` are mutually exclusive");
                        None
                    }
                    (false, false) => {
                        self.errors.push(path, "tabulated profile needs `points` or `file`");
                        None
                    }
                    (true, false) => self.rows(t, path, "points", 2),
                    (false, true) => {
                        let name = self.string(t, path, "file")?;
                        let p = self.base.join(name);
                        match read_table(&p) {
                            Ok(rows) => Some(rows.into_iter().map(|(x, v)| vec![x, v]).collect()),
                            Err(e) => {
                                self.errors.push(join(path, "file"), e.to_string());
                                None
                            }
                        }
                    }
                };
                ProfileSpec::Tabulated {
                    points: points?.into_iter().map(|r| (r[0], r[1])).collect(),
                    limit: limit?,
                }
            }
            other => {
                self.errors.push(
                    join(path, "kind"),
                    format!("unknown profile kind `{other}` (expected constant, step, bump or tabulated)"),
                );
                return None;
            }
        };
        match spec.validate() {
            Ok(()) => Some(spec),
            Err(e) => {
                self.errors.push(path, e.to_string());
                None
            }
        }
    }

    fn initial(&mut self, t: &Table) -> Option<InitialData> {
        let path = "initial";
        self.keys(t, path, &["h0", "a", "b", "table", "file"]);
        let h0 = self.req_positive(t, path, "h0");
        let analytic = t.contains_key("a") || t.contains_key("b");
        let tabulated = [t.contains_key("table"), t.contains_key("file")];
        let sources = analytic as usize + tabulated.iter().filter(|&&b| b).count();
        if sources > 1 {
            self.errors.push(
                path,
                "analytic (`a`, `b`), `table` and `file` initial data are mutually exclusive",
            );
            return None;
        }
        let shape = if tabulated[0] {
            let rows = self.rows(t, path, "table", 3)?;
            InitialShape::Table {
                rows: rows.into_iter().map(|r| (r[0], r[1], r[2])).collect(),
            }
        } else if tabulated[1] {
            let name = self.string(t, path, "file")?.to_string();
            let rows = self.data_file(&join(path, "file"), &name, 3)?;
            InitialShape::Table {
                rows: rows.into_iter().map(|r| (r[0], r[1], r[2])).collect(),
            }
        } else {
            let a = self.req_positive(t, path, "a");
            let b = self.req_positive(t, path, "b");
            InitialShape::Cosine { a: a?, b: b? }
        };
        Some(InitialData { h0: h0?, shape })
    }

    fn solver(&mut self, t: &Table) -> Option<SolverConfig> {
        let path = "solver";
        self.keys(
            t,
            path,
            &["n", "dt", "cfl", "mu", "horizon", "output_interval", "boundary_stencil_order"],
        );
        let d = SolverConfig::default();
        let n = self.opt_usize(t, path, "n", d.n);
        let dt = match (t.contains_key("dt"), t.contains_key("cfl")) {
            (true, true) => {
                self.errors.push(path, "`dt` and `cfl` are mutually exclusive");
                None
            }
            (false, true) => {
                let f = self.opt_f64(t, path, "cfl");
                self.positive(path, "cfl", f)
                    .map(|factor| DtPolicy::Cfl { factor })
            }
            (true, false) => {
                let v = self.opt_f64(t, path, "dt");
                self.positive(path, "dt", v).map(|dt| DtPolicy::Fixed { dt })
            }
            (false, false) => Some(d.dt),
        };
        let mu = self.opt_positive(t, path, "mu", d.mu);
        let horizon = match t.contains_key("horizon") {
            true => match self.opt_f64(t, path, "horizon") {
                Some(h) if h >= 0.0 => Some(h),
                Some(h) => {
                    self.errors
                        .push("solver.horizon", format!("must be non-negative, got {h}"));
                    None
                }
                None => None,
            },
            false => Some(d.horizon),
        };
        let output_interval = self.opt_positive(t, path, "output_interval", d.output_interval);
        let order = match t.get("boundary_stencil_order") {
            None => Some(d.boundary_stencil_order),
            Some(Value::Integer(1)) => Some(StencilOrder::First),
            Some(Value::Integer(2)) => Some(StencilOrder::Second),
            Some(v) => {
                self.errors.push(
                    "solver.boundary_stencil_order",
                    format!("must be 1 or 2, got {v}"),
                );
                None
            }
        };
        let cfg = SolverConfig {
            n: n?,
            dt: dt?,
            mu: mu?,
            horizon: horizon?,
            output_interval: output_interval?,
            boundary_stencil_order: order?,
        };
        match cfg.validate() {
            Ok(()) => Some(cfg),
            Err(e) => {
                self.errors.push(path, e.to_string());
                None
            }
        }
    }

    fn threshold(&mut self, t: &Table) -> Option<ThresholdTask> {
        let path = "threshold";
        self.keys(t, path, &["resolution", "interval"]);
        let d = ThresholdTask::default();
        let resolution = self.opt_usize(t, path, "resolution", d.resolution);
        let interval = match self.numbers(t, path, "interval") {
            Some(v) if v.len() == 2 && v[0] < v[1] => Some(Some((v[0], v[1]))),
            Some(v) => {
                self.errors.push(
                    "threshold.interval",
                    format!("expected [p, q] with p < q, got {v:?}"),
                );
                None
            }
            None if t.contains_key("interval") => None,
            None => Some(None),
        };
        Some(ThresholdTask {
            resolution: resolution?,
            interval: interval?,
        })
    }

    fn steady(&mut self, t: &Table) -> Option<SteadyTask> {
        let path = "steady";
        self.keys(t, path, &["resolution", "l_sequence", "window"]);
        let d = SteadyTask::default();
        let resolution = self.opt_positive(t, path, "resolution", d.resolution);
        let window = self.opt_positive(t, path, "window", d.window);
        let l_sequence = match self.numbers(t, path, "l_sequence") {
            Some(v) if !v.is_empty() && v[0] > 0.0 && v.windows(2).all(|w| w[1] > w[0]) => Some(Some(v)),
            Some(v) => {
                self.errors.push(
                    "steady.l_sequence",
                    format!("must be a non-empty, positive, strictly increasing list, got {v:?}"),
                );
                None
            }
            None if t.contains_key("l_sequence") => None,
            None => Some(None),
        };
        Some(SteadyTask {
            resolution: resolution?,
            l_sequence: l_sequence?,
            window: window?,
        })
    }

    fn classify(&mut self, t: &Table) -> Option<Thresholds> {
        let path = "classify";
        self.keys(
            t,
            path,
            &["eps_r", "eps_g", "eps_d", "window_fraction", "r0_resolution"],
        );
        let d = Thresholds::default();
        let th = Thresholds {
            eps_r: self.opt_positive(t, path, "eps_r", d.eps_r)?,
            eps_g: self.opt_positive(t, path, "eps_g", d.eps_g)?,
            eps_d: self.opt_positive(t, path, "eps_d", d.eps_d)?,
            window_fraction: self.opt_positive(t, path, "window_fraction", d.window_fraction)?,
            r0_resolution: self.opt_usize(t, path, "r0_resolution", d.r0_resolution)?,
        };
        match th.validate() {
            Ok(()) => Some(th),
            Err(e) => {
                self.errors.push(path, e.to_string());
                None
            }
        }
    }

    fn mu_star(&mut self, t: &Table) -> Option<MuStarTask> {
        let path = "mu_star";
        self.keys(t, path, &["mu_lo", "mu_hi", "tol"]);
        let d = MuStarTask::default();
        let mu_lo = self.opt_positive(t, path, "mu_lo", d.mu_lo);
        let mu_hi = self.opt_positive(t, path, "mu_hi", d.mu_hi);
        let tol = self.opt_positive(t, path, "tol", d.tol);
        let task = MuStarTask {
            mu_lo: mu_lo?,
            mu_hi: mu_hi?,
            tol: tol?,
        };
        if task.mu_hi <= task.mu_lo {
            self.errors.push("mu_star.mu_hi", "must exceed mu_lo");
            return None;
        }
        if task.tol >= 1.0 {
            self.errors.push("mu_star.tol", "must be below 1");
            return None;
        }
        Some(task)
    }

    fn compare(&mut self, t: &Table) -> Option<CompareTask> {
        let path = "compare";
        self.keys(t, path, &["mus"]);
        match self.numbers(t, path, "mus") {
            Some(v) if v.iter().all(|&m| m > 0.0) && v.windows(2).all(|w| w[1] > w[0]) => {
                Some(CompareTask { mus: v })
            }
            Some(v) => {
                self.errors.push(
                    "compare.mus",
                    format!("must be positive and strictly increasing, got {v:?}"),
                );
                None
            }
            None if t.contains_key("mus") => None,
            None => Some(CompareTask::default()),
        }
    }

    fn output(&mut self, t: &Table) -> Option<OutputConfig> {
        let path = "output";
        self.keys(t, path, &["directory", "formats", "snapshot_times"]);
        let directory = self.string(t, path, "directory").map(PathBuf::from);
        let formats = match t.get("formats") {
            None => Some(Format::ALL.to_vec()),
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                let mut ok = true;
                for (i, v) in items.iter().enumerate() {
                    match v.as_str().and_then(|s| Format::ALL.into_iter().find(|f| f.name() == s)) {
                        Some(f) if !out.contains(&f) => out.push(f),
                        Some(_) => {}
                        None => {
                            self.errors.push(
                                format!("output.formats[{i}]"),
                                format!("unknown format {v} (expected ndjson, csv, json or svg)"),
                            );
                            ok = false;
                        }
                    }
                }
                ok.then_some(out)
            }
            Some(v) => {
                self.errors
                    .push("output.formats", format!("expected an array, got {}", v.type_str()));
                None
            }
        };
        let snapshot_times = match self.numbers(t, path, "snapshot_times") {
            Some(v) if v.iter().all(|&x| x >= 0.0) => Some(v),
            Some(v) => {
                self.errors.push(
                    "output.snapshot_times",
                    format!("times must be non-negative, got {v:?}"),
                );
                None
            }
            None if t.contains_key("snapshot_times") => None,
            None => Some(Vec::new()),
        };
        Some(OutputConfig {
            directory,
            formats: formats?,
            snapshot_times: snapshot_times?,
        })
    }
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn spec_table(spec: &ProfileSpec) -> Table {
    let mut t = Table::new();
    t.insert("kind".into(), Value::String(spec.kind().into()));
    match spec {
        ProfileSpec::Constant { value } => {
            t.insert("value".into(), Value::Float(*value));
        }
        ProfileSpec::Step { left, right, at } => {
            t.insert("left".into(), Value::Float(*left));
            t.insert("right".into(), Value::Float(*right));
            t.insert("at".into(), Value::Float(*at));
        }
        ProfileSpec::Bump {
            base,
            amplitude,
            center,
            width,
        } => {
            t.insert("base".into(), Value::Float(*base));
            t.insert("amplitude".into(), Value::Float(*amplitude));
            t.insert("center".into(), Value::Float(*center));
            t.insert("width".into(), Value::Float(*width));
        }
        ProfileSpec::Tabulated { points, limit } => {
            let rows = points.iter().map(|&(x, v)| floats(&[x, v])).collect();
            t.insert("points".into(), Value::Array(rows));
            t.insert("limit".into(), Value::Float(*limit));
        }
    }
    t
}

impl RunConfig {
    /// A configuration with every optional section at its default.
    pub fn new(profile: CoefficientProfile, initial: InitialData, solver: SolverConfig) -> Self {
        Self {
            task: None,
            profile,
            initial,
            solver,
            threshold: ThresholdTask::default(),
            steady: SteadyTask::default(),
            classify: Thresholds::default(),
            mu_star: MuStarTask::default(),
            compare: CompareTask::default(),
            output: OutputConfig::default(),
        }
    }

    /// Canonical document: data files are inlined and every default is
    /// spelled out, so parsing it back reproduces `self` exactly.
    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        if let Some(task) = self.task {
            let mut t = Table::new();
            t.insert("kind".into(), Value::String(task.name().into()));
            root.insert("task".into(), Value::Table(t));
        }

        let p = &self.profile;
        let mut t = Table::new();
        t.insert("D".into(), Value::Float(p.d));
        t.insert("nu".into(), Value::Float(p.nu));
        t.insert("K1".into(), Value::Float(p.k1));
        t.insert("K2".into(), Value::Float(p.k2));
        t.insert("homogenization_radius".into(), Value::Float(p.homogenization_radius));
        t.insert("far_field_tolerance".into(), Value::Float(p.far_field_tolerance));
        for (name, spec) in p.specs() {
            t.insert(name.into(), Value::Table(spec_table(spec)));
        }
        root.insert("profile".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("h0".into(), Value::Float(self.initial.h0));
        match &self.initial.shape {
            InitialShape::Cosine { a, b } => {
                t.insert("a".into(), Value::Float(*a));
                t.insert("b".into(), Value::Float(*b));
            }
            InitialShape::Table { rows } => {
                let rows = rows.iter().map(|&(x, m, a)| floats(&[x, m, a])).collect();
                t.insert("table".into(), Value::Array(rows));
            }
        }
        root.insert("initial".into(), Value::Table(t));

        let s = &self.solver;
        let mut t = Table::new();
        t.insert("n".into(), Value::Integer(s.n as i64));
        match s.dt {
            DtPolicy::Fixed { dt } => t.insert("dt".into(), Value::Float(dt)),
            DtPolicy::Cfl { factor } => t.insert("cfl".into(), Value::Float(factor)),
        };
        t.insert("mu".into(), Value::Float(s.mu));
        t.insert("horizon".into(), Value::Float(s.horizon));
        t.insert("output_interval".into(), Value::Float(s.output_interval));
        t.insert(
            "boundary_stencil_order".into(),
            Value::Integer(i64::from(u8::from(s.boundary_stencil_order))),
        );
        root.insert("solver".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("resolution".into(), Value::Integer(self.threshold.resolution as i64));
        if let Some((a, b)) = self.threshold.interval {
            t.insert("interval".into(), floats(&[a, b]));
        }
        root.insert("threshold".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("resolution".into(), Value::Float(self.steady.resolution));
        if let Some(seq) = &self.steady.l_sequence {
            t.insert("l_sequence".into(), floats(seq));
        }
        t.insert("window".into(), Value::Float(self.steady.window));
        root.insert("steady".into(), Value::Table(t));

        let c = &self.classify;
        let mut t = Table::new();
        t.insert("eps_r".into(), Value::Float(c.eps_r));
        t.insert("eps_g".into(), Value::Float(c.eps_g));
        t.insert("eps_d".into(), Value::Float(c.eps_d));
        t.insert("window_fraction".into(), Value::Float(c.window_fraction));
        t.insert("r0_resolution".into(), Value::Integer(c.r0_resolution as i64));
        root.insert("classify".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("mu_lo".into(), Value::Float(self.mu_star.mu_lo));
        t.insert("mu_hi".into(), Value::Float(self.mu_star.mu_hi));
        t.insert("tol".into(), Value::Float(self.mu_star.tol));
        root.insert("mu_star".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("mus".into(), floats(&self.compare.mus));
        root.insert("compare".into(), Value::Table(t));

        let o = &self.output;
        let mut t = Table::new();
        if let Some(dir) = &o.directory {
            t.insert("directory".into(), Value::String(dir.display().to_string()));
        }
        t.insert(
            "formats".into(),
            Value::Array(o.formats.iter().map(|f| Value::String(f.name().into())).collect()),
        );
        t.insert("snapshot_times".into(), floats(&o.snapshot_times));
        root.insert("output".into(), Value::Table(t));

        toml::to_string(&root).expect("plain tables always serialise")
    }

    /// First 12 hex digits of the SHA-256 of the canonical document, with
    /// the output directory left out so moving results does not rename them.
    pub fn run_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.directory = None;
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[profile]
D = 1.0
nu = 0.0
K1 = 1
K2 = 1.0

[profile.r]
kind = "constant"
value = 2.0

[profile.gamma]
kind = "constant"
value = 1.0

[profile.mu1]
kind = "constant"
value = 0.2

[profile.mu2]
kind = "constant"
value = 0.5

[initial]
h0 = 2.0
a = 0.5
b = 0.5
"#;

    fn issues(text: &str) -> ConfigErrors {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.classify, Thresholds::default());
        assert_eq!(cfg.mu_star, MuStarTask::default());
        assert_eq!(cfg.compare.mus, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.output.formats, Format::ALL.to_vec());
        assert_eq!(cfg.task, None);
        assert!(cfg.profile.is_homogeneous());
        assert_eq!(cfg.profile.k1, 1.0);
    }

    #[test]
    fn negative_diffusion_names_the_field() {
        let e = issues(&MINIMAL.replace("D = 1.0", "D = -1.0"));
        assert!(e.mentions("profile.D"), "{e}");
    }

    #[test]
    fn all_violations_are_reported() {
        let text = MINIMAL
            .replace("D = 1.0", "D = -1.0")
            .replace("h0 = 2.0", "h0 = 0.0\nbogus = 1")
            .replace("value = 0.5", "value = \"x\"");
        let e = issues(&text);
        assert!(e.mentions("profile.D"));
        assert!(e.mentions("initial.h0"));
        assert!(e.mentions("initial.bogus"));
        assert!(e.mentions("profile.mu2.value"));
        assert!(e.0.len() >= 4, "{e}");
    }

    #[test]
    fn analytic_and_tabulated_initial_data_exclude_each_other() {
        let text = MINIMAL.replace(
            "b = 0.5",
            "b = 0.5\ntable = [[-2.0, 0.0, 0.0], [0.0, 0.5, 0.5], [2.0, 0.0, 0.0]]",
        );
        assert!(issues(&text).mentions("initial"));
    }

    #[test]
    fn unknown_sections_and_keys_are_rejected() {
        let e = issues(&format!("{MINIMAL}\n[extra]\nx = 1\n"));
        assert!(e.mentions("extra"));
        let e = issues(&format!("{MINIMAL}\n[solver]\nsteps = 3\n"));
        assert!(e.mentions("solver.steps"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = issues("[profile\nD = 1");
        assert!(e.mentions("<document>"));
        assert!(e.to_string().contains("line"), "{e}");
    }

    #[test]
    fn tabulated_sources_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.txt"), "# x r\n-1 2.0\n0 3.0\n1 2.0\n").unwrap();
        std::fs::write(
            dir.path().join("init.txt"),
            "-2 0 0\n0 0.5 0.4\n2 0 0\n",
        )
        .unwrap();
        let text = MINIMAL
            .replace(
                "[profile.r]\nkind = \"constant\"\nvalue = 2.0",
                "[profile.r]\nkind = \"tabulated\"\nfile = \"r.txt\"\nlimit = 2.0",
            )
            .replace("a = 0.5\nb = 0.5", "file = \"init.txt\"");
        let path = dir.path().join("run.toml");
        std::fs::write(&path, &text).unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.profile.r.value(0.0), 3.0);
        assert_eq!(cfg.profile.r.value(5.0), 2.0);
        assert_eq!(cfg.initial.eval(0.0), (0.5, 0.4));
        // Inlined on serialisation, so the round trip needs no files.
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn task_kind_is_checked() {
        let cfg = parse_config(&format!("[task]\nkind = \"mu-star\"\n{MINIMAL}")).unwrap();
        assert_eq!(cfg.task, Some(TaskKind::MuStar));
        assert!(issues(&format!("[task]\nkind = \"fly\"\n{MINIMAL}")).mentions("task.kind"));
    }

    #[test]
    fn dt_and_cfl_exclude_each_other() {
        let e = issues(&format!("{MINIMAL}\n[solver]\ndt = 0.01\ncfl = 0.5\n"));
        assert!(e.mentions("solver"));
    }

    #[test]
    fn hash_is_stable_and_ignores_directory() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output.directory = Some("elsewhere".into());
        assert_eq!(a.run_hash(), b.run_hash());
        assert_eq!(a.run_hash().len(), 12);
        b.solver.mu = 2.0;
        assert_ne!(a.run_hash(), b.run_hash());
    }

    fn spec_strategy() -> impl Strategy<Value = ProfileSpec> {
        prop_oneof![
            (0.01..10.0f64).prop_map(ProfileSpec::constant),
            (0.01..10.0f64, -0.9..2.0f64, -5.0..5.0f64, 0.1..3.0f64)
                .prop_map(|(b, a, c, w)| ProfileSpec::bump(b, a * b, c, w)),
            (0.01..10.0f64, proptest::collection::vec(0.01..5.0f64, 1..8)).prop_map(|(limit, vals)| {
                ProfileSpec::Tabulated {
                    points: vals
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| (-3.0 + 0.7 * i as f64, v))
                        .collect(),
                    limit,
                }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_reproduces_runs(
            r in spec_strategy(),
            g in spec_strategy(),
            m1 in spec_strategy(),
            m2 in spec_strategy(),
            d in 0.05..5.0f64,
            nu in -1.0..1.0f64,
            h0 in 0.1..10.0f64,
            a in 0.01..0.99f64,
            n in 8usize..200,
            dt in 1e-4..0.1f64,
        ) {
            let profile = CoefficientProfile::new(r, g, m1, m2, d, nu, 1.0, 1.5).unwrap();
            let solver = SolverConfig { n: 2 * n, dt: DtPolicy::Fixed { dt }, ..SolverConfig::default() };
            let cfg = RunConfig::new(profile, InitialData::cosine(h0, a, a), solver);
            let back = parse_config(&cfg.to_toml()).unwrap();
            prop_assert_eq!(&back, &cfg);
            for k in 0..1000 {
                let x = -20.0 + 0.04 * k as f64;
                prop_assert_eq!(back.profile.rates(x), cfg.profile.rates(x));
                prop_assert_eq!(back.initial.eval(x), cfg.initial.eval(x));
            }
            prop_assert_eq!(back.run_hash(), cfg.run_hash());
        }
    }
}
