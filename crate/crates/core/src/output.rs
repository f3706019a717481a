//! Serialisation of results and plot emission.
//!
//! Data files are pure functions of the results: floats are written with 17
//! significant digits and nothing time- or host-dependent is embedded. Plots
//! are standalone SVG documents carrying a `<metadata>` block with the axis
//! ranges as JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{Format, TaskKind};
use crate::error::{Error, Result};
use crate::interp::UniformSamples;
use crate::solver::{Snapshot, Trajectory};
use crate::steady::StationarySolution;

/// Round-trip float formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One `{t, g, h, sup_M, sup_A}` record per output time.
pub fn trajectory_ndjson(tr: &Trajectory) -> String {
    let mut out = String::new();
    for s in &tr.snapshots {
        let _ = writeln!(
            out,
            "{{\"t\":{},\"g\":{},\"h\":{},\"sup_M\":{},\"sup_A\":{}}}",
            num(s.t),
            num(s.g),
            num(s.h),
            num(s.sup_m),
            num(s.sup_a)
        );
    }
    out
}

/// Full fields of one snapshot: `y, x, M, A`.
pub fn snapshot_csv(s: &Snapshot, h0: f64) -> String {
    let n = s.m.len().saturating_sub(1).max(1);
    let mut out = String::from("y,x,M,A\n");
    for (i, x) in s.xs().into_iter().enumerate() {
        let y = -h0 + 2.0 * h0 * i as f64 / n as f64;
        let _ = writeln!(out, "{},{},{},{}", num(y), num(x), num(s.m[i]), num(s.a[i]));
    }
    out
}

pub fn r0f_csv(trace: &[(f64, f64)]) -> String {
    let mut out = String::from("t,R0F\n");
    for &(t, r) in trace {
        let _ = writeln!(out, "{},{}", num(t), num(r));
    }
    out
}

pub fn steady_csv(sol: &StationarySolution) -> String {
    let mut out = String::from("x,M_star,A_star\n");
    for ((x, m), a) in sol.x.iter().zip(&sol.m_star).zip(&sol.a_star) {
        let _ = writeln!(out, "{},{},{}", num(*x), num(*m), num(*a));
    }
    out
}

/// Columns of equal length under a header.
pub fn columns_csv(header: &[&str], cols: &[&[f64]]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    let rows = cols.iter().map(|c| c.len()).min().unwrap_or(0);
    for i in 0..rows {
        let row: Vec<String> = cols.iter().map(|c| num(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON with a trailing newline. `serde_json` writes the shortest
/// representation that parses back to the same float.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

/// Picks, for each requested time, the nearest recorded snapshot, plus the
/// final one. Indices are sorted and unique.
pub fn snapshot_indices(tr: &Trajectory, times: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = times
        .iter()
        .filter_map(|&t| {
            (0..tr.snapshots.len()).min_by(|&a, &b| {
                (tr.snapshots[a].t - t)
                    .abs()
                    .total_cmp(&(tr.snapshots[b].t - t).abs())
            })
        })
        .collect();
    idx.extend(tr.snapshots.len().checked_sub(1));
    idx.sort_unstable();
    idx.dedup();
    idx
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Widens a degenerate range so it can be drawn.
fn drawable((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn open_svg(out: &mut String, meta: &serde_json::Value, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<metadata>{}</metadata>", escape(&meta.to_string()));
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let xv = f.x.0 + s * (f.x.1 - f.x.0);
        let yv = f.y.0 + s * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{y0}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            y0 + 5.0,
            y0 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn line_chart(
    kind: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    level: Option<f64>,
) -> String {
    let x = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = span(
        series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(level),
    );
    let meta = json!({ "kind": kind, "x_range": [x.0, x.1], "y_range": [y.0, y.1] });
    let f = Frame {
        x: drawable(x),
        y: drawable(y),
    };
    let mut out = String::new();
    open_svg(&mut out, &meta, title);
    axes(&mut out, &f, xlabel, ylabel);
    if let Some(l) = level {
        let py = f.py(l);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"grey\" stroke-dasharray=\"6 4\"/>",
            WIDTH - RIGHT
        );
    }
    for (k, s) in series.iter().enumerate() {
        match s.points.as_slice() {
            [] => {}
            [(px, py)] => {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
                    f.px(*px),
                    f.py(*py),
                    s.color
                );
            }
            pts => {
                let coords: Vec<String> = pts
                    .iter()
                    .map(|&(a, b)| format!("{:.2},{:.2}", f.px(a), f.py(b)))
                    .collect();
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                    coords.join(" "),
                    s.color
                );
            }
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{ly:.2}\" fill=\"{}\">{}</text>",
            LEFT + 10.0,
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// `g(t)` and `h(t)`.
pub fn fronts_svg(tr: &Trajectory) -> String {
    let g = tr.snapshots.iter().map(|s| (s.t, s.g)).collect();
    let h = tr.snapshots.iter().map(|s| (s.t, s.h)).collect();
    line_chart(
        "fronts",
        "Invasion fronts",
        "t",
        "x",
        &[
            Series {
                label: "h(t)",
                color: "#c0392b",
                points: h,
            },
            Series {
                label: "g(t)",
                color: "#2c3e80",
                points: g,
            },
        ],
        None,
    )
}

/// `R0F(t)` with the level-one line.
pub fn r0f_svg(trace: &[(f64, f64)]) -> String {
    line_chart(
        "r0f",
        "Threshold on the occupied habitat",
        "t",
        "R0F",
        &[Series {
            label: "R0F(t)",
            color: "#1e8449",
            points: trace.to_vec(),
        }],
        Some(1.0),
    )
}

/// Stationary profiles on the truncated domain.
pub fn steady_svg(sol: &StationarySolution) -> String {
    let zip = |v: &[f64]| sol.x.iter().copied().zip(v.iter().copied()).collect();
    line_chart(
        "steady",
        "Stationary state",
        "x",
        "density",
        &[
            Series {
                label: "M*",
                color: "#c0392b",
                points: zip(&sol.m_star),
            },
            Series {
                label: "A*",
                color: "#2c3e80",
                points: zip(&sol.a_star),
            },
        ],
        None,
    )
}

const HEAT_COLUMNS: usize = 160;
const HEAT_ROWS: usize = 120;
const HEAT_LEVELS: usize = 32;

fn heat_color(s: f64) -> String {
    // Piecewise-linear dark blue -> teal -> yellow.
    const STOPS: [(f64, [f64; 3]); 3] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let s = s.clamp(0.0, 1.0);
    let k = if s <= 0.5 { 0 } else { 1 };
    let (s0, c0) = STOPS[k];
    let (s1, c1) = STOPS[k + 1];
    let w = (s - s0) / (s1 - s0);
    let c: Vec<u8> = (0..3)
        .map(|i| (c0[i] + w * (c1[i] - c0[i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Space-time heatmap of `M`; x spans `[min g, max h]` over the run.
pub fn heatmap_svg(tr: &Trajectory) -> String {
    let snaps = &tr.snapshots;
    let x = span(snaps.iter().flat_map(|s| [s.g, s.h]));
    let t = span(snaps.iter().map(|s| s.t));
    let v = span(snaps.iter().map(|s| s.sup_m).chain([0.0]));
    let meta = json!({
        "kind": "heatmap",
        "x_range": [x.0, x.1],
        "t_range": [t.0, t.1],
        "value_range": [v.0, v.1],
    });
    let f = Frame {
        x: drawable(x),
        y: drawable(t),
    };
    let mut out = String::new();
    open_svg(&mut out, &meta, "Adult density M(t, x)");

    let rows = snaps.len().min(HEAT_ROWS);
    let scale = if v.1 > 0.0 { v.1 } else { 1.0 };
    let (px0, px1) = (f.px(x.0), f.px(x.1));
    let dpx = (px1 - px0) / HEAT_COLUMNS as f64;
    for r in 0..rows {
        let k = if rows == 1 {
            0
        } else {
            r * (snaps.len() - 1) / (rows - 1)
        };
        let s = &snaps[k];
        let (top, bottom) = if rows == 1 {
            (f.py(f.y.1), f.py(f.y.0))
        } else {
            let half = 0.5 * (t.1 - t.0) / (rows - 1) as f64;
            (f.py((s.t + half).min(t.1)), f.py((s.t - half).max(t.0)))
        };
        let n = s.m.len().saturating_sub(1).max(1);
        let field = UniformSamples::new(s.g, (s.h - s.g) / n as f64, &s.m);
        let level = |c: usize| -> usize {
            let xc = x.0 + (c as f64 + 0.5) / HEAT_COLUMNS as f64 * (x.1 - x.0);
            let m = field.linear(xc).unwrap_or(0.0).max(0.0);
            ((m / scale) * (HEAT_LEVELS - 1) as f64).round() as usize
        };
        let mut c = 0;
        while c < HEAT_COLUMNS {
            let l = level(c);
            let mut e = c + 1;
            while e < HEAT_COLUMNS && level(e) == l {
                e += 1;
            }
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                px0 + c as f64 * dpx,
                (e - c) as f64 * dpx,
                (bottom - top).max(0.5),
                heat_color(l as f64 / (HEAT_LEVELS - 1) as f64)
            );
            c = e;
        }
    }
    axes(&mut out, &f, "x", "t");
    out.push_str("</svg>\n");
    out
}

/// Parses the JSON carried in an SVG `<metadata>` element.
pub fn svg_metadata(svg: &str) -> Option<serde_json::Value> {
    let start = svg.find("<metadata>")? + "<metadata>".len();
    let end = svg[start..].find("</metadata>")? + start;
    let raw = svg[start..end]
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    serde_json::from_str(&raw).ok()
}

/// Writes the files of one task under `<dir>/<task>-<hash>*`.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    stem: String,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, task: TaskKind, hash: &str, formats: &[Format]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: format!("{task}-{hash}"),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    /// Writes `<stem><suffix>` if `format` is enabled.
    pub fn file(&mut self, format: Format, suffix: &str, contents: impl FnOnce() -> String) -> Result<()> {
        if !self.wants(format) {
            return Ok(());
        }
        let path = self.dir.join(format!("{}{suffix}", self.stem));
        std::fs::write(&path, contents()).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// NDJSON fronts, CSV fields at the requested times and the final
    /// state, front and heatmap plots.
    pub fn trajectory(&mut self, tr: &Trajectory, snapshot_times: &[f64]) -> Result<()> {
        self.file(Format::Ndjson, ".ndjson", || trajectory_ndjson(tr))?;
        for k in snapshot_indices(tr, snapshot_times) {
            let s = &tr.snapshots[k];
            self.file(Format::Csv, &format!("-snapshot-{k:05}.csv"), || snapshot_csv(s, tr.h0))?;
        }
        self.file(Format::Svg, "-fronts.svg", || fronts_svg(tr))?;
        self.file(Format::Svg, "-heatmap.svg", || heatmap_svg(tr))
    }

    pub fn r0f(&mut self, trace: &[(f64, f64)]) -> Result<()> {
        self.file(Format::Csv, "-r0f.csv", || r0f_csv(trace))?;
        self.file(Format::Svg, "-r0f.svg", || r0f_svg(trace))
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<()> {
        self.file(Format::Json, suffix, || to_json(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientProfile;
    use crate::solver::{DtPolicy, InitialData, Simulation, SolverConfig};

    fn run(horizon: f64) -> Trajectory {
        let p = CoefficientProfile::homogeneous(2.0, 1.0, 0.2, 0.5, 1.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            n: 32,
            dt: DtPolicy::Fixed { dt: 0.01 },
            mu: 2.0,
            horizon,
            output_interval: 0.1,
            ..SolverConfig::default()
        };
        Simulation::new(p, &InitialData::cosine(1.0, 0.5, 0.5), cfg)
            .unwrap()
            .run()
            .unwrap()
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0 - f64::EPSILON] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn ndjson_records_parse_back() {
        let tr = run(0.5);
        let text = trajectory_ndjson(&tr);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), tr.snapshots.len());
        for (line, s) in lines.iter().zip(&tr.snapshots) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["h"].as_f64().unwrap(), s.h);
            assert_eq!(v["sup_M"].as_f64().unwrap(), s.sup_m);
        }
    }

    #[test]
    fn empty_trajectory_plots_initial_point() {
        let tr = run(0.0);
        assert_eq!(tr.snapshots.len(), 1);
        let svg = fronts_svg(&tr);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("<polyline"));
        let meta = svg_metadata(&svg).unwrap();
        assert_eq!(meta["x_range"][0].as_f64(), Some(0.0));
        assert!(heatmap_svg(&tr).contains("<rect x="));
        assert!(r0f_svg(&[(0.0, 0.4)]).contains("<circle"));
    }

    #[test]
    fn heatmap_spans_occupied_habitat() {
        let tr = run(1.0);
        let meta = svg_metadata(&heatmap_svg(&tr)).unwrap();
        let g = tr.snapshots.iter().map(|s| s.g).fold(f64::INFINITY, f64::min);
        let h = tr.snapshots.iter().map(|s| s.h).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(meta["x_range"][0].as_f64(), Some(g));
        assert_eq!(meta["x_range"][1].as_f64(), Some(h));
        assert!(h > 1.0 && g < -1.0);
    }

    #[test]
    fn snapshot_csv_has_all_nodes() {
        let tr = run(0.2);
        let csv = snapshot_csv(tr.snapshots.last().unwrap(), tr.h0);
        assert_eq!(csv.lines().count(), 34);
        let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], -1.0);
        assert_eq!(first[1], tr.last.g);
    }

    #[test]
    fn snapshot_selection_includes_final_state() {
        let tr = run(1.0);
        let idx = snapshot_indices(&tr, &[0.0, 0.31, 0.29, 50.0]);
        assert_eq!(idx, vec![0, 3, tr.snapshots.len() - 1]);
    }

    #[test]
    fn emitter_rewrites_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let tr = run(0.3);
        let write = || {
            let mut e = Emitter::new(dir.path(), TaskKind::Simulate, "abc", &Format::ALL).unwrap();
            e.trajectory(&tr, &[0.1]).unwrap();
            e.into_written()
        };
        let first = write();
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(write(), first);
        for (p, b) in first.iter().zip(bytes) {
            assert_eq!(std::fs::read(p).unwrap(), b);
        }
        assert!(first.iter().all(|p| p.file_name().unwrap().to_str().unwrap().starts_with("simulate-abc")));
    }

    #[test]
    fn disabled_formats_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = Emitter::new(dir.path(), TaskKind::Simulate, "x", &[Format::Ndjson]).unwrap();
        e.trajectory(&run(0.1), &[]).unwrap();
        assert_eq!(e.written().len(), 1);
    }
}
