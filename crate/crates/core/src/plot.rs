//! Static SVG figures: centroid trajectory against the desired path, time
//! box summaries, per-waypoint errors and effective robot counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::Vec2;
use crate::harness::run_stem;
use crate::sim::{RunResult, StateFrame};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {source}", path.display())]
    Dump {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self { width, height, body: String::new() }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width}"/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.0, p.1)).collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, stroke: &str) {
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.0, p.1)).collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" fill="{fill}" stroke="{stroke}"/>"#, coords.join(" "));
    }

    fn circle(&mut self, c: (f64, f64), r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="{fill}"/>"#, c.0, c.1);
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="{stroke}"/>"#
        );
    }

    fn text(&mut self, p: (f64, f64), s: &str, size: f64, anchor: &str) {
        let esc = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{esc}</text>"#,
            p.0, p.1
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Data-to-pixel mapping for one panel.
#[derive(Debug, Clone, Copy)]
struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    /// Tick every integer on x instead of five even steps.
    int_x: bool,
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64), left: f64, top: f64, w: f64, h: f64) -> Self {
        Self { x: pad(x), y: pad(y), left, top, w, h, int_x: false }
    }

    fn integer_x(mut self, lo: f64, hi: f64) -> Self {
        self.x = (lo - 0.5, hi + 0.5);
        self.int_x = true;
        self
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.left + (p.0 - self.x.0) / (self.x.1 - self.x.0) * self.w,
            self.top + self.h - (p.1 - self.y.0) / (self.y.1 - self.y.0) * self.h,
        )
    }

    /// Widens the tighter range so both axes share one scale.
    fn equal_aspect(mut self) -> Self {
        let sx = (self.x.1 - self.x.0) / self.w;
        let sy = (self.y.1 - self.y.0) / self.h;
        let s = sx.max(sy);
        let cx = 0.5 * (self.x.0 + self.x.1);
        let cy = 0.5 * (self.y.0 + self.y.1);
        self.x = (cx - 0.5 * s * self.w, cx + 0.5 * s * self.w);
        self.y = (cy - 0.5 * s * self.h, cy + 0.5 * s * self.h);
        self
    }

    fn frame(&self, svg: &mut Svg, title: &str, xlabel: &str, ylabel: &str) {
        svg.rect(self.left, self.top, self.w, self.h, "none", "#444");
        let xs: Vec<f64> = if self.int_x {
            (self.x.0.ceil() as i64..=self.x.1.floor() as i64).map(|i| i as f64).collect()
        } else {
            (0..=4).map(|i| self.x.0 + i as f64 / 4.0 * (self.x.1 - self.x.0)).collect()
        };
        for xv in xs {
            let (px, _) = self.map((xv, self.y.0));
            svg.line((px, self.top + self.h), (px, self.top + self.h + 4.0), "#444", 1.0);
            let label = if self.int_x { format!("{xv}") } else { tick_label(xv, self.x.1 - self.x.0) };
            svg.text((px, self.top + self.h + 16.0), &label, 10.0, "middle");
        }
        for i in 0..=4 {
            let yv = self.y.0 + i as f64 / 4.0 * (self.y.1 - self.y.0);
            let (_, py) = self.map((self.x.0, yv));
            svg.line((self.left - 4.0, py), (self.left, py), "#444", 1.0);
            svg.text((self.left - 6.0, py + 3.0), &tick_label(yv, self.y.1 - self.y.0), 10.0, "end");
        }
        svg.text((self.left + 0.5 * self.w, self.top - 8.0), title, 13.0, "middle");
        svg.text((self.left + 0.5 * self.w, self.top + self.h + 32.0), xlabel, 11.0, "middle");
        svg.text((self.left - 62.0, self.top + 0.5 * self.h), ylabel, 11.0, "start");
    }
}

/// Enough decimals to tell ticks `span / 4` apart.
fn tick_label(v: f64, span: f64) -> String {
    let decimals = (1.0 - (span / 4.0).log10().floor()).clamp(0.0, 6.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') { s[1..].to_string() } else { s }
}

fn pad(r: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = if r.0.is_finite() && r.1.is_finite() { r } else { (0.0, 1.0) };
    let span = hi - lo;
    if span < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo - 0.05 * span, hi + 0.05 * span)
    }
}

fn bounds(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values.into_iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Object centroid track against the desired waypoints; `None` without
/// recorded poses.
pub fn trajectory_svg(run: &RunResult) -> Option<String> {
    if run.trajectory.is_empty() {
        return None;
    }
    let xs = run.trajectory.iter().map(|t| t.1.x).chain(run.path.iter().map(|w| w.position.x));
    let ys = run.trajectory.iter().map(|t| t.1.y).chain(run.path.iter().map(|w| w.position.y));
    let ax = Axes::new(bounds(xs), bounds(ys), 70.0, 40.0, W - 100.0, H - 90.0).equal_aspect();
    let mut svg = Svg::new(W, H);
    ax.frame(&mut svg, &format!("Centroid trajectory, seed {}", run.metrics.seed), "x (m)", "y (m)");
    let desired: Vec<(f64, f64)> = run.path.iter().map(|w| ax.map((w.position.x, w.position.y))).collect();
    svg.polyline(&desired, "#888", 1.5, true);
    for p in &desired {
        svg.circle(*p, 4.0, "#888");
    }
    let actual: Vec<(f64, f64)> = run.trajectory.iter().map(|t| ax.map((t.1.x, t.1.y))).collect();
    svg.polyline(&actual, PALETTE[0], 2.0, false);
    if let Some(last) = actual.last() {
        svg.circle(*last, 5.0, PALETTE[1]);
    }
    Some(svg.finish())
}

/// Last centroid position drawn by [`trajectory_svg`].
pub fn trajectory_end(run: &RunResult) -> Option<Vec2> {
    run.trajectory.last().map(|t| t.1)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Box summaries of caging and transport time across runs.
pub fn times_svg(runs: &[&RunResult]) -> Option<String> {
    let series: Vec<(&str, Vec<f64>)> = [
        ("caging", runs.iter().filter_map(|r| r.metrics.caging_time).collect::<Vec<_>>()),
        ("transport", runs.iter().filter_map(|r| r.metrics.transport_time).collect()),
    ]
    .into_iter()
    .filter(|(_, v)| !v.is_empty())
    .collect();
    if series.is_empty() {
        return None;
    }
    let hi = series.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0, f64::max);
    let ax = Axes::new((0.0, series.len() as f64), (0.0, hi), 70.0, 40.0, W - 100.0, H - 90.0);
    let mut svg = Svg::new(W, H);
    ax.frame(&mut svg, &format!("Completion times ({} runs)", runs.len()), "", "time (s)");
    for (k, (name, v)) in series.iter().enumerate() {
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        let cx = k as f64 + 0.5;
        let (px, _) = ax.map((cx, 0.0));
        let y = |q: f64| ax.map((cx, quantile(&s, q))).1;
        let half = 0.25 * ax.w / series.len() as f64;
        svg.line((px, y(0.0)), (px, y(1.0)), "#444", 1.0);
        svg.rect(px - half, y(0.75), 2.0 * half, (y(0.25) - y(0.75)).max(1.0), "#cfe0f3", PALETTE[0]);
        svg.line((px - half, y(0.5)), (px + half, y(0.5)), PALETTE[1], 2.0);
        svg.text((px, ax.top + ax.h + 16.0), &format!("{name} (n={})", s.len()), 11.0, "middle");
    }
    Some(svg.finish())
}

/// Per-waypoint series: each run thin, the mean thick.
fn waypoint_panel(svg: &mut Svg, ax: Axes, runs: &[&RunResult], title: &str, ylabel: &str, value: fn(&crate::sim::WaypointRecord) -> f64) {
    ax.frame(svg, title, "waypoint", ylabel);
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in runs {
        let pts: Vec<(f64, f64)> = r.metrics.waypoints.iter().map(|w| ax.map((w.index as f64, value(w)))).collect();
        svg.polyline(&pts, "#bbb", 1.0, false);
        for w in &r.metrics.waypoints {
            let e = sums.entry(w.index).or_default();
            e.0 += value(w);
            e.1 += 1;
        }
    }
    let mean: Vec<(f64, f64)> = sums.iter().map(|(i, (s, n))| ax.map((*i as f64, s / *n as f64))).collect();
    svg.polyline(&mean, PALETTE[0], 2.5, false);
    for p in &mean {
        svg.circle(*p, 3.0, PALETTE[0]);
    }
}

fn waypoint_range(runs: &[&RunResult]) -> Option<(f64, f64)> {
    let b = bounds(runs.iter().flat_map(|r| r.metrics.waypoints.iter().map(|w| w.index as f64)));
    b.0.is_finite().then_some(b)
}

/// Centroid-estimate, position and yaw error against waypoint index.
pub fn errors_svg(runs: &[&RunResult]) -> Option<String> {
    let xr = waypoint_range(runs)?;
    let panels: [(&str, &str, fn(&crate::sim::WaypointRecord) -> f64); 3] = [
        ("Centroid estimate error", "m", |w| w.centroid_estimate_error),
        ("Object position error", "m", |w| w.position_error),
        ("Object yaw error", "rad", |w| w.yaw_error),
    ];
    let ph = 200.0;
    let mut svg = Svg::new(W, 3.0 * (ph + 70.0) + 20.0);
    for (k, (title, unit, f)) in panels.iter().enumerate() {
        let yr = bounds(runs.iter().flat_map(|r| r.metrics.waypoints.iter().map(f)));
        let ax = Axes::new(xr, (yr.0.min(0.0), yr.1.max(0.0)), 70.0, 40.0 + k as f64 * (ph + 70.0), W - 100.0, ph).integer_x(xr.0, xr.1);
        waypoint_panel(&mut svg, ax, runs, title, unit, *f);
    }
    Some(svg.finish())
}

/// Mean effective pusher and rotator counts against waypoint index.
pub fn effective_svg(runs: &[&RunResult]) -> Option<String> {
    let xr = waypoint_range(runs)?;
    let ph = 200.0;
    let mut svg = Svg::new(W, 2.0 * (ph + 70.0) + 20.0);
    let panels: [(&str, fn(&crate::sim::WaypointRecord) -> f64); 2] =
        [("Effective pushers", |w| w.effective_pushers), ("Effective rotators", |w| w.effective_rotators)];
    for (k, (title, f)) in panels.iter().enumerate() {
        let yr = bounds(runs.iter().flat_map(|r| r.metrics.waypoints.iter().map(f)));
        let ax = Axes::new(xr, (0.0, yr.1.max(1.0)), 70.0, 40.0 + k as f64 * (ph + 70.0), W - 100.0, ph).integer_x(xr.0, xr.1);
        waypoint_panel(&mut svg, ax, runs, title, "robots", *f);
    }
    Some(svg.finish())
}

fn write(path: PathBuf, text: String, out: &mut Vec<PathBuf>) -> Result<(), PlotError> {
    fs::write(&path, text).map_err(|source| PlotError::Io { path: path.clone(), source })?;
    out.push(path);
    Ok(())
}

/// Writes every figure the runs support. File names derive from the
/// config hash and seed; skipped figures are logged.
pub fn emit_plots(runs: &[RunResult], out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let mut written = Vec::new();
    if runs.is_empty() {
        log::warn!("no runs to plot");
        return Ok(written);
    }
    fs::create_dir_all(out_dir).map_err(|source| PlotError::Io { path: out_dir.to_path_buf(), source })?;
    let mut groups: BTreeMap<&str, Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.metrics.config_hash.as_str()).or_default().push(r);
        let stem = run_stem(&r.metrics.config_hash, r.metrics.seed);
        match trajectory_svg(r) {
            Some(svg) => write(out_dir.join(format!("{stem}_trajectory.svg")), svg, &mut written)?,
            None => log::info!("seed {}: no trajectory, plot skipped", r.metrics.seed),
        }
    }
    for (hash, group) in groups {
        let figures: [(&str, Option<String>); 3] =
            [("times", times_svg(&group)), ("errors", errors_svg(&group)), ("effective", effective_svg(&group))];
        for (name, svg) in figures {
            match svg {
                Some(svg) => write(out_dir.join(format!("{hash}_{name}.svg")), svg, &mut written)?,
                None => log::info!("{hash}: no data for {name}, plot skipped"),
            }
        }
    }
    Ok(written)
}

/// Reads a line-delimited state dump.
pub fn load_dump(path: &Path) -> Result<Vec<StateFrame>, PlotError> {
    let text = fs::read_to_string(path).map_err(|source| PlotError::Io { path: path.to_path_buf(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| PlotError::Dump { path: path.to_path_buf(), line: i + 1, source }))
        .collect()
}

fn label_color(label: &str) -> &'static str {
    match label.split([':', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9']).next().unwrap_or("") {
        "attached" | "pending" | "done" => PALETTE[2],
        "push" | "rotate" => PALETTE[0],
        "wait" => PALETTE[4],
        "retreat" => "#999",
        _ => PALETTE[3],
    }
}

/// Final frame of a dump with the object track so far.
pub fn replay_svg(frames: &[StateFrame]) -> Option<String> {
    let last = frames.last()?;
    let pts = frames
        .iter()
        .map(|f| f.object_position)
        .chain(last.polygon.iter().copied())
        .chain(last.robots.iter().map(|r| r.1));
    let pts: Vec<Vec2> = pts.collect();
    let ax = Axes::new(bounds(pts.iter().map(|p| p.x)), bounds(pts.iter().map(|p| p.y)), 70.0, 40.0, W - 100.0, H - 90.0)
        .equal_aspect();
    let mut svg = Svg::new(W, H);
    ax.frame(&mut svg, &format!("State at tick {}", last.tick), "x (m)", "y (m)");
    let poly: Vec<(f64, f64)> = last.polygon.iter().map(|p| ax.map((p.x, p.y))).collect();
    svg.polygon(&poly, "#eee", "#444");
    let track: Vec<(f64, f64)> = frames.iter().map(|f| ax.map((f.object_position.x, f.object_position.y))).collect();
    svg.polyline(&track, PALETTE[1], 1.5, false);
    let scale = ax.w / (ax.x.1 - ax.x.0);
    for (_, p, label) in &last.robots {
        svg.circle(ax.map((p.x, p.y)), (0.07 * scale).max(2.0), label_color(label));
    }
    Some(svg.finish())
}
