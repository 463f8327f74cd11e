use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::records::{Aggregate, Stat};
use super::{BenchError, ExperimentReport};
use crate::agents::Algorithm;

const W: f64 = 760.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// Stacked planning + execution time per algorithm and H.
    Time,
    Mistakes,
    Actions,
    /// Mean planning time against H, one line per algorithm.
    PlanningByH,
}

impl ChartKind {
    pub const ALL: [ChartKind; 4] = [
        ChartKind::Time,
        ChartKind::Mistakes,
        ChartKind::Actions,
        ChartKind::PlanningByH,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ChartKind::Time => "time.svg",
            ChartKind::Mistakes => "mistakes.svg",
            ChartKind::Actions => "actions.svg",
            ChartKind::PlanningByH => "planning_time_by_h.svg",
        }
    }

    fn title(self) -> &'static str {
        match self {
            ChartKind::Time => "Planning and execution time (s)",
            ChartKind::Mistakes => "Number of mistakes",
            ChartKind::Actions => "Number of actions",
            ChartKind::PlanningByH => "Planning time (s) by H",
        }
    }
}

fn color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Lesample => "#1b9e77",
        Algorithm::Ffreplan => "#d95f02",
        Algorithm::Bpstream => "#7570b3",
        Algorithm::Pomcp => "#e7298a",
        Algorithm::Despot => "#66a61e",
    }
}

/// Rounds `x` up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let p = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * p)
        .find(|v| *v >= x)
        .unwrap_or(10.0 * p)
}

fn hi(s: &Stat) -> f64 {
    s.mean + s.std.unwrap_or(0.0)
}

struct Canvas {
    svg: String,
    y_max: f64,
}

impl Canvas {
    fn new(title: &str, y_max: f64, x_label: &str) -> Self {
        let y_max = nice_ceiling(y_max);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#,
            W / 2.0
        );
        let (x0, x1, y0) = (LEFT, W - RIGHT, H - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#
        );
        for k in 0..=5 {
            let v = y_max * k as f64 / 5.0;
            let y = y0 - (y0 - TOP) * k as f64 / 5.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0
        );
        Self { svg, y_max }
    }

    fn y(&self, v: f64) -> f64 {
        let y0 = H - BOTTOM;
        y0 - (y0 - TOP) * (v / self.y_max).clamp(0.0, 1.0)
    }

    fn error_bar(&mut self, x: f64, s: &Stat, top: f64) {
        let d = s.std.unwrap_or(0.0);
        let (ya, yb) = (self.y(top - d), self.y(top + d));
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x}" y1="{ya}" x2="{x}" y2="{yb}" stroke="black"/>"#
        );
        for y in [ya, yb] {
            let _ = writeln!(
                self.svg,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
                x - 3.0,
                x + 3.0
            );
        }
    }

    fn legend(&mut self, algorithms: &[Algorithm]) {
        for (i, a) in algorithms.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = W - RIGHT + 15.0;
            let _ = writeln!(
                self.svg,
                r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#,
                y - 10.0,
                color(*a)
            );
            let _ = writeln!(
                self.svg,
                r#"<text x="{}" y="{y}">{}</text>"#,
                x + 18.0,
                a.display_name()
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn fmt_h(h: f64) -> String {
    let s = format!("{h:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// The algorithms and H values of the report, and the aggregate for each
/// pair, or `None` when some pair has no completed trial.
/// Algorithms, H values, and one row of aggregates per algorithm.
type Grid<'a> = (Vec<Algorithm>, Vec<f64>, Vec<Vec<&'a Aggregate>>);

fn grid(report: &ExperimentReport) -> Option<Grid<'_>> {
    let algs: Vec<Algorithm> = report.config.algorithms.clone();
    let mut hs = report.config.h_values.clone();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let mut rows = Vec::new();
    for a in &algs {
        let mut row = Vec::new();
        for h in &hs {
            row.push(
                report
                    .aggregates
                    .iter()
                    .find(|g| g.algorithm == *a && g.target_h == *h)?,
            );
        }
        rows.push(row);
    }
    Some((algs, hs, rows))
}

fn bar_chart(kind: ChartKind, algs: &[Algorithm], hs: &[f64], rows: &[Vec<&Aggregate>]) -> String {
    let metric = |g: &Aggregate| match kind {
        ChartKind::Mistakes => g.mistakes,
        ChartKind::Actions => g.actions,
        _ => g.total_time_s,
    };
    let y_max = rows
        .iter()
        .flatten()
        .map(|g| hi(&metric(g)))
        .fold(0.0, f64::max);
    let mut c = Canvas::new(kind.title(), y_max, "H");
    let plot_w = W - RIGHT - LEFT;
    let group_w = plot_w / hs.len() as f64;
    let bar_w = group_w * 0.8 / algs.len() as f64;
    for (hi_idx, h) in hs.iter().enumerate() {
        let gx = LEFT + group_w * hi_idx as f64 + group_w * 0.1;
        let _ = writeln!(
            c.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            H - BOTTOM + 16.0,
            fmt_h(*h)
        );
        for (ai, a) in algs.iter().enumerate() {
            let g = rows[ai][hi_idx];
            let x = gx + bar_w * ai as f64;
            let s = metric(g);
            if kind == ChartKind::Time {
                let p = g.planning_time_s.mean;
                let e = g.execution_time_s.mean;
                let (yp, ye) = (c.y(p), c.y(p + e));
                let _ = writeln!(
                    c.svg,
                    r#"<rect x="{x}" y="{yp}" width="{bar_w}" height="{}" fill="{}" data-algorithm="{a}" data-h="{h}" data-metric="planning_time_s" data-mean="{p}"/>"#,
                    c.y(0.0) - yp,
                    color(*a)
                );
                let _ = writeln!(
                    c.svg,
                    r#"<rect x="{x}" y="{ye}" width="{bar_w}" height="{}" fill="{}" fill-opacity="0.45" data-algorithm="{a}" data-h="{h}" data-metric="execution_time_s" data-mean="{e}"/>"#,
                    yp - ye,
                    color(*a)
                );
            } else {
                let y = c.y(s.mean);
                let _ = writeln!(
                    c.svg,
                    r#"<rect x="{x}" y="{y}" width="{bar_w}" height="{}" fill="{}" data-algorithm="{a}" data-h="{h}" data-metric="{}" data-mean="{}"/>"#,
                    c.y(0.0) - y,
                    color(*a),
                    if kind == ChartKind::Mistakes {
                        "mistakes"
                    } else {
                        "actions"
                    },
                    s.mean
                );
            }
            c.error_bar(x + bar_w / 2.0, &s, s.mean);
        }
    }
    c.legend(algs);
    c.finish()
}

fn line_chart(algs: &[Algorithm], hs: &[f64], rows: &[Vec<&Aggregate>]) -> String {
    let y_max = rows
        .iter()
        .flatten()
        .map(|g| hi(&g.planning_time_s))
        .fold(0.0, f64::max);
    let mut c = Canvas::new(ChartKind::PlanningByH.title(), y_max, "H");
    let plot_w = W - RIGHT - LEFT;
    let x_of = |i: usize| {
        if hs.len() == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + 20.0 + (plot_w - 40.0) * i as f64 / (hs.len() - 1) as f64
        }
    };
    for (i, h) in hs.iter().enumerate() {
        let _ = writeln!(
            c.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x_of(i),
            H - BOTTOM + 16.0,
            fmt_h(*h)
        );
    }
    for (ai, a) in algs.iter().enumerate() {
        let pts: Vec<String> = rows[ai]
            .iter()
            .enumerate()
            .map(|(i, g)| format!("{},{}", x_of(i), c.y(g.planning_time_s.mean)))
            .collect();
        let _ = writeln!(
            c.svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            color(*a)
        );
        for (i, g) in rows[ai].iter().enumerate() {
            let s = g.planning_time_s;
            let (x, y) = (x_of(i), c.y(s.mean));
            let _ = writeln!(
                c.svg,
                r#"<circle cx="{x}" cy="{y}" r="3.5" fill="{}" data-algorithm="{a}" data-h="{}" data-metric="planning_time_s" data-mean="{}"/>"#,
                color(*a),
                hs[i],
                s.mean
            );
            c.error_bar(x, &s, s.mean);
        }
    }
    c.legend(algs);
    c.finish()
}

/// Renders one chart, or `None` if some (algorithm, H) group is empty.
pub fn render_chart(report: &ExperimentReport, kind: ChartKind) -> Option<String> {
    let (algs, hs, rows) = grid(report)?;
    Some(match kind {
        ChartKind::PlanningByH => line_chart(&algs, &hs, &rows),
        _ => bar_chart(kind, &algs, &hs, &rows),
    })
}

/// Writes the three bar charts and the line chart into `dir`.
pub fn write_summary_charts(
    report: &ExperimentReport,
    dir: &Path,
) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for kind in ChartKind::ALL {
        match render_chart(report, kind) {
            Some(svg) => {
                let p = dir.join(kind.file_name());
                fs::write(&p, svg)?;
                out.push(p);
            }
            None => log::warn!(
                "{} omitted: some (algorithm, H) group has no completed trial",
                kind.file_name()
            ),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_ceiling_steps() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(3.2), 5.0);
        assert_eq!(nice_ceiling(880.0), 1000.0);
        assert_eq!(nice_ceiling(150.0), 200.0);
        assert_eq!(nice_ceiling(10.0), 10.0);
    }

    #[test]
    fn h_labels_trimmed() {
        assert_eq!(fmt_h(0.1), "0.1");
        assert_eq!(fmt_h(0.0), "0");
        assert_eq!(fmt_h(0.25), "0.25");
    }
}
