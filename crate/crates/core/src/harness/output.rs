//! Snapshot, probe and plot files.

use std::fmt::Write as _;
use std::io::Write;

use crate::harness::report::{csv_writer, RunReport};
use crate::physics::SnapshotRow;
use crate::real::Real;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Writes `id, position, velocity, rho, p` for every particle, one row per
/// particle in the given order (the solver returns rows sorted by id).
pub fn write_snapshot<W: Write, R: Real, const D: usize>(out: W, rows: &[SnapshotRow<R, D>]) -> Result<(), csv::Error> {
    let mut writer = csv_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(AXES[..D].iter().map(|a| a.to_string()));
    header.extend(AXES[..D].iter().map(|a| format!("v{a}")));
    header.extend(["rho".to_string(), "p".to_string()]);
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for row in rows {
        record.clear();
        record.push(row.id.to_string());
        record.extend(row.x.iter().map(|c| c.to_string()));
        record.extend(row.v.iter().map(|c| c.to_string()));
        record.push(row.rho.to_string());
        record.push(row.p.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Pressure time series at fixed probe points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `values[k][j]` is probe `j` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl ProbeSeries {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn push(&mut self, time: f64, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.points.len());
        self.times.push(time);
        self.values.push(values);
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.values.last().map(Vec::as_slice)
    }

    /// Mean of each probe over samples with `time >= from`.
    pub fn mean_since(&self, from: f64) -> Vec<f64> {
        let mut sums = vec![0.0; self.points.len()];
        let mut count = 0usize;
        for (t, row) in self.times.iter().zip(&self.values) {
            if *t >= from {
                count += 1;
                sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
        }
        sums.into_iter().map(|s| s / count.max(1) as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut writer = csv_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.points.iter().map(|p| {
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            format!("p({})", coords.join(" "))
        }));
        writer.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut record = vec![t.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 70.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 2.0 + 10.0);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 20.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    s
}

fn nice_max(value: f64) -> f64 {
    if !(value > 0.0) {
        return 1.0;
    }
    let magnitude = 10f64.powf(value.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&m| m >= value)
        .unwrap_or(10.0 * magnitude)
}

fn y_ticks(s: &mut String, top: f64) {
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN / 2.0 + 10.0);
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = y0 - (y0 - y1) * k as f64 / 4.0;
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{MARGIN}" y2="{y}" stroke="black"/>"##, MARGIN - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 6.0, y + 4.0, format_tick(v));
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

fn series_of(reports: &[RunReport]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        let label = series_label(r);
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    labels
}

fn series_label(r: &RunReport) -> String {
    if r.policy == "seq" {
        format!("seq {}", r.precision)
    } else {
        format!("{}({}) {}", r.policy, r.workers, r.precision)
    }
}

fn legend(s: &mut String, labels: &[String]) {
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN / 2.0 + 18.0 + 16.0 * k as f64;
        let x = WIDTH - MARGIN / 2.0 - 150.0;
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{}" r="4" fill="{}" class="legend"/>"#, y - 4.0, PALETTE[k % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 10.0, escape(label));
    }
}

/// Wall time against particle count, one point per report, one colour per
/// policy/precision series.
pub fn runtime_plot(reports: &[RunReport]) -> String {
    let mut s = svg_open("Runtime vs particle count", "particles", "wall time [s]");
    let labels = series_of(reports);
    let x_top = nice_max(reports.iter().map(|r| r.particles as f64).fold(0.0, f64::max));
    let y_top = nice_max(reports.iter().map(|r| r.wall_seconds).fold(0.0, f64::max));
    y_ticks(&mut s, y_top);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0 + 10.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#, y0 + 16.0, format_tick(x_top));
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">0</text>"#, y0 + 16.0);
    for r in reports {
        let colour = PALETTE[labels.iter().position(|l| *l == series_label(r)).unwrap_or(0) % PALETTE.len()];
        let cx = x0 + (x1 - x0) * r.particles as f64 / x_top;
        let cy = y0 - (y0 - y1) * r.wall_seconds / y_top;
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="{colour}" class="point"><title>{}: {} particles, {:.3} s</title></circle>"#,
            escape(&r.label()),
            r.particles,
            r.wall_seconds
        );
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// GPIPS bar per report.
pub fn gpips_plot(reports: &[RunReport]) -> String {
    let mut s = svg_open("Particle interaction throughput", "run", "GPIPS");
    let labels = series_of(reports);
    let top = nice_max(reports.iter().map(|r| r.gpips).fold(0.0, f64::max));
    y_ticks(&mut s, top);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0 + 10.0);
    let slot = (x1 - x0) / reports.len().max(1) as f64;
    for (k, r) in reports.iter().enumerate() {
        let colour = PALETTE[labels.iter().position(|l| *l == series_label(r)).unwrap_or(0) % PALETTE.len()];
        let height = (y0 - y1) * r.gpips / top;
        let x = x0 + slot * (k as f64 + 0.2);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{height:.2}" fill="{colour}" class="bar"><title>{}: {:.4} GPIPS</title></rect>"#,
            y0 - height,
            slot * 0.6,
            escape(&r.label()),
            r.gpips
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x + slot * 0.3, y0 + 16.0, k + 1);
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}
