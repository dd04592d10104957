//! Plot-ready data files and a dependency-free SVG renderer.
//!
//! `.dat` files are whitespace-separated columns with a `#` header line, ready
//! for gnuplot. Non-finite values are written as `nan`, `inf` or `-inf`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::config::StudyKind;
use super::run::ResultEnvelope;
use crate::error::{Error, Result};

/// One plotted series: a label, points, and whether to join them.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

fn value_f64(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
        Value::String(s) => match s.as_str() {
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => f64::NAN,
        },
        _ => f64::NAN,
    }
}

fn column(v: &Value) -> Vec<f64> {
    v.as_array().map(|a| a.iter().map(value_f64).collect()).unwrap_or_default()
}

fn dat_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Whitespace-separated columns under a `#` header.
pub fn dat_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = format!("# {}\n", header.join(" "));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| dat_num(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal SVG with axes, min/max tick labels and one polyline or marker set per series.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_x: bool) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let tx = |x: f64| if log_x { x.abs().log10() } else { x };
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .map(|(x, y)| (tx(x), y))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
    );
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(out, r#"<path d="M{m} {} H{} M{m} {} V{m}" stroke="black" fill="none"/>"#, h - m, w - m, h - m);
    let xl = if log_x { format!("log10 |{xlabel}|") } else { xlabel.to_string() };
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(&xl));
    let _ = writeln!(out, r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#, h / 2.0, h / 2.0, escape(ylabel));
    for (v, anchor, x) in [(x0, "start", m), (x1, "end", w - m)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#, h - m + 16.0, tick(v));
    }
    for (v, y) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 6.0, y + 4.0, tick(v));
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|(x, y)| (tx(*x), *y))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (px(x), py(y)))
            .collect();
        if s.line {
            let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
        } else {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#);
            }
        }
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}">{}</text>"#, w - m, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Plot {
    stem: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
    title: &'static str,
    extra: Vec<(&'static str, Vec<&'static str>, Vec<Vec<f64>>)>,
}

fn rows_from(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.iter().map(Vec::len).min().unwrap_or(0);
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

fn field(p: &Value, objects: &str, key: &str) -> Vec<f64> {
    p[objects].as_array().map(|a| a.iter().map(|o| value_f64(&o[key])).collect()).unwrap_or_default()
}

fn plot_for(kind: StudyKind, p: &Value) -> Plot {
    match kind {
        StudyKind::SpectrumScan => {
            let rank: Vec<f64> = p["points"]
                .as_array()
                .map(|a| a.iter().map(|o| o["rank"].as_f64().unwrap_or(-1.0)).collect())
                .unwrap_or_default();
            Plot {
                stem: "gamma_gap",
                header: vec!["gamma", "min_log_gap", "rank"],
                rows: rows_from(&[field(p, "points", "gamma"), field(p, "points", "min_log_gap"), rank]),
                title: "worst splitting margin",
                extra: vec![],
            }
        }
        StudyKind::Attractivity => {
            let t = column(&p["t"]);
            let mut extra = vec![];
            if p["reference"].is_array() {
                extra.push(("decay_ref", vec!["t", "delta*exp(alpha*t)"], rows_from(&[t.clone(), column(&p["reference"])])));
            }
            Plot { stem: "decay", header: vec!["t", "S"], rows: rows_from(&[t, column(&p["S"])]), title: "ensemble maximum deviation", extra }
        }
        StudyKind::Ftle => Plot {
            stem: "ftle_hist",
            header: vec!["bin_center", "count"],
            rows: rows_from(&[column(&p["histogram"]["bin_center"]), column(&p["histogram"]["count"])]),
            title: "largest finite-time exponent",
            extra: vec![],
        },
        StudyKind::DensitySweep => Plot {
            stem: "lambda",
            header: vec!["alpha", "sigma", "lambda"],
            rows: rows_from(&[field(p, "rows", "alpha"), field(p, "rows", "sigma"), field(p, "rows", "lambda")]),
            title: "Lyapunov exponent",
            extra: vec![],
        },
        StudyKind::Endpoints => Plot {
            stem: "endpoints",
            header: vec!["T", "sup", "inf"],
            rows: rows_from(&[field(p, "rows", "t"), field(p, "rows", "sup"), field(p, "rows", "inf")]),
            title: "extremal finite-time exponents",
            extra: vec![],
        },
        StudyKind::Conjugacy => Plot {
            stem: "conjugacy",
            header: vec!["x", "g"],
            rows: rows_from(&[column(&p["first_table"]["x"]), column(&p["first_table"]["g"])]),
            title: "conjugacy g(omega, x)",
            extra: vec![],
        },
    }
}

/// Write the plot data of `envelope` into `dir`; `kind` must match the envelope.
pub fn emit_plotdata(envelope: &ResultEnvelope, kind: StudyKind, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    if kind != envelope.study {
        return Err(Error::Config(format!("plot kind {} does not match envelope study {}", kind.name(), envelope.study.name())));
    }
    let plot = plot_for(kind, &envelope.payload);
    let mut written = Vec::new();
    let path = dir.join(format!("{}.dat", plot.stem));
    fs::write(&path, dat_table(&plot.header, &plot.rows))?;
    written.push(path);
    for (stem, header, rows) in &plot.extra {
        let path = dir.join(format!("{stem}.dat"));
        fs::write(&path, dat_table(header, rows))?;
        written.push(path);
    }
    if svg {
        let mut series = vec![Series {
            label: plot.header[1].to_string(),
            points: plot.rows.iter().map(|r| (r[0], r[1])).collect(),
            line: kind != StudyKind::DensitySweep,
        }];
        for (_, header, rows) in &plot.extra {
            series.push(Series { label: header[1].to_string(), points: rows.iter().map(|r| (r[0], r[1])).collect(), line: true });
        }
        let path = dir.join(format!("{}.svg", plot.stem));
        fs::write(&path, svg_plot(plot.title, plot.header[0], plot.header[1], &series, false))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Workers;
    use crate::experiment::config::ExperimentConfig;
    use crate::experiment::run::run;

    #[test]
    fn dat_format() {
        let t = dat_table(&["a", "b"], &[vec![1.0, f64::NAN], vec![f64::NEG_INFINITY, 0.5]]);
        assert_eq!(t, "# a b\n1.0000000000000000e0 nan\n-inf 5.0000000000000000e-1\n");
    }

    #[test]
    fn svg_skips_nonfinite_points() {
        let s = svg_plot("t", "x", "y", &[Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)], line: true }], false);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
        let line = s.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.split("points=\"").nth(1).unwrap().split('"').next().unwrap().split(' ').count(), 2);
    }

    #[test]
    fn attractivity_emits_reference_curve_and_rejects_mismatch() {
        let c = ExperimentConfig::parse(
            "study = attractivity\n[seeds]\ncount = 4\n[study]\nalpha = -1\nsigma = 1\ndt = 0.01\ndelta = 0.5\ntimes = 0, 1, 2\n[output]\nsvg = true\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let env = run(&c, Workers(1), dir.path()).unwrap();
        let decay = fs::read_to_string(dir.path().join("decay.dat")).unwrap();
        assert!(decay.starts_with("# t S\n"));
        assert_eq!(decay.lines().count(), 4);
        assert!(fs::read_to_string(dir.path().join("decay_ref.dat")).unwrap().starts_with("# t delta*exp(alpha*t)\n"));
        assert!(dir.path().join("decay.svg").exists());
        assert!(emit_plotdata(&env, StudyKind::Ftle, dir.path(), false).is_err());
    }

    #[test]
    fn spectrum_and_ftle_columns() {
        let dir = tempfile::tempdir().unwrap();
        let scan = ExperimentConfig::parse(
            "study = spectrum-scan\n[seeds]\ncount = 1\n[study]\nt = 100\ngamma = linspace(-2, 2, 21)\n[cocycle]\nkind = diagonal-flow\nrates = -1, 1\n",
        )
        .unwrap();
        run(&scan, Workers(1), dir.path()).unwrap();
        assert!(fs::read_to_string(dir.path().join("gamma_gap.dat")).unwrap().starts_with("# gamma min_log_gap rank\n"));
        let ftle = ExperimentConfig::parse("study = ftle\n[seeds]\ncount = 50\n[study]\nt = 4\nbins = 5\n[cocycle]\nkind = scalar-iid\nmultipliers = 2, 0.5\n").unwrap();
        run(&ftle, Workers(1), dir.path()).unwrap();
        let h = fs::read_to_string(dir.path().join("ftle_hist.dat")).unwrap();
        assert!(h.starts_with("# bin_center count\n"));
        assert_eq!(h.lines().count(), 6);
    }
}
