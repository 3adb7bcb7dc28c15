use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

use crate::experiments::Outcome;

pub fn write_csv(path: &Path, o: &Outcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["N"];
    header.extend(&o.columns);
    w.write_record(&header)?;
    for (n, cells) in &o.rows {
        let mut rec = vec![n.to_string()];
        rec.extend(cells.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, summary: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// Line plot of one or two columns against `N`. Log-log when every plotted
/// value is positive, linear otherwise.
pub fn render_svg(title: &str, o: &Outcome, value: &str, bound: Option<&str>) -> String {
    let xs: Vec<f64> = o.rows.iter().map(|r| r.0 as f64).collect();
    let mut series = vec![(value, o.column(value), "#1f77b4")];
    if let Some(b) = bound {
        series.push((b, o.column(b), "#d62728"));
    }
    let finite = |v: &f64| v.is_finite();
    let log = xs.iter().all(|&x| x > 0.0) && series.iter().all(|s| s.1.iter().filter(|v| finite(v)).all(|&v| v > 0.0));
    let tx = |x: f64| if log { x.ln() } else { x };
    let (xmin, xmax) = span(xs.iter().map(|&x| tx(x)));
    let (ymin, ymax) = span(series.iter().flat_map(|s| s.1.iter().copied().filter(finite)).map(tx));
    let px = |x: f64| MARGIN + (tx(x) - xmin) / (xmax - xmin) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (tx(y) - ymin) / (ymax - ymin) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let scale = if log { "log" } else { "linear" };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">N ({scale})</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    for (i, &x) in xs.iter().enumerate() {
        if xs.len() <= 12 || i % (xs.len() / 8).max(1) == 0 {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#, px(x), HEIGHT - MARGIN + 16.0);
        }
    }
    let (lo, hi) = if log { (ymin.exp(), ymax.exp()) } else { (ymin, ymax) };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.3e}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3e}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    for (k, (name, ys, color)) in series.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite() && (!log || **y > 0.0))
            .map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 16.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Paths of the artifacts for one experiment.
pub struct Artifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: Option<PathBuf>,
}

pub fn write_all(dir: &Path, name: &str, o: &Outcome, summary: &Value, svg: bool) -> Result<Artifacts> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join(format!("{name}.csv"));
    let json = dir.join(format!("{name}.json"));
    write_csv(&csv, o)?;
    write_json(&json, summary)?;
    let svg = match (svg, o.plot) {
        (true, Some((value, bound))) => {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, render_svg(name, o, value, bound))?;
            Some(path)
        }
        _ => None,
    };
    Ok(Artifacts { csv, json, svg })
}
