//! Log-log plot data: CSV of points and fitted lines, and a small SVG chart.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{fit_rate, ConvergenceRecord};
use crate::Result;

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];
const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 50.0;

struct Series {
    name: &'static str,
    pts: Vec<(f64, f64)>,
    slope: f64,
    intercept: f64,
}

fn series(record: &ConvergenceRecord) -> Vec<Series> {
    record
        .columns
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let pts: Vec<(f64, f64)> = record.levels.iter().map(|l| (l.h.log10(), l.errors[i].log10())).collect();
            let hs: Vec<f64> = record.levels.iter().map(|l| l.h).collect();
            let es: Vec<f64> = record.levels.iter().map(|l| l.errors[i]).collect();
            let slope = fit_rate(&hs, &es);
            let n = pts.len() as f64;
            let intercept = pts.iter().map(|p| p.1 - slope * p.0).sum::<f64>() / n;
            Series { name, pts, slope, intercept }
        })
        .collect()
}

/// Writes `<stem>.csv` (`kind,variable,a,b`: points carry `log10 h` and
/// `log10 err`, fits carry slope and intercept) and `<stem>.svg`.
pub fn emit_plotdata(record: &ConvergenceRecord, stem: &Path) -> Result<()> {
    let all = series(record);
    let mut csv = String::from("kind,variable,a,b\n");
    for s in &all {
        for (x, y) in &s.pts {
            writeln!(csv, "point,{},{x:.6},{y:.6}", s.name).unwrap();
        }
        writeln!(csv, "fit,{},{:.6},{:.6}", s.name, s.slope, s.intercept).unwrap();
    }
    if let Some(dir) = stem.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(stem.with_extension("csv"), csv)?;
    fs::write(stem.with_extension("svg"), render_svg(record))?;
    Ok(())
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    (lo.floor(), if hi.ceil() > lo.floor() { hi.ceil() } else { lo.floor() + 1.0 })
}

/// Log-log chart with axes, decade ticks, points, fit lines and a legend
/// giving each fitted rate to three decimals.
pub fn render_svg(record: &ConvergenceRecord) -> String {
    let all = series(record);
    let (x0, x1) = bounds(all.iter().flat_map(|s| s.pts.iter().map(|p| p.0)));
    let (y0, y1) = bounds(all.iter().flat_map(|s| s.pts.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    writeln!(s, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#).unwrap();
    for k in x0 as i32..=x1 as i32 {
        let x = px(k as f64);
        writeln!(s, r#"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, b + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{k}</text>"#, b + 16.0).unwrap();
    }
    for k in y0 as i32..=y1 as i32 {
        let y = py(k as f64);
        writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{l}" y2="{y:.1}" stroke="black"/>"#, l - 4.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{k}</text>"#, l - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">h</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(s, r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">relative L2 error</text>"#, H / 2.0, H / 2.0).unwrap();
    for (i, ser) in all.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for (x, y) in &ser.pts {
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(*x), py(*y)).unwrap();
        }
        if ser.slope.is_finite() {
            let (xa, xb) = ser.pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
            let f = |x: f64| ser.intercept + ser.slope * x;
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{c}" stroke-dasharray="4 3"/>"#,
                px(xa),
                py(f(xa)),
                px(xb),
                py(f(xb))
            )
            .unwrap();
        }
        let ly = t + 14.0 * (i as f64 + 1.0);
        writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{c}">{}: rate {:.3}</text>"#, l + 10.0, ser.name, ser.slope).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{} ({})</text>"#, W / 2.0, t - 16.0, record.problem, record.variant).unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::LevelRecord;
    use crate::{Timings, Variant};

    fn record() -> ConvergenceRecord {
        let level = |n, h: f64, e: f64| LevelRecord {
            n,
            h,
            n_cells: 0,
            n_unknowns: 0,
            errors: vec![e, 10.0 * h],
            timings: Timings::default(),
        };
        ConvergenceRecord {
            problem: "synthetic".into(),
            variant: Variant::Second,
            columns: vec!["u", "q"],
            levels: vec![level(10, 0.1, 1e-2), level(20, 0.05, 2.5e-3), level(40, 0.025, 6.25e-4)],
            failures: vec![],
            rates: vec![2.0, 1.0],
            last_pair: vec![2.0, 1.0],
        }
    }

    #[test]
    fn csv_has_three_points_per_variable() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("conv");
        emit_plotdata(&record(), &stem).unwrap();
        let csv = fs::read_to_string(stem.with_extension("csv")).unwrap();
        for v in ["u", "q"] {
            assert_eq!(csv.lines().filter(|l| l.starts_with(&format!("point,{v},"))).count(), 3);
            assert_eq!(csv.lines().filter(|l| l.starts_with(&format!("fit,{v},"))).count(), 1);
        }
    }

    #[test]
    fn svg_is_well_formed_and_carries_rates() {
        let svg = render_svg(&record());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.contains(&"u: rate 2.000"));
        assert!(texts.contains(&"q: rate 1.000"));
    }
}
