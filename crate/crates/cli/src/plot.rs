//! Static SVG scatter of `(x, y)` with the rectangle curve, the disk line
//! and the bound envelope.

use std::fmt::Write;
use std::path::Path;

use spectra_core::analytic::{k2, rectangle_curve};
use spectra_core::bounds::BoundCurve;

use crate::Failure;

const W: f64 = 720.0;
const H: f64 = 540.0;
const MARGIN: f64 = 60.0;
const X_RANGE: (f64, f64) = (1.0, 2.6);
const Y_RANGE: (f64, f64) = (1.0, 4.0);

fn sx(x: f64) -> f64 {
    MARGIN + (x - X_RANGE.0) / (X_RANGE.1 - X_RANGE.0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64) -> f64 {
    H - MARGIN - (y - Y_RANGE.0) / (Y_RANGE.1 - Y_RANGE.0) * (H - 2.0 * MARGIN)
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], stroke: &str, dash: &str) {
    let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.5"{dash} points="{}"/>"#,
        d.join(" ")
    );
}

/// Reads `x,y` columns from a results CSV; `#` lines are metadata.
fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(Failure::io(path))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let bad = |m: String| Failure::Input(format!("{}: {m}", path.display()));
    let head = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| head.iter().position(|h| h == name).ok_or_else(|| bad(format!("no `{name}` column")));
    let (ix, iy) = (col("x")?, col("y")?);
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        match (parse(ix), parse(iy)) {
            (Some(x), Some(y)) => pts.push((x, y)),
            _ => return Err(bad(format!("unreadable row {:?}", rec.position().map(|p| p.line())))),
        }
    }
    Ok(pts)
}

pub fn render(results: &Path, bounds_step: f64) -> Result<String, Failure> {
    let pts = read_points(results)?;
    let curve = BoundCurve::on_grid(bounds_step).map_err(Failure::at("bounds"))?;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        "<!-- tool: spectra {}; subcommand: plot; config: {{\"results\": \"{}\", \"bounds_step\": {bounds_step}}} -->",
        env!("CARGO_PKG_VERSION"),
        results.display()
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);

    // axes and ticks
    let (x0, x1, y0, y1) = (sx(X_RANGE.0), sx(X_RANGE.1), sy(Y_RANGE.0), sy(Y_RANGE.1));
    let _ = writeln!(svg, r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#);
    for i in 0..=8 {
        let x = X_RANGE.0 + 0.2 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{y0:.2}" x2="{0:.2}" y2="{1:.2}" stroke="black"/><text x="{0:.2}" y="{2:.2}" text-anchor="middle">{x:.1}</text>"#,
            sx(x),
            y0 + 5.0,
            y0 + 20.0
        );
    }
    for i in 0..=6 {
        let y = Y_RANGE.0 + 0.5 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{x0:.2}" y2="{1:.2}" stroke="black"/><text x="{2:.2}" y="{3:.2}" text-anchor="end">{y:.1}</text>"#,
            x0 - 5.0,
            sy(y),
            x0 - 8.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">λ₂/λ₁</text>"#, 0.5 * (x0 + x1), H - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{0:.2}" text-anchor="middle" transform="rotate(-90 15 {0:.2})">λ₃/λ₁</text>"#,
        0.5 * (y0 + y1)
    );

    // reference curves
    let env: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.x, r.envelope)).collect();
    polyline(&mut svg, &env, "#c0392b", "");
    let rect: Vec<(f64, f64)> = (0..=150)
        .map(|i| 1.0 + 0.01 * i as f64)
        .map(|x| (x, rectangle_curve(x).expect("inside [1, 5/2]")))
        .collect();
    polyline(&mut svg, &rect, "#2c3e50", "");
    let k = k2();
    polyline(&mut svg, &[(1.0, k), (k, k)], "#2980b9", r#" stroke-dasharray="6,4""#);

    for &(x, y) in &pts {
        if (X_RANGE.0..=X_RANGE.1).contains(&x) && (Y_RANGE.0..=Y_RANGE.1).contains(&y) {
            let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#27ae60"/>"##, sx(x), sy(y));
        }
    }

    // legend
    let items = [("bound envelope", "#c0392b"), ("rectangles", "#2c3e50"), ("disks (K₂)", "#2980b9"), ("results", "#27ae60")];
    for (i, (label, colour)) in items.iter().enumerate() {
        let ly = MARGIN + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{colour}" stroke-width="2"/><text x="{3:.2}" y="{4:.2}">{label}</text>"#,
            x0 + 15.0,
            ly,
            x0 + 35.0,
            x0 + 40.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
