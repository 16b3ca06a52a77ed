//! CSV and SVG output for norm series and physical fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::{DecayFit, DiagnosticsRecord, CSV_COLUMNS};
use crate::error::Result;
use crate::evolution::PhysicalFields;

/// What [`emit_plot_data`] writes besides the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// CSV only.
    Table,
    /// CSV plus an SVG of the weighted L2 norm of `w~` on a log axis.
    Decay,
}

/// Write `records` as CSV with the fixed column order.
pub fn write_diagnostics_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Emit `<stem>.csv` and, for [`PlotKind::Decay`], `<stem>.svg` with the fit overlaid.
pub fn emit_plot_data(
    records: &[DiagnosticsRecord],
    kind: PlotKind,
    dir: &Path,
    stem: &str,
    fit: Option<&DecayFit>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    write_diagnostics_csv(records, &csv)?;
    let mut written = vec![csv];
    if kind == PlotKind::Decay {
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.tau, r.w_l2w)).collect();
        let svg = dir.join(format!("{stem}.svg"));
        std::fs::write(&svg, render_decay_svg(&series, fit))?;
        written.push(svg);
    }
    Ok(written)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Line plot of `y` against `tau` with a base-10 log y axis. Non-positive
/// values are skipped since they have no logarithm.
pub fn render_decay_svg(series: &[(f64, f64)], fit: Option<&DecayFit>) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, y)| t.is_finite() && *y > 0.0 && y.is_finite())
        .map(|&(t, y)| (t, y.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in &pts {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    // axes, decade ticks
    let _ = writeln!(
        s,
        r#"<path d="M{m} {top} V{bot} H{right}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        top = MARGIN,
        bot = HEIGHT - MARGIN,
        right = WIDTH - MARGIN
    );
    let mut d = y0;
    while d <= y1 + 1e-9 {
        let y = py(d);
        let _ = writeln!(
            s,
            r##"<line x1="{a}" y1="{y:.2}" x2="{b}" y2="{y:.2}" stroke="#ddd"/><text x="{c}" y="{ty:.2}" font-size="11" text-anchor="end">1e{d}</text>"##,
            a = MARGIN,
            b = WIDTH - MARGIN,
            c = MARGIN - 6.0,
            ty = y + 4.0,
        );
        d += 1.0;
    }
    for k in 0..=4 {
        let t = t0 + (t1 - t0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{:.2}</text>"#,
            px(t),
            HEIGHT - MARGIN + 16.0,
            t
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">tau</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );

    let path: Vec<String> = pts.iter().map(|&(t, y)| format!("{:.2},{:.2}", px(t), py(y))).collect();
    let _ = writeln!(
        s,
        r#"<polyline class="data" points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#,
        path.join(" ")
    );
    if let Some(f) = fit {
        let at = |t: f64| (f.amplitude.ln() - f.gamma * t) / std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-dasharray="6 4"/>"#,
            px(t0),
            py(at(t0)),
            px(t1),
            py(at(t1))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end" fill="crimson">gamma = {:.4}, r2 = {:.4}</text>"#,
            WIDTH - MARGIN,
            MARGIN - 10.0,
            f.gamma,
            f.r_squared
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Physical fields as `x,y,rho,omega,u1,u2` rows.
pub fn write_physical_csv(fields: &PhysicalFields, path: &Path) -> Result<()> {
    let mut out = String::from("x,y,rho,omega,u1,u2\n");
    for (i, x) in fields.coords.iter().enumerate() {
        for (j, y) in fields.coords.iter().enumerate() {
            let _ = writeln!(
                out,
                "{x},{y},{},{},{},{}",
                fields.rho[[i, j]],
                fields.omega[[i, j]],
                fields.u1[[i, j]],
                fields.u2[[i, j]]
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
