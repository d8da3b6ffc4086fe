//! Waveform overlays as CSV and SVG, and spectrum heatmap data.

use std::fmt::Write as _;
use std::path::Path;

use pcg_core::spectral::ComplexSpectrum;

const WIDTH: f64 = 900.0;
const ROW_HEIGHT: f64 = 140.0;
const MARGIN: f64 = 40.0;
const COLOURS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// A named trace sampled at `rate_hz`.
pub struct Trace<'a> {
    pub name: &'a str,
    pub samples: &'a [f64],
}

/// Columns `t_s` then one per trace; shorter traces leave blanks.
pub fn traces_csv(traces: &[Trace<'_>], rate_hz: u32, path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t_s".to_string()];
    header.extend(traces.iter().map(|t| t.name.to_string()));
    w.write_record(&header)?;
    let n = traces.iter().map(|t| t.samples.len()).max().unwrap_or(0);
    for i in 0..n {
        let mut row = vec![format!("{:.6}", i as f64 / rate_hz as f64)];
        row.extend(
            traces
                .iter()
                .map(|t| t.samples.get(i).map_or_else(String::new, |v| v.to_string())),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One stacked panel per trace, shared time axis, each panel scaled to its own peak.
pub fn traces_svg(title: &str, traces: &[Trace<'_>], rate_hz: u32) -> String {
    let height = MARGIN * 2.0 + ROW_HEIGHT * traces.len() as f64;
    let n = traces
        .iter()
        .map(|t| t.samples.len())
        .max()
        .unwrap_or(1)
        .max(2);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20">{}</text>"#, escape(title));
    for (k, t) in traces.iter().enumerate() {
        let top = MARGIN + ROW_HEIGHT * k as f64;
        let mid = top + ROW_HEIGHT / 2.0;
        let peak = t
            .samples
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        let half = ROW_HEIGHT * 0.42;
        // Decimate to at most two points per pixel column.
        let step = (t.samples.len() / (2 * plot_w as usize)).max(1);
        let mut points = String::new();
        for (i, v) in t.samples.iter().enumerate().step_by(step) {
            let x = MARGIN + plot_w * i as f64 / (n - 1) as f64;
            let y = mid - half * v / peak;
            let _ = write!(points, "{x:.1},{y:.1} ");
        }
        let colour = COLOURS[k % COLOURS.len()];
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{mid}" x2="{}" y2="{mid}" stroke="#ccc"/>"##,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="0.8" points="{}"/>"#,
            points.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            MARGIN + 4.0,
            top + 14.0,
            escape(t.name)
        );
    }
    let seconds = n as f64 / rate_hz as f64;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{seconds:.2} s</text>"#,
        WIDTH - MARGIN,
        height - 12.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Magnitudes as a frequency-bin by time-step grid, one CSV row per bin.
pub fn heatmap_csv(spectrum: &ComplexSpectrum, path: &Path) -> csv::Result<()> {
    let (bins, steps) = spectrum.shape();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for b in 0..bins {
        let row: Vec<String> = (0..steps)
            .map(|t| spectrum.get(b, t).norm().to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
