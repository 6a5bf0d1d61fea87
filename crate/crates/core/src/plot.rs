//! Standalone SVG plots: line charts, hodographs and heatmaps.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One curve of a line chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Reference curves are drawn dashed.
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, dashed: false }
    }

    pub fn reference(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, dashed: true }
    }
}

/// Text shared by every chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub title: String,
    pub x: String,
    pub y: String,
    /// Provenance footer, typically the configuration hash.
    pub footer: String,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e4).round() / 1e4)
    } else {
        format!("{v:.2e}")
    }
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        Some((lo - pad, hi + pad))
    } else {
        Some((lo, hi))
    }
}

fn header(s: &mut String, labels: &Labels) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(&labels.title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 32.0,
        esc(&labels.x)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(&labels.y)
    );
    let _ = writeln!(s, r##"<text x="8" y="{}" font-size="10" fill="#555">{}</text>"##, H - 8.0, esc(&labels.footer));
}

fn frame(s: &mut String, xr: (f64, f64), yr: (f64, f64), log_x: bool, log_y: bool) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let (px, py) = (LEFT + f * pw, TOP + ph - f * ph);
        let _ = writeln!(s, r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick(xv, log_x));
        let _ = writeln!(s, r#"<line x1="{}" y1="{py}" x2="{LEFT}" y2="{py}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, tick(yv, log_y));
    }
}

/// Line chart; non-positive values are dropped on logarithmic axes.
pub fn line_plot(labels: &Labels, series: &[Series], log_x: bool, log_y: bool) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let ok = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_x || x > 0.0) && (!log_y || y > 0.0);
    let pts: Vec<Vec<(f64, f64)>> =
        series.iter().map(|c| c.points.iter().filter(|p| ok(p)).map(|&(x, y)| (tx(x), ty(y))).collect()).collect();
    let mut s = String::new();
    header(&mut s, labels);
    let xr = range(pts.iter().flatten().map(|p| p.0));
    let yr = range(pts.iter().flatten().map(|p| p.1));
    let (Some(xr), Some(yr)) = (xr, yr) else {
        frame(&mut s, (0.0, 1.0), (0.0, 1.0), false, false);
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="16" fill="#888">no data</text>"##,
            LEFT + (W - LEFT - RIGHT) / 2.0,
            TOP + (H - TOP - BOTTOM) / 2.0
        );
        s.push_str("</svg>\n");
        return s;
    };
    frame(&mut s, xr, yr, log_x, log_y);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let map = |(x, y): (f64, f64)| (LEFT + (x - xr.0) / (xr.1 - xr.0) * pw, TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph);
    for (k, (c, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if !p.is_empty() {
            let path: Vec<String> = p
                .iter()
                .map(|&q| {
                    let (a, b) = map(q);
                    format!("{a:.2},{b:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Result<Vec<f64>> {
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Format(format!("CSV has no column `{name}`")))?;
    Ok(rows.iter().map(|r| r[k]).collect())
}

/// Log-scale decay plot of a norm time series with the bound `exp(-sqrt(2 nu)/8 t)`
/// and the gradient bound `exp(-sqrt(nu/2) t)`, both anchored at the first sample.
pub fn decay_plot(csv: &str, nu: f64, footer: &str) -> Result<String> {
    let (header, rows) = crate::io::parse_csv(csv)?;
    let t = column(&header, &rows, "t")?;
    let mut series = Vec::new();
    for name in ["l2_u", "linf_u", "linf_grad_u"] {
        let y = column(&header, &rows, name)?;
        series.push(Series::new(name, t.iter().cloned().zip(y).collect()));
    }
    if let Some(&t0) = t.first() {
        let l2 = column(&header, &rows[..1], "l2_u")?[0];
        let gr = column(&header, &rows[..1], "linf_grad_u")?[0];
        let slow = (2.0 * nu).sqrt() / 8.0;
        let fast = (nu / 2.0).sqrt();
        series.push(Series::reference("exp(-sqrt(2nu)/8 t)", t.iter().map(|&s| (s, l2 * (-slow * (s - t0)).exp())).collect()));
        series.push(Series::reference("exp(-sqrt(nu/2) t)", t.iter().map(|&s| (s, gr * (-fast * (s - t0)).exp())).collect()));
    }
    let labels = Labels { title: "decay of the limit flow".into(), x: "t".into(), y: "norm".into(), footer: footer.into() };
    Ok(line_plot(&labels, &series, false, true))
}

/// Hodograph of the order-0 horizontal layer velocity `(u0_1, u0_2)` along the layer.
pub fn hodograph(csv: &str, footer: &str) -> Result<String> {
    let (header, rows) = crate::io::parse_csv(csv)?;
    let u = column(&header, &rows, "u0_1")?;
    let v = column(&header, &rows, "u0_2")?;
    let labels = Labels {
        title: "Ekman spiral: order-0 layer velocity".into(),
        x: "U0_1".into(),
        y: "U0_2".into(),
        footer: footer.into(),
    };
    Ok(line_plot(&labels, &[Series::new("U0_h(xi)", u.into_iter().zip(v).collect())], false, false))
}

/// Log-log sweep plot with a reference slope line through the first point.
pub fn sweep_plot(csv: &str, slope: f64, footer: &str) -> Result<String> {
    let (header, rows) = crate::io::parse_csv(csv)?;
    let eps = column(&header, &rows, "eps")?;
    let mut series = Vec::new();
    for name in ["deviation_l2", "residual_l2", "corrector_rel"] {
        let y = column(&header, &rows, name)?;
        series.push(Series::new(name, eps.iter().cloned().zip(y).collect()));
    }
    if let (Some(&e0), Ok(d)) = (eps.first(), column(&header, &rows, "deviation_l2")) {
        let d0 = d[0];
        series.push(Series::reference(
            format!("eps^{slope}"),
            eps.iter().map(|&e| (e, d0 * (e / e0).powf(slope))).collect(),
        ));
    }
    let labels = Labels { title: "convergence sweep".into(), x: "eps".into(), y: "norm".into(), footer: footer.into() };
    Ok(line_plot(&labels, &series, true, true))
}

/// Heatmap of `values[i * ny + j]` with `i` along x and `j` along y.
pub fn heatmap(labels: &Labels, nx: usize, ny: usize, values: &[f64]) -> Result<String> {
    if values.len() != nx * ny {
        return Err(Error::Mismatch(format!("{} values for a {nx}x{ny} heatmap", values.len())));
    }
    let mut s = String::new();
    header(&mut s, labels);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let Some((lo, hi)) = range(values.iter().cloned().filter(|v| v.is_finite())) else {
        frame(&mut s, (0.0, 1.0), (0.0, 1.0), false, false);
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">no data</text>"##, LEFT + pw / 2.0, TOP + ph / 2.0);
        s.push_str("</svg>\n");
        return Ok(s);
    };
    frame(&mut s, (0.0, nx as f64), (0.0, ny as f64), false, false);
    let (cw, ch) = (pw / nx as f64, ph / ny as f64);
    let color = |v: f64| {
        let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let r = (255.0 * f) as u8;
        let b = (255.0 * (1.0 - f)) as u8;
        let g = (255.0 * (1.0 - (2.0 * f - 1.0).abs())) as u8;
        format!("#{r:02x}{g:02x}{b:02x}")
    };
    for i in 0..nx {
        for j in 0..ny {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                LEFT + i as f64 * cw,
                TOP + ph - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                color(values[i * ny + j])
            );
        }
    }
    let lx = W - RIGHT + 20.0;
    for k in 0..=10 {
        let f = k as f64 / 10.0;
        let y = TOP + ph - f * ph;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#, y - ph / 10.0, ph / 10.0, color(lo + f * (hi - lo)));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, TOP + 10.0, tick(hi, false));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, TOP + ph, tick(lo, false));
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Labels {
        Labels { title: "t".into(), x: "x".into(), y: "y".into(), footer: "config abc123".into() }
    }

    #[test]
    fn empty_series_says_no_data() {
        let svg = line_plot(&labels(), &[Series::new("a", vec![])], false, true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("no data") && svg.contains("config abc123"));
    }

    #[test]
    fn log_axes_drop_nonpositive_points() {
        let svg = line_plot(&labels(), &[Series::new("a", vec![(1.0, 0.0), (2.0, 1.0), (3.0, 0.1)])], false, true);
        assert!(!svg.contains("no data"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn decay_plot_has_bound_lines() {
        let csv = "t,l2_u,l2_omega,linf_u,linf_grad_u,rotation_work\n0,1,1,1,1,0\n1,0.5,0.5,0.5,0.5,0\n";
        let svg = decay_plot(csv, 0.1, "h").unwrap();
        assert!(svg.contains("exp(-sqrt(2nu)/8 t)"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 4);
    }

    #[test]
    fn heatmap_checks_size() {
        assert!(heatmap(&labels(), 2, 2, &[1.0; 3]).is_err());
        let svg = heatmap(&labels(), 2, 2, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(svg.contains("#ff0000") && svg.contains("#0000ff"));
    }
}
