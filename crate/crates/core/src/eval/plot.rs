use super::metrics::MetricsRow;
use super::EvalError;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Cumulative accuracy against instances seen, one polyline per series.
pub fn render_svg(series: &[(String, Vec<MetricsRow>)]) -> Result<String, EvalError> {
    let series: Vec<&(String, Vec<MetricsRow>)> = series.iter().filter(|(_, rows)| !rows.is_empty()).collect();
    if series.is_empty() {
        return Err(EvalError::NothingToPlot);
    }
    let x_max = series
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.instances))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + plot_w * x / x_max;
    let py = |y: f64| HEIGHT - MARGIN - plot_h * y.clamp(0.0, 100.0) / 100.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g stroke="black"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    for tick in (0..=100).step_by(20) {
        let y = py(tick as f64);
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{:.1}" text-anchor="end">{tick}</text><line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##,
            MARGIN - 6.0,
            y + 4.0,
            MARGIN,
            WIDTH - MARGIN
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 20.0,
        x_max as u64
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">instances</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">accuracy (%)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (label, rows)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.instances as f64), py(r.accuracy_cum)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(label)
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text class="label" x="{}" y="{ly:.1}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN - 140.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(series: &[(String, Vec<MetricsRow>)], path: &Path) -> Result<(), EvalError> {
    let svg = render_svg(series)?;
    std::fs::write(path, svg).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
