use std::fmt::Write as _;

use crate::classifier::ErcPanel;
use crate::model::Source;

use super::{LayoutPoint, PanelHistogram, ReportError};

/// Thirty fixed colors; the first four are the source colors in the
/// histogram.
pub const PALETTE: [&str; 30] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363",
];

const PLOT: f64 = 1000.0;
const MARGIN: f64 = 0.05 * PLOT;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Scatter of the layout inside a 1000×1000 plot area with a 5% margin
/// plus a legend of `topic_words` to its right. Points are drawn in
/// `record_id` order; both axes share one scale so distances are kept.
pub fn render_scatter(points: &[LayoutPoint], topic_words: &[Vec<String>], palette: &[&str]) -> Result<String, ReportError> {
    let k = topic_words.len();
    if palette.len() < k {
        return Err(ReportError::PaletteTooShort { needed: k, available: palette.len() });
    }
    let mut sorted: Vec<&LayoutPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    for p in &sorted {
        if p.dominant_topic >= k {
            return Err(ReportError::TopicOutOfRange { record_id: p.record_id.clone(), topic: p.dominant_topic, k });
        }
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(ReportError::NonFinite(p.record_id.clone()));
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &sorted {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let inner = PLOT - 2.0 * MARGIN;
    let span = (x1 - x0).max(y1 - y0);
    let scale = if span > 0.0 { inner / span } else { 0.0 };
    // Centre the shorter axis inside the margin box.
    let pad_x = (inner - (x1 - x0) * scale) / 2.0;
    let pad_y = (inner - (y1 - y0) * scale) / 2.0;

    let legend_width = 400.0;
    let mut svg = String::new();
    writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{PLOT}" viewBox="0 0 {w} {PLOT}" font-family="sans-serif">"##,
        w = PLOT + legend_width
    )
    .unwrap();
    writeln!(svg, r##"<rect x="0" y="0" width="{}" height="{PLOT}" fill="#ffffff"/>"##, PLOT + legend_width).unwrap();
    writeln!(svg, r##"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#dddddd"/>"##).unwrap();
    svg.push_str("<g id=\"points\">\n");
    for p in &sorted {
        let cx = MARGIN + pad_x + (p.x - x0) * scale;
        // SVG y grows downwards.
        let cy = PLOT - MARGIN - pad_y - (p.y - y0) * scale;
        writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{}" fill-opacity="0.8"><title>{}</title></circle>"#,
            palette[p.dominant_topic],
            escape(&p.record_id)
        )
        .unwrap();
    }
    svg.push_str("</g>\n<g id=\"legend\" font-size=\"13\">\n");
    let row = if k == 0 { 0.0 } else { (PLOT - 2.0 * MARGIN).min(30.0 * k as f64) / k as f64 };
    for (t, words) in topic_words.iter().enumerate() {
        let y = MARGIN + row * (t as f64 + 0.5);
        let label: Vec<&str> = words.iter().take(3).map(String::as_str).collect();
        writeln!(svg, r#"<circle cx="{:.2}" cy="{y:.2}" r="6" fill="{}"/>"#, PLOT + 10.0, palette[t]).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{t}: {}</text>"#, PLOT + 22.0, y + 4.5, escape(&label.join(", "))).unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Y-axis treatment of the panel histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistogramScale {
    /// Raw counts on one linear axis.
    #[default]
    Shared,
    /// Each bar is its count over the source's total (classified plus
    /// unclassified) records.
    PerSource,
}

/// Smallest 1, 2 or 5 times a power of ten that is at least `raw`.
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw * (1.0 - 1e-12)).unwrap_or(10.0 * mag)
}

/// Grouped bars: panels on the x axis in code order, one bar per source.
pub fn render_histogram(histogram: &PanelHistogram, scale: HistogramScale) -> String {
    let values: Vec<[f64; 4]> = ErcPanel::all()
        .map(|panel| {
            Source::ALL.map(|s| {
                let count = histogram.count(s, panel) as f64;
                match scale {
                    HistogramScale::Shared => count,
                    HistogramScale::PerSource => {
                        let total = histogram.total(s);
                        if total == 0 { 0.0 } else { count / total as f64 }
                    }
                }
            })
        })
        .collect();
    let max = values.iter().flatten().copied().fold(0.0, f64::max);
    let (step, top) = if max > 0.0 {
        let step = nice_step(max / 5.0);
        (step, step * (max / step).ceil())
    } else {
        (1.0, 5.0)
    };

    let (left, top_pad, plot_h) = (80.0, 60.0, 400.0);
    let (group_w, bar_w) = (44.0, 10.0);
    let plot_w = group_w * ErcPanel::COUNT as f64;
    let (width, height) = (left + plot_w + 20.0, top_pad + plot_h + 60.0);
    let y_of = |v: f64| top_pad + plot_h - v / top * plot_h;
    let fmt_tick = |v: f64| match scale {
        HistogramScale::Shared => format!("{}", v.round() as u64),
        HistogramScale::PerSource => format!("{:.0}%", v * 100.0),
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"##
    )
    .unwrap();
    writeln!(svg, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##).unwrap();
    svg.push_str("<g id=\"legend\">\n");
    for (i, s) in Source::ALL.iter().enumerate() {
        let x = left + 130.0 * i as f64;
        writeln!(svg, r#"<rect x="{x}" y="20" width="12" height="12" fill="{}"/>"#, PALETTE[i]).unwrap();
        writeln!(svg, r#"<text x="{}" y="31">{s}</text>"#, x + 18.0).unwrap();
    }
    svg.push_str("</g>\n<g id=\"axis\">\n");
    let ticks = (top / step).round() as usize;
    for t in 0..=ticks {
        let v = step * t as f64;
        let y = y_of(v);
        writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, left + plot_w).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, fmt_tick(v)).unwrap();
    }
    writeln!(svg, r##"<line x1="{left}" y1="{top_pad}" x2="{left}" y2="{}" stroke="#000000"/>"##, top_pad + plot_h).unwrap();
    let y_label = match scale {
        HistogramScale::Shared => "Documents",
        HistogramScale::PerSource => "Share of source documents",
    };
    writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        top_pad + plot_h / 2.0,
        top_pad + plot_h / 2.0
    )
    .unwrap();
    svg.push_str("</g>\n<g id=\"bars\">\n");
    for (g, (panel, vals)) in ErcPanel::all().zip(&values).enumerate() {
        let gx = left + group_w * g as f64;
        for (i, (s, v)) in Source::ALL.iter().zip(vals).enumerate() {
            if *v <= 0.0 {
                continue;
            }
            let y = y_of(*v);
            writeln!(
                svg,
                r#"<rect x="{:.2}" y="{y:.2}" width="{bar_w}" height="{:.2}" fill="{}"><title>{s} {panel}: {}</title></rect>"#,
                gx + 2.0 + bar_w * i as f64,
                top_pad + plot_h - y,
                PALETTE[i],
                histogram.count(*s, panel)
            )
            .unwrap();
        }
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{panel}</text>"#, gx + group_w / 2.0, top_pad + plot_h + 18.0).unwrap();
    }
    writeln!(
        svg,
        r##"</g>
<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000000"/>
<text x="{:.2}" y="{:.2}" text-anchor="middle">ERC panel</text>
</svg>"##,
        left + plot_w,
        left + plot_w / 2.0,
        top_pad + plot_h + 45.0,
        y = top_pad + plot_h
    )
    .unwrap();
    svg
}
