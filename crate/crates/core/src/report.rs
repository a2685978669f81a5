//! Tabular and plotted summaries of search results.

use std::fmt::Write as _;

use crate::search::AblationRow;

pub const ABLATION_CSV_HEADER: &str =
    "space,device,budget_ms,reward,quality,latency_ms,madds,params,frac_regular_all,frac_regular_early,dv";

/// Ablation rows as CSV. Decision vectors are written space-separated so the
/// field needs no quoting.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(ABLATION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let dv = r.dv.0.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.space.name(),
            r.device,
            r.budget_ms,
            r.reward,
            r.quality,
            r.latency_ms,
            r.madds,
            r.params,
            r.frac_regular_all,
            r.frac_regular_early,
            dv
        )
        .unwrap();
    }
    out
}

/// A point with a latency (lower is better) and a score (higher is better).
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub label: String,
    pub latency_ms: f64,
    pub score: f64,
}

/// Indices of the non-dominated points, sorted by latency.
pub fn pareto_front(points: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .latency_ms
            .total_cmp(&points[b].latency_ms)
            .then(points[b].score.total_cmp(&points[a].score))
    });
    let mut front = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in idx {
        if points[i].score > best {
            best = points[i].score;
            front.push(i);
        }
    }
    front
}

/// Scatter plot of score against latency with the Pareto front drawn as a
/// polyline.
pub fn scatter_svg(points: &[Point], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 48.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.latency_ms);
        x1 = x1.max(p.latency_ms);
        y0 = y0.min(p.score);
        y1 = y1.max(p.score);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let px = |x: f64| M + (x - x0) / sx * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / sy * (H - 2.0 * M);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title)).unwrap();
    writeln!(out, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M).unwrap();
    writeln!(out, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M).unwrap();
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">latency (ms) [{x0:.3}, {x1:.3}]</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(out, r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">score [{y0:.4}, {y1:.4}]</text>"#, H / 2.0, H / 2.0).unwrap();
    for p in points {
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4a7ab5" fill-opacity="0.6"><title>{}</title></circle>"##,
            px(p.latency_ms),
            py(p.score),
            escape(&p.label)
        )
        .unwrap();
    }
    let front = pareto_front(points);
    if !front.is_empty() {
        let pts = front
            .iter()
            .map(|&i| format!("{:.2},{:.2}", px(points[i].latency_ms), py(points[i].score)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, r##"<polyline points="{pts}" fill="none" stroke="#d9534f" stroke-width="2"/>"##).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(l: f64, s: f64) -> Point {
        Point {
            label: format!("{l}/{s}"),
            latency_ms: l,
            score: s,
        }
    }

    #[test]
    fn front_skips_dominated() {
        let pts = vec![pt(1.0, 0.5), pt(2.0, 0.4), pt(3.0, 0.9), pt(0.5, 0.1), pt(3.0, 0.7)];
        assert_eq!(pareto_front(&pts), vec![3, 0, 2]);
        assert!(pareto_front(&[]).is_empty());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = scatter_svg(&[pt(1.0, 0.5), pt(2.0, 0.6)], "a<b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(scatter_svg(&[], "empty").contains("</svg>"));
    }
}
