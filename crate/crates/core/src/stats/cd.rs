use std::fmt::Write as _;
use std::path::Path;

use super::RankAnalysis;
use crate::error::{Error, Result};

const WIDTH: f64 = 760.0;
const MARGIN: f64 = 170.0;
const AXIS_Y: f64 = 50.0;
const BAR_GAP: f64 = 9.0;
const ROW_GAP: f64 = 22.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Cliques drawn as bars: those with at least two members.
pub fn cd_bars(analysis: &RankAnalysis) -> Vec<&[usize]> {
    analysis
        .cliques
        .iter()
        .filter(|c| c.len() >= 2)
        .map(|c| c.as_slice())
        .collect()
}

fn by_rank(analysis: &RankAnalysis) -> Vec<usize> {
    let r = &analysis.average_ranks;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)));
    order
}

/// Self-contained SVG critical-difference diagram: an average-rank axis from
/// 1 to k, one labelled marker per treatment and one bar per clique.
pub fn render_cd_svg(analysis: &RankAnalysis) -> String {
    let k = analysis.treatments.len();
    let span = WIDTH - 2.0 * MARGIN;
    let x = |rank: f64| MARGIN + (rank - 1.0) / (k.max(2) - 1) as f64 * span;
    let bars = cd_bars(analysis);
    let order = by_rank(analysis);
    let half = k.div_ceil(2);
    let label_top = AXIS_Y + 25.0 + bars.len() as f64 * BAR_GAP;
    let height = label_top + half as f64 * ROW_GAP + 20.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g class="axis" stroke="black">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{AXIS_Y}" x2="{:.2}" y2="{AXIS_Y}"/>"#,
        x(1.0),
        x(k as f64)
    );
    for t in 1..=k {
        let tx = x(t as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{}" x2="{tx:.2}" y2="{AXIS_Y}"/>"#,
            AXIS_Y - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{tx:.2}" y="{}" text-anchor="middle" stroke="none">{t}</text>"#,
            AXIS_Y - 10.0
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="treatments" stroke="black" fill="none">"#);
    for (pos, &t) in order.iter().enumerate() {
        let tx = x(analysis.average_ranks[t]);
        let left = pos < half;
        let row = if left { pos } else { k - 1 - pos };
        let ly = label_top + row as f64 * ROW_GAP;
        let (end, anchor, text_x) = if left {
            (MARGIN - 10.0, "end", MARGIN - 14.0)
        } else {
            (WIDTH - MARGIN + 10.0, "start", WIDTH - MARGIN + 14.0)
        };
        let _ = writeln!(
            s,
            r#"<polyline points="{tx:.2},{AXIS_Y} {tx:.2},{ly:.2} {end:.2},{ly:.2}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{text_x:.2}" y="{:.2}" text-anchor="{anchor}" fill="black" stroke="none">{} ({:.2})</text>"#,
            ly + 4.0,
            escape(&analysis.treatments[t]),
            analysis.average_ranks[t]
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<g class="cliques" stroke="black" stroke-width="4" stroke-linecap="round">"#
    );
    for (b, clique) in bars.iter().enumerate() {
        let ranks = clique.iter().map(|&t| analysis.average_ranks[t]);
        let lo = ranks.clone().fold(f64::INFINITY, f64::min);
        let hi = ranks.fold(f64::NEG_INFINITY, f64::max);
        let y = AXIS_Y + 15.0 + b as f64 * BAR_GAP;
        let members: Vec<String> = clique
            .iter()
            .map(|&t| escape(&analysis.treatments[t]))
            .collect();
        let _ = writeln!(
            s,
            r#"<line class="clique" data-members="{}" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
            members.join(","),
            x(lo) - 3.0,
            x(hi) + 3.0
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Plain-text rendering: treatments by average rank, then each clique.
pub fn render_cd_text(analysis: &RankAnalysis) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "average ranks (alpha = {}, {}; Friedman chi2 = {:.4}, df = {}, p = {:.4e})",
        analysis.alpha,
        analysis.direction,
        analysis.friedman.statistic,
        analysis.friedman.df,
        analysis.friedman.p_value
    );
    for t in by_rank(analysis) {
        let _ = writeln!(
            s,
            "{:>8.3}  {}",
            analysis.average_ranks[t], analysis.treatments[t]
        );
    }
    let _ = writeln!(s, "not significantly different:");
    let bars = cd_bars(analysis);
    if bars.is_empty() {
        let _ = writeln!(s, "  (none)");
    }
    for clique in bars {
        let names: Vec<&str> = clique
            .iter()
            .map(|&t| analysis.treatments[t].as_str())
            .collect();
        let _ = writeln!(s, "  [{}]", names.join(", "));
    }
    s
}

/// Writes the SVG diagram and, if requested, the text rendering.
pub fn write_cd(analysis: &RankAnalysis, svg_path: &Path, text_path: Option<&Path>) -> Result<()> {
    std::fs::write(svg_path, render_cd_svg(analysis)).map_err(|e| Error::io(svg_path, e))?;
    if let Some(p) = text_path {
        std::fs::write(p, render_cd_text(analysis)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
