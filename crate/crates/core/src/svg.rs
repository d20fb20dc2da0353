//! Minimal SVG renderings: positional small multiples and a transition
//! heatmap. Output is plain text and fully deterministic.

use std::fmt::Write as _;

use crate::analytics::{PositionHistogramSet, TransitionMatrix};
use crate::vocabulary::SectionType;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; SectionType::COUNT] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1",
];

/// One row of bars per section type, sharing a y scale.
pub fn position_small_multiples(set: &PositionHistogramSet) -> String {
    let (row_h, width, left, top) = (60.0, 480.0, 110.0, 30.0);
    let height = top + row_h * SectionType::COUNT as f64 + 30.0;
    let bar_w = width / set.bins as f64;
    let max = set
        .histograms
        .iter()
        .flat_map(|h| h.values.iter().copied())
        .fold(0.0f64, f64::max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        left + width + 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18" font-size="13">{} ({} classified sections)</text>"#,
        escape(&set.discipline),
        set.total
    );
    for (row, h) in set.histograms.iter().enumerate() {
        let base = top + row_h * (row as f64 + 1.0) - 5.0;
        let _ = writeln!(
            s,
            r#"<text x="5" y="{:.1}">{}</text>"#,
            base - row_h / 2.0 + 5.0,
            h.section_type
        );
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="#999"/>"##,
            left + width
        );
        for (bin, v) in h.values.iter().enumerate() {
            if *v <= 0.0 || max <= 0.0 {
                continue;
            }
            let bh = (row_h - 10.0) * v / max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="{}"><title>{v}</title></rect>"#,
                left + bar_w * bin as f64,
                base - bh,
                bar_w - 1.0,
                PALETTE[h.section_type.index()]
            );
        }
    }
    let axis_y = top + row_h * SectionType::COUNT as f64 + 15.0;
    let _ = writeln!(s, r#"<text x="{left}" y="{axis_y}">0</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{axis_y}">normalized position</text>"#,
        left + width / 2.0 - 50.0
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{axis_y}">1</text>"#, left + width - 5.0);
    s.push_str("</svg>\n");
    s
}

/// 7×7 heatmap of transition probabilities, rows = previous section type.
pub fn transition_heatmap(m: &TransitionMatrix) -> String {
    let (cell, left, top) = (56.0, 100.0, 110.0);
    let size = left + cell * SectionType::COUNT as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{:.1}" font-family="sans-serif" font-size="11">"#,
        top + cell * SectionType::COUNT as f64 + 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="5" y="18" font-size="13">{}: P(next | previous)</text>"#,
        escape(&m.discipline)
    );
    for (j, to) in SectionType::ALL.iter().enumerate() {
        let x = left + cell * j as f64 + cell / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" transform="rotate(-45 {x:.1} {:.1})">{to}</text>"#,
            top - 8.0,
            top - 8.0
        );
    }
    for (i, from) in SectionType::ALL.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(s, r#"<text x="5" y="{:.1}">{from}</text>"#, y + cell / 2.0 + 4.0);
        for (j, to) in SectionType::ALL.iter().enumerate() {
            let p = m.prob(*from, *to);
            let shade = (255.0 * (1.0 - p)).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#fff"><title>{from} -> {to}: {p} (n={})</title></rect>"##,
                left + cell * j as f64,
                m.support(*from, *to)
            );
            if p > 0.0 {
                let fill = if p > 0.5 { "#fff" } else { "#000" };
                let _ = writeln!(
                    s,
                    r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{fill}">{p:.2}</text>"##,
                    left + cell * j as f64 + cell / 2.0,
                    y + cell / 2.0 + 4.0
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
