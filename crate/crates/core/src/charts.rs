//! Plain SVG renderings of the diagnostics. Output depends only on the inputs.

use std::fmt::Write as _;

use crate::evaluate::BoxplotStats;
use crate::kselect::{ClustergramTable, GapReport};
use crate::preprocess::CorrMatrix;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            width / 2.0,
            escape(title)
        );
        Self { body, width, height }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(self.body, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let pad = (hi - lo) * 0.05;
        Self { d0: lo - pad, d1: hi + pad, p0, p1 }
    }

    fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

fn axes(svg: &mut Svg, x: Scale, y: Scale, xlabel: &str, ylabel: &str, xticks: &[f64]) {
    let axis = r#"stroke="black" stroke-width="1""#;
    svg.line(MARGIN, H - MARGIN, W - MARGIN / 2.0, H - MARGIN, axis);
    svg.line(MARGIN, MARGIN, MARGIN, H - MARGIN, axis);
    for &t in xticks {
        let px = x.at(t);
        svg.line(px, H - MARGIN, px, H - MARGIN + 4.0, axis);
        svg.text(px, H - MARGIN + 16.0, "middle", 11, &format!("{t}"));
    }
    for i in 0..=4 {
        let v = y.d0 + (y.d1 - y.d0) * i as f64 / 4.0;
        let py = y.at(v);
        svg.line(MARGIN - 4.0, py, MARGIN, py, axis);
        svg.text(MARGIN - 6.0, py + 4.0, "end", 10, &format!("{v:.2}"));
    }
    svg.text((MARGIN + W) / 2.0, H - 14.0, "middle", 12, xlabel);
    let _ = writeln!(
        svg.body,
        r#"<text x="14" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Blue (−1) through white (0) to red (+1).
fn diverging(r: f64) -> String {
    let r = r.clamp(-1.0, 1.0);
    let (cr, cg, cb) = if r >= 0.0 {
        (255.0, 255.0 * (1.0 - r), 255.0 * (1.0 - r))
    } else {
        (255.0 * (1.0 + r), 255.0 * (1.0 + r), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", cr.round() as u8, cg.round() as u8, cb.round() as u8)
}

pub fn correlation_heatmap(corr: &CorrMatrix) -> String {
    let d = corr.variables.len();
    let cell = 36.0;
    let left = 170.0;
    let top = 50.0;
    let width = left + cell * d as f64 + 20.0;
    let height = top + cell * d as f64 + 150.0;
    let mut svg = Svg::new(width, height, "Pearson correlation");
    for i in 0..d {
        let y = top + cell * i as f64;
        svg.text(left - 6.0, y + cell / 2.0 + 4.0, "end", 11, &corr.variables[i]);
        for j in 0..d {
            let x = left + cell * j as f64;
            let r = corr.r.get(i, j);
            let _ = writeln!(
                svg.body,
                r##"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{}" stroke="#ccc"/>"##,
                diverging(r)
            );
            svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, "middle", 9, &format!("{r:.2}"));
        }
    }
    let base = top + cell * d as f64 + 8.0;
    for (j, v) in corr.variables.iter().enumerate() {
        let x = left + cell * j as f64 + cell / 2.0;
        let _ = writeln!(
            svg.body,
            r#"<text x="{x:.1}" y="{base:.1}" text-anchor="end" font-size="11" transform="rotate(-60 {x:.1} {base:.1})">{}</text>"#,
            escape(v)
        );
    }
    svg.finish()
}

pub fn gap_curve(report: &GapReport) -> String {
    let mut svg = Svg::new(W, H, "Gap statistic");
    let ks: Vec<f64> = report.rows.iter().map(|r| r.k as f64).collect();
    let lo = report.rows.iter().map(|r| r.gap - r.se).fold(f64::INFINITY, f64::min);
    let hi = report.rows.iter().map(|r| r.gap + r.se).fold(f64::NEG_INFINITY, f64::max);
    let x = Scale::new(report.k_min as f64, report.k_max as f64, MARGIN, W - MARGIN / 2.0);
    let y = Scale::new(lo, hi, H - MARGIN, MARGIN);
    axes(&mut svg, x, y, "number of clusters k", "gap(k)", &ks);
    let pts: Vec<String> = report.rows.iter().map(|r| format!("{:.2},{:.2}", x.at(r.k as f64), y.at(r.gap))).collect();
    let _ = writeln!(
        svg.body,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    for r in &report.rows {
        let px = x.at(r.k as f64);
        let bar = r#"class="errorbar" stroke="steelblue" stroke-width="1""#;
        svg.line(px, y.at(r.gap - r.se), px, y.at(r.gap + r.se), bar);
        svg.line(px - 4.0, y.at(r.gap - r.se), px + 4.0, y.at(r.gap - r.se), r#"stroke="steelblue""#);
        svg.line(px - 4.0, y.at(r.gap + r.se), px + 4.0, y.at(r.gap + r.se), r#"stroke="steelblue""#);
        let fill = if r.k == report.modal_k { "crimson" } else { "steelblue" };
        let _ =
            writeln!(svg.body, r#"<circle class="point" cx="{px:.2}" cy="{:.2}" r="3.5" fill="{fill}"/>"#, y.at(r.gap));
    }
    svg.finish()
}

pub fn clustergram(table: &ClustergramTable) -> String {
    let mut svg = Svg::new(W, H, "Clustergram");
    let lo = table.rows.iter().map(|r| r.pc1_mean).fold(f64::INFINITY, f64::min);
    let hi = table.rows.iter().map(|r| r.pc1_mean).fold(f64::NEG_INFINITY, f64::max);
    let x = Scale::new(table.k_min as f64, table.k_max as f64, MARGIN, W - MARGIN / 2.0);
    let y = Scale::new(lo, hi, H - MARGIN, MARGIN);
    let ks: Vec<f64> = (table.k_min..=table.k_max).map(|k| k as f64).collect();
    axes(&mut svg, x, y, "number of clusters k", "PC1 mean", &ks);
    let n: usize = table.rows_at(table.k_min).filter(|r| r.rep == table.rows[0].rep).map(|r| r.size).sum();
    let max_w = 10.0;
    for r in &table.rows {
        let Some(parent) = r.parent else { continue };
        let Some(p) = table.rows.iter().find(|p| p.k + 1 == r.k && p.rep == r.rep && p.cluster_id == parent) else {
            continue;
        };
        let w = (max_w * r.size as f64 / n.max(1) as f64).max(0.4);
        svg.line(
            x.at(p.k as f64),
            y.at(p.pc1_mean),
            x.at(r.k as f64),
            y.at(r.pc1_mean),
            &format!(r#"stroke="steelblue" stroke-opacity="0.35" stroke-width="{w:.2}""#),
        );
    }
    for r in &table.rows {
        let rad = 1.5 + 4.0 * (r.size as f64 / n.max(1) as f64).sqrt();
        let _ = writeln!(
            svg.body,
            r#"<circle class="node" cx="{:.2}" cy="{:.2}" r="{rad:.2}" fill="crimson" fill-opacity="0.5"/>"#,
            x.at(r.k as f64),
            y.at(r.pc1_mean)
        );
    }
    svg.finish()
}

pub fn boxplots(stats: &BoxplotStats, names: &[String]) -> String {
    let mut svg = Svg::new(W, H, "Distance to cluster centre");
    let hi = stats.clusters.iter().map(|b| b.max).fold(0.0, f64::max);
    let k = stats.clusters.len();
    let x = Scale::new(-0.5, k as f64 - 0.5, MARGIN, W - MARGIN / 2.0);
    let y = Scale::new(0.0, hi, H - MARGIN, MARGIN);
    axes(&mut svg, x, y, "cluster", "distance", &[]);
    let half = ((x.at(1.0) - x.at(0.0)) * 0.3).min(30.0);
    for (i, b) in stats.clusters.iter().enumerate() {
        let cx = x.at(i as f64);
        let (whisk_lo, whisk_hi) = (b.whisker_low, b.whisker_high);
        svg.line(cx, y.at(whisk_lo), cx, y.at(b.q1), r#"stroke="black""#);
        svg.line(cx, y.at(b.q3), cx, y.at(whisk_hi), r#"stroke="black""#);
        svg.line(cx - half / 2.0, y.at(whisk_lo), cx + half / 2.0, y.at(whisk_lo), r#"stroke="black""#);
        svg.line(cx - half / 2.0, y.at(whisk_hi), cx + half / 2.0, y.at(whisk_hi), r#"stroke="black""#);
        let _ = writeln!(
            svg.body,
            r##"<rect class="box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            cx - half,
            y.at(b.q3),
            2.0 * half,
            (y.at(b.q1) - y.at(b.q3)).max(0.5)
        );
        svg.line(cx - half, y.at(b.median), cx + half, y.at(b.median), r#"stroke="black" stroke-width="2""#);
        for o in &b.outliers {
            let _ = writeln!(
                svg.body,
                r#"<circle class="outlier" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="crimson"/>"#,
                y.at(o.distance)
            );
        }
        let label = names.get(i).cloned().unwrap_or_else(|| format!("{}", b.cluster));
        svg.text(cx, H - MARGIN + 16.0, "middle", 10, &label);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::BoxStats;
    use crate::kselect::{GapCurve, GapRow};

    #[test]
    fn gap_curve_has_a_point_and_bar_per_k() {
        let rows = (1..=10)
            .map(|k| GapRow {
                k,
                gap: k as f64 * 0.1,
                se: 0.02,
                log_w_observed: 0.0,
                log_w_reference: 0.0,
                selection_frequency: 0.1,
            })
            .collect();
        let report = GapReport {
            k_min: 1,
            k_max: 10,
            rows,
            curves: vec![GapCurve { gap: vec![], se: vec![], selected: 3 }],
            modal_k: 3,
            reps: 1,
            b: 2,
        };
        let svg = gap_curve(&report);
        assert_eq!(svg.matches("class=\"point\"").count(), 10);
        assert_eq!(svg.matches("class=\"errorbar\"").count(), 10);
        assert_eq!(svg, gap_curve(&report));
    }

    #[test]
    fn one_box_per_cluster() {
        let labels: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let clusters = (0..7).map(|c| BoxStats::from_values(c, &[1.0, 2.0, 3.0, 4.0], &labels).unwrap()).collect();
        let svg = boxplots(&BoxplotStats { clusters, distances: vec![] }, &[]);
        assert_eq!(svg.matches("class=\"box\"").count(), 7);
    }

    #[test]
    fn colours() {
        assert_eq!(diverging(1.0), "#ff0000");
        assert_eq!(diverging(-1.0), "#0000ff");
        assert_eq!(diverging(0.0), "#ffffff");
    }
}
