use std::fmt::Write as _;

use super::curves::CurveSeries;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn panel(
    s: &mut String,
    top: f64,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, &CurveSeries)],
    markers: &[f64],
) {
    let x0 = MARGIN;
    let y0 = top + MARGIN;
    let px = |x: f64| x0 + x * PANEL_W;
    let py = |y: f64| y0 + (1.0 - y) * PANEL_H;
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 34.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">{ylabel}</text>"#,
        x0 - 34.0,
        y0 + PANEL_H / 2.0,
        x0 - 34.0,
        y0 + PANEL_H / 2.0
    );
    for k in 0..=5 {
        let v = f64::from(k) / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{v:.1}</text>"#,
            px(v),
            y0 + PANEL_H + 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{v:.1}</text>"#,
            x0 - 4.0,
            py(v) + 3.0
        );
    }
    for (k, (name, curve)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{name} (AUC {:.3})</text>"#,
            x0 + PANEL_W - 150.0,
            y0 + PANEL_H - 12.0 - 14.0 * k as f64,
            curve.auc
        );
        for &m in markers {
            if let Some(p) = curve.points.iter().rev().find(|p| p.threshold >= m) {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="{color}"/><text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">p={m}</text>"#,
                    px(p.x),
                    py(p.y),
                    px(p.x) + 6.0,
                    py(p.y) - 6.0
                );
            }
        }
    }
}

/// Two-panel SVG, ROC above precision-recall, with circles at the operating
/// points of each marker threshold.
pub fn render_svg(roc: &[(&str, &CurveSeries)], prc: &[(&str, &CurveSeries)], markers: &[f64]) -> String {
    let width = PANEL_W + 2.0 * MARGIN;
    let height = 2.0 * (PANEL_H + 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut s, 0.0, "ROC", "false positive rate", "true positive rate", roc, markers);
    panel(
        &mut s,
        PANEL_H + 2.0 * MARGIN,
        "Precision-recall",
        "recall",
        "precision",
        prc,
        markers,
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{prc_curve, roc_curve};

    #[test]
    fn svg_has_both_panels_and_markers() {
        let s = [0.95, 0.1, 0.5, 0.25, 0.91];
        let t = [1u8, 0, 1, 0, 0];
        let roc = roc_curve(&s, &t).unwrap();
        let prc = prc_curve(&s, &t).unwrap();
        let svg = render_svg(&[("gbt", &roc)], &[("gbt", &prc)], &[0.9, 0.2]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("p=0.9") && svg.contains("p=0.2"));
    }
}
