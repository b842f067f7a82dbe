//! Static SVG renderings of an ROC curve and an IoU score histogram.

use std::fmt::Write;

use crate::evaluation::{HistogramBin, RocPoint};

const SIZE: f64 = 400.0;
const PAD: f64 = 40.0;

fn header(out: &mut String, title: &str) {
    let full = SIZE + 2.0 * PAD;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#,
        PAD + SIZE / 2.0,
        PAD / 2.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
}

fn px(x: f64, y: f64) -> (f64, f64) {
    (PAD + x * SIZE, PAD + (1.0 - y) * SIZE)
}

pub fn roc_svg(points: &[RocPoint], auc: f64) -> String {
    let mut out = String::new();
    header(&mut out, &format!("ROC (AUC = {auc:.4})"));
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4 4"/>"#
    );
    let path: Vec<String> = points
        .iter()
        .map(|p| {
            let (x, y) = px(p.fpr, p.tpr);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="2"/>"#,
        path.join(" ")
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#,
        PAD + SIZE / 2.0,
        SIZE + 1.7 * PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">true positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    out.push_str("</svg>\n");
    out
}

pub fn histogram_svg(bins: &[HistogramBin]) -> String {
    let mut out = String::new();
    header(&mut out, "IoU scores (real green, fake red)");
    let peak = bins
        .iter()
        .map(|b| b.real.max(b.fake))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    for b in bins {
        let w = (b.hi - b.lo) / 2.0;
        for (k, (count, color)) in [(b.real, "green"), (b.fake, "red")].into_iter().enumerate() {
            let h = count as f64 / peak;
            let (x, y) = px(b.lo + k as f64 * w, h);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.7"/>"#,
                w * SIZE,
                h * SIZE
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">IoU</text>"#,
        PAD + SIZE / 2.0,
        SIZE + 1.7 * PAD
    );
    out.push_str("</svg>\n");
    out
}
