//! Diagnostic rendering of a face analysis: limbus circles in blue, the
//! image-left highlight in green, the image-right highlight in red, and
//! the IoU printed in the top-left corner.

use crate::imaging::RgbImage;
use crate::pipeline::{EyeAnalysis, FaceReport};

pub const LIMBUS_COLOR: [u8; 3] = [0, 96, 255];
pub const LEFT_COLOR: [u8; 3] = [0, 220, 0];
pub const RIGHT_COLOR: [u8; 3] = [255, 0, 0];

// 3x5 glyphs, one row per u8, bit 2 leftmost
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];
const DOT: [u8; 5] = [0, 0, 0, 0, 2];

fn glyph(c: char) -> Option<[u8; 5]> {
    match c {
        '0'..='9' => Some(DIGITS[c as usize - '0' as usize]),
        '.' => Some(DOT),
        _ => None,
    }
}

fn blend(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3], alpha: f64) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
        return;
    }
    let (x, y) = (x as u32, y as u32);
    let old = img.get(x, y);
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (old[i] as f64 * (1.0 - alpha) + c[i] as f64 * alpha).round() as u8;
    }
    img.put(x, y, out);
}

fn draw_circle(img: &mut RgbImage, cx: f64, cy: f64, r: f64, c: [u8; 3]) {
    let steps = ((std::f64::consts::TAU * r * 2.0).ceil() as usize).max(16);
    for k in 0..steps {
        let t = k as f64 / steps as f64 * std::f64::consts::TAU;
        let x = (cx + r * t.cos()).round() as i64;
        let y = (cy + r * t.sin()).round() as i64;
        blend(img, x, y, c, 1.0);
    }
}

fn draw_eye(img: &mut RgbImage, eye: &EyeAnalysis, color: [u8; 3]) {
    let (ox, oy) = (eye.crop.x as i64, eye.crop.y as i64);
    for (x, y) in eye.highlight.points() {
        blend(img, ox + x as i64, oy + y as i64, color, 0.75);
    }
    draw_circle(
        img,
        ox as f64 + eye.limbus.cx,
        oy as f64 + eye.limbus.cy,
        eye.limbus.r,
        LIMBUS_COLOR,
    );
}

/// Writes `text` (digits and dots) at `(x, y)` with square pixels of `scale`.
pub fn draw_text(img: &mut RgbImage, text: &str, x: i64, y: i64, scale: i64, c: [u8; 3]) {
    let mut pen = x;
    for ch in text.chars() {
        if let Some(g) = glyph(ch) {
            for (row, bits) in g.iter().enumerate() {
                for col in 0..3 {
                    if bits & (4 >> col) != 0 {
                        for dy in 0..scale {
                            for dx in 0..scale {
                                blend(
                                    img,
                                    pen + col * scale + dx,
                                    y + row as i64 * scale + dy,
                                    c,
                                    1.0,
                                );
                            }
                        }
                    }
                }
            }
        }
        pen += 4 * scale;
    }
}

/// Copy of `img` annotated with whatever parts of `report` succeeded.
pub fn render_overlay(img: &RgbImage, report: &FaceReport) -> RgbImage {
    let mut out = img.clone();
    if let Ok(l) = &report.left {
        draw_eye(&mut out, l, LEFT_COLOR);
    }
    if let Ok(r) = &report.right {
        draw_eye(&mut out, r, RIGHT_COLOR);
    }
    let scale = (img.width().min(img.height()) as i64 / 128).max(1);
    draw_text(
        &mut out,
        &format!("{:.3}", report.iou()),
        2 * scale,
        2 * scale,
        scale,
        [255, 255, 0],
    );
    out
}
