//! Per-face analysis: crop each eye, locate the limbus, isolate the corneal
//! highlights and compare the two eyes by IoU after translation.

use std::fmt;

use crate::annotation::{EyeLandmarks, FaceAnnotation};
use crate::edges::{canny_with_gradients, CannyParams};
use crate::error::{Error, Result};
use crate::hough::{detect_limbus_with, Circle, LimbusSearch};
use crate::imaging::{
    crop, fill_polygon, mask_intersect, to_grayscale, BinaryMask, GrayImage, Rect, RgbImage,
};
use crate::threshold::{binarize_above, histogram256, yen_threshold, ThresholdResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineParams {
    pub canny: CannyParams,
    pub limbus: LimbusSearch,
    /// Fraction of the landmark box added on each side of the crop.
    pub crop_margin: f64,
    /// Half-width of the translation search around center alignment.
    pub align_search: u32,
    /// Scale the right highlight by `r_left / r_right` before aligning.
    pub rescale_right: bool,
    /// Highlight pixels must also exceed the corneal median by this many
    /// intensity levels.
    pub highlight_min_contrast: u8,
    /// Pixels trimmed off the limbus radius when forming the corneal mask,
    /// keeping the soft limbus band and sclera out of the histogram.
    pub limbus_inset: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            limbus: LimbusSearch::default(),
            crop_margin: 0.4,
            align_search: 3,
            rescale_right: false,
            highlight_min_contrast: 40,
            limbus_inset: 1.5,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.canny.validate()?;
        self.limbus.validate()?;
        if !(self.crop_margin >= 0.0) || !self.crop_margin.is_finite() {
            return Err(Error::InvalidParams(format!(
                "crop margin must be >= 0, got {}",
                self.crop_margin
            )));
        }
        if !(self.limbus_inset >= 0.0) || !self.limbus_inset.is_finite() {
            return Err(Error::InvalidParams(format!(
                "limbus inset must be >= 0, got {}",
                self.limbus_inset
            )));
        }
        Ok(())
    }
}

/// Landmark box grown by `margin` of its size on each side, padded to a
/// square where the image allows, and kept inside the image.
pub fn eye_crop_box(lm: &EyeLandmarks, margin: f64, image_dims: (u32, u32)) -> Result<Rect> {
    let (iw, ih) = image_dims;
    let (x0, y0, x1, y1) = lm.bounds();
    let (bw, bh) = (x1 - x0, y1 - y0);
    if bw <= 0.0 || bh <= 0.0 {
        return Err(Error::DegenerateLandmarks);
    }
    if x0 < 0.0 || y0 < 0.0 || x1 > iw as f64 || y1 > ih as f64 {
        return Err(Error::BadAnnotation(
            "eye landmarks fall outside the image".into(),
        ));
    }
    let (ex0, ex1) = (x0 - margin * bw, x1 + margin * bw);
    let (ey0, ey1) = (y0 - margin * bh, y1 + margin * bh);
    let side = (ex1 - ex0).max(ey1 - ey0);
    let (cx, cy) = ((ex0 + ex1) / 2.0, (ey0 + ey1) / 2.0);

    let place = |center: f64, extent: u32| -> (u32, u32) {
        let lo = (center - side / 2.0).floor();
        let hi = (center + side / 2.0).ceil();
        let len = ((hi - lo) as i64).min(extent as i64);
        let start = (lo as i64).clamp(0, extent as i64 - len);
        (start as u32, len as u32)
    };
    let (x, w) = place(cx, iw);
    let (y, h) = place(cy, ih);
    Ok(Rect::new(x, y, w, h))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EyeAnalysis {
    /// Crop rectangle in image coordinates; all masks live in this frame.
    pub crop: Rect,
    pub eye_mask: BinaryMask,
    pub limbus: Circle,
    pub corneal_mask: BinaryMask,
    pub highlight: BinaryMask,
    pub threshold: ThresholdResult,
}

fn median_in(img: &GrayImage, region: &BinaryMask) -> u8 {
    let mut vals: Vec<u8> = img
        .data()
        .iter()
        .zip(region.bits())
        .filter_map(|(&v, &m)| m.then_some(v))
        .collect();
    if vals.is_empty() {
        return 0;
    }
    let mid = vals.len() / 2;
    *vals.select_nth_unstable(mid).1
}

pub fn analyze_eye(img: &GrayImage, lm: &EyeLandmarks, p: &PipelineParams) -> Result<EyeAnalysis> {
    p.validate()?;
    let rect = eye_crop_box(lm, p.crop_margin, (img.width(), img.height()))?;
    let patch = crop(img, rect)?;
    let local = lm.translated(-(rect.x as f64), -(rect.y as f64));
    let eye_mask = fill_polygon(&local.polygon(), rect.w, rect.h).map_err(|e| match e {
        Error::DegeneratePolygon => Error::DegenerateLandmarks,
        other => other,
    })?;

    let (edges, grads) = canny_with_gradients(&patch, &p.canny)?;
    let limbus = detect_limbus_with(&edges, local.bounding_rect(), &grads, &p.limbus)?;

    let cornea_r = (limbus.r - p.limbus_inset).max(1.0);
    let disc = BinaryMask::disc(rect.w, rect.h, limbus.cx, limbus.cy, cornea_r);
    let corneal_mask = mask_intersect(&eye_mask, &disc)?;
    let hist = histogram256(&patch, &corneal_mask)?;
    let threshold = match yen_threshold(&hist) {
        Ok(t) => t,
        // flat cornea: nothing is brighter than the only level present
        Err(Error::DegenerateHistogram) => ThresholdResult {
            t: hist.counts.iter().rposition(|&c| c > 0).unwrap_or(0) as u8,
            criterion: 0.0,
        },
        Err(e) => return Err(e),
    };
    let floor = median_in(&patch, &corneal_mask).saturating_add(p.highlight_min_contrast);
    let cut = threshold.t.max(floor);
    let highlight = binarize_above(&patch, &corneal_mask, cut)?;
    Ok(EyeAnalysis {
        crop: rect,
        eye_mask,
        limbus,
        corneal_mask,
        highlight,
        threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairStatus {
    Ok,
    NoHighlightLeft,
    NoHighlightRight,
    NoHighlightBoth,
}

impl PairStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairStatus::Ok => "ok",
            PairStatus::NoHighlightLeft => "no_highlight_left",
            PairStatus::NoHighlightRight => "no_highlight_right",
            PairStatus::NoHighlightBoth => "no_highlight_both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairScore {
    pub iou: f64,
    /// Offset added to right-eye crop coordinates to land in the left crop.
    pub translation: (i64, i64),
    pub status: PairStatus,
}

/// Right highlight as points, optionally rescaled about its limbus center.
fn right_points(right: &EyeAnalysis, scale: Option<f64>) -> Vec<(i64, i64)> {
    let Some(k) = scale else {
        return right
            .highlight
            .points()
            .map(|(x, y)| (x as i64, y as i64))
            .collect();
    };
    let (cx, cy) = (right.limbus.cx, right.limbus.cy);
    let pts: Vec<(u32, u32)> = right.highlight.points().collect();
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in &pts {
        let qx = cx + (x as f64 - cx) * k;
        let qy = cy + (y as f64 - cy) * k;
        x0 = x0.min((qx - k).floor() as i64);
        y0 = y0.min((qy - k).floor() as i64);
        x1 = x1.max((qx + k).ceil() as i64);
        y1 = y1.max((qy + k).ceil() as i64);
    }
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let sx = (cx + (x as f64 - cx) / k).round() as i64;
            let sy = (cy + (y as f64 - cy) / k).round() as i64;
            if right.highlight.get_signed(sx, sy) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Best IoU of the two highlight masks over integer translations within
/// `align_search` of limbus-center alignment.
///
/// Masks are compared as point sets, so the union is `|L| + |R| - |L & R|`
/// regardless of either crop's extent.
pub fn align_and_score(left: &EyeAnalysis, right: &EyeAnalysis, p: &PipelineParams) -> PairScore {
    let scale = (p.rescale_right && right.limbus.r > 0.0).then(|| left.limbus.r / right.limbus.r);
    let rpts = right_points(right, scale);
    let l_count = left.highlight.count();
    let base = (
        (left.limbus.cx - right.limbus.cx).round() as i64,
        (left.limbus.cy - right.limbus.cy).round() as i64,
    );
    let status = match (l_count == 0, rpts.is_empty()) {
        (true, true) => PairStatus::NoHighlightBoth,
        (true, false) => PairStatus::NoHighlightLeft,
        (false, true) => PairStatus::NoHighlightRight,
        (false, false) => PairStatus::Ok,
    };
    if status != PairStatus::Ok {
        return PairScore {
            iou: 0.0,
            translation: base,
            status,
        };
    }

    let s = p.align_search as i64;
    let mut offsets: Vec<(i64, i64)> = (-s..=s)
        .flat_map(|ey| (-s..=s).map(move |ex| (ex, ey)))
        .collect();
    offsets.sort_by_key(|&(ex, ey)| (ex * ex + ey * ey, ey, ex));

    let mut best = (-1.0, base);
    for (ex, ey) in offsets {
        let (dx, dy) = (base.0 + ex, base.1 + ey);
        let inter = rpts
            .iter()
            .filter(|&&(x, y)| left.highlight.get_signed(x + dx, y + dy))
            .count();
        let union = l_count + rpts.len() - inter;
        let iou = inter as f64 / union as f64;
        if iou > best.0 {
            best = (iou, (dx, dy));
        }
    }
    PairScore {
        iou: best.0,
        translation: best.1,
        status: PairStatus::Ok,
    }
}

/// Why an eye (or a whole face) could not be scored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Failure {
    NoCircle,
    EmptyCornea,
    BadAnnotation(String),
    Io(String),
    Image(String),
    Other(String),
}

impl Failure {
    pub fn code(&self) -> &'static str {
        match self {
            Failure::NoCircle => "failed_no_circle",
            Failure::EmptyCornea => "failed_empty_cornea",
            Failure::BadAnnotation(_) => "failed_bad_annotation",
            Failure::Io(_) => "failed_io",
            Failure::Image(_) => "failed_image",
            Failure::Other(_) => "failed_other",
        }
    }
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        match e {
            Error::NoCircleFound => Failure::NoCircle,
            Error::EmptyRegion => Failure::EmptyCornea,
            Error::BadAnnotation(_)
            | Error::DegenerateLandmarks
            | Error::DegeneratePolygon
            | Error::OutOfBounds { .. } => Failure::BadAnnotation(e.to_string()),
            Error::FileNotFound(_) | Error::Io(_) => Failure::Io(e.to_string()),
            Error::UnsupportedFormat(_) | Error::CorruptImage(_) => Failure::Image(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(&e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::NoCircle => write!(f, "no limbus circle found"),
            Failure::EmptyCornea => write!(f, "corneal region is empty"),
            Failure::BadAnnotation(m) | Failure::Io(m) | Failure::Image(m) | Failure::Other(m) => {
                write!(f, "{m}")
            }
        }
    }
}

/// Outcome of a face as reported in batch records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pair(PairStatus),
    Failed(Failure),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Pair(PairStatus::Ok))
    }

    pub fn code(&self) -> &'static str {
        match self {
            Status::Pair(p) => p.as_str(),
            Status::Failed(f) => f.code(),
        }
    }

    pub fn parse(code: &str) -> Option<Status> {
        let s = match code {
            "ok" => Status::Pair(PairStatus::Ok),
            "no_highlight_left" => Status::Pair(PairStatus::NoHighlightLeft),
            "no_highlight_right" => Status::Pair(PairStatus::NoHighlightRight),
            "no_highlight_both" => Status::Pair(PairStatus::NoHighlightBoth),
            "failed_no_circle" => Status::Failed(Failure::NoCircle),
            "failed_empty_cornea" => Status::Failed(Failure::EmptyCornea),
            "failed_bad_annotation" => Status::Failed(Failure::BadAnnotation(String::new())),
            "failed_io" => Status::Failed(Failure::Io(String::new())),
            "failed_image" => Status::Failed(Failure::Image(String::new())),
            "failed_other" => Status::Failed(Failure::Other(String::new())),
            _ => return None,
        };
        Some(s)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug)]
pub struct FaceReport {
    pub left: std::result::Result<EyeAnalysis, Failure>,
    pub right: std::result::Result<EyeAnalysis, Failure>,
    /// Present when both eyes were analyzed.
    pub score: Option<PairScore>,
}

impl FaceReport {
    pub fn status(&self) -> Status {
        match (&self.left, &self.right, &self.score) {
            (_, _, Some(s)) => Status::Pair(s.status),
            (Err(f), _, None) | (_, Err(f), None) => Status::Failed(f.clone()),
            (Ok(_), Ok(_), None) => Status::Failed(Failure::Other("unscored".into())),
        }
    }

    /// IoU, zero unless the status is ok.
    pub fn iou(&self) -> f64 {
        self.score.map_or(0.0, |s| s.iou)
    }
}

pub fn analyze_face(img: &RgbImage, ann: &FaceAnnotation, p: &PipelineParams) -> FaceReport {
    let gray = to_grayscale(img);
    let (left, right) = rayon::join(
        || analyze_eye(&gray, &ann.image_left_eye, p).map_err(Failure::from),
        || analyze_eye(&gray, &ann.image_right_eye, p).map_err(Failure::from),
    );
    let score = match (&left, &right) {
        (Ok(l), Ok(r)) => Some(align_and_score(l, r, p)),
        _ => None,
    };
    FaceReport { left, right, score }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Point;
    use proptest::prelude::*;

    fn lm_box(x0: f64, y0: f64, x1: f64, y1: f64) -> EyeLandmarks {
        let (mx, my) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        EyeLandmarks::new(&[
            Point::new(x0, my),
            Point::new(mx - 10.0, y0),
            Point::new(mx + 10.0, y0),
            Point::new(x1, my),
            Point::new(mx + 10.0, y1),
            Point::new(mx - 10.0, y1),
        ])
        .unwrap()
    }

    fn analysis(mask: BinaryMask, cx: f64, cy: f64) -> EyeAnalysis {
        let (w, h) = (mask.width(), mask.height());
        EyeAnalysis {
            crop: Rect::new(0, 0, w, h),
            eye_mask: BinaryMask::from_fn(w, h, |_, _| true),
            limbus: Circle { cx, cy, r: 8.0 },
            corneal_mask: BinaryMask::from_fn(w, h, |_, _| true),
            highlight: mask,
            threshold: ThresholdResult {
                t: 128,
                criterion: 0.0,
            },
        }
    }

    fn square(w: u32, h: u32, x0: u32, y0: u32, side: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
        })
    }

    #[test]
    fn crop_box_arithmetic() {
        let lm = lm_box(100.0, 100.0, 160.0, 130.0);
        assert_eq!(lm.bounding_rect(), Rect::new(100, 100, 60, 30));
        assert_eq!(
            eye_crop_box(&lm, 0.0, (1024, 1024)).unwrap(),
            Rect::new(100, 85, 60, 60)
        );
        // 24 px and 12 px per side, then squared to 108
        assert_eq!(
            eye_crop_box(&lm, 0.4, (1024, 1024)).unwrap(),
            Rect::new(76, 61, 108, 108)
        );
    }

    #[test]
    fn crop_box_stays_inside_image() {
        let lm = lm_box(2.0, 5.0, 62.0, 35.0);
        let r = eye_crop_box(&lm, 0.4, (80, 50)).unwrap();
        assert!(r.fits_within(80, 50));
        assert_eq!((r.x, r.y, r.h), (0, 0, 50));
        assert_eq!(r.w, 80);
    }

    #[test]
    fn crop_box_rejects_outside_landmarks() {
        let lm = lm_box(100.0, 100.0, 160.0, 130.0);
        assert!(matches!(
            eye_crop_box(&lm, 0.4, (150, 150)),
            Err(Error::BadAnnotation(_))
        ));
    }

    #[test]
    fn identical_masks_score_one() {
        let l = analysis(square(20, 20, 5, 6, 4), 10.0, 10.0);
        let r = analysis(square(24, 24, 7, 9, 4), 12.0, 13.0);
        let s = align_and_score(&l, &r, &PipelineParams::default());
        assert_eq!(s.iou, 1.0);
        assert_eq!(s.translation, (-2, -3));
        assert_eq!(s.status, PairStatus::Ok);
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let l = analysis(square(40, 40, 0, 0, 3), 20.0, 20.0);
        let r = analysis(square(40, 40, 30, 30, 3), 20.0, 20.0);
        let s = align_and_score(&l, &r, &PipelineParams::default());
        assert_eq!(s.iou, 0.0);
    }

    #[test]
    fn partial_overlap_without_search() {
        let l = analysis(square(20, 20, 5, 5, 3), 10.0, 10.0);
        let r = analysis(square(20, 20, 6, 6, 3), 10.0, 10.0);
        let p = PipelineParams {
            align_search: 0,
            ..Default::default()
        };
        let s = align_and_score(&l, &r, &p);
        assert!((s.iou - 4.0 / 14.0).abs() < 1e-12);
        // with search the shift is recovered
        assert_eq!(align_and_score(&l, &r, &PipelineParams::default()).iou, 1.0);
    }

    #[test]
    fn empty_highlights_set_status() {
        let full = analysis(square(10, 10, 2, 2, 2), 5.0, 5.0);
        let empty = analysis(BinaryMask::new(10, 10), 5.0, 5.0);
        let p = PipelineParams::default();
        let s = align_and_score(&empty, &full, &p);
        assert_eq!((s.status, s.iou), (PairStatus::NoHighlightLeft, 0.0));
        assert_eq!(
            align_and_score(&full, &empty, &p).status,
            PairStatus::NoHighlightRight
        );
        assert_eq!(
            align_and_score(&empty, &empty, &p).status,
            PairStatus::NoHighlightBoth
        );
    }

    #[test]
    fn rescale_matches_radii() {
        let l = analysis(BinaryMask::disc(60, 60, 30.0, 30.0, 8.0), 30.0, 30.0);
        let mut r = analysis(BinaryMask::disc(60, 60, 30.0, 30.0, 4.0), 30.0, 30.0);
        r.limbus.r = 4.0;
        let plain = align_and_score(&l, &r, &PipelineParams::default()).iou;
        let p = PipelineParams {
            rescale_right: true,
            ..Default::default()
        };
        let scaled = align_and_score(&l, &r, &p).iou;
        assert!(plain < 0.3);
        assert!(scaled > 0.8, "scaled iou {scaled}");
    }

    #[test]
    fn status_codes_round_trip() {
        for s in [
            Status::Pair(PairStatus::Ok),
            Status::Pair(PairStatus::NoHighlightBoth),
            Status::Failed(Failure::NoCircle),
            Status::Failed(Failure::EmptyCornea),
        ] {
            assert_eq!(Status::parse(s.code()), Some(s));
        }
        assert_eq!(Status::parse("bogus"), None);
    }

    /// Direct IoU at a fixed offset by scanning both full frames.
    fn naive_iou(l: &BinaryMask, r: &BinaryMask, dx: i64, dy: i64) -> f64 {
        let (mut inter, mut lc, mut rc) = (0usize, 0usize, 0usize);
        for y in 0..l.height() {
            for x in 0..l.width() {
                lc += l.get(x, y) as usize;
            }
        }
        for y in 0..r.height() {
            for x in 0..r.width() {
                if r.get(x, y) {
                    rc += 1;
                    if l.get_signed(x as i64 + dx, y as i64 + dy) {
                        inter += 1;
                    }
                }
            }
        }
        inter as f64 / (lc + rc - inter) as f64
    }

    proptest! {
        #[test]
        fn zero_search_matches_naive(lb in proptest::collection::vec(any::<bool>(), 144),
                                     rb in proptest::collection::vec(any::<bool>(), 144),
                                     lcx in 3u32..9, lcy in 3u32..9, rcx in 3u32..9, rcy in 3u32..9) {
            let l = BinaryMask::from_bits(12, 12, lb).unwrap();
            let r = BinaryMask::from_bits(12, 12, rb).unwrap();
            prop_assume!(!l.is_empty() && !r.is_empty());
            let la = analysis(l.clone(), lcx as f64, lcy as f64);
            let ra = analysis(r.clone(), rcx as f64, rcy as f64);
            let p = PipelineParams { align_search: 0, ..Default::default() };
            let s = align_and_score(&la, &ra, &p);
            let want = naive_iou(&l, &r, lcx as i64 - rcx as i64, lcy as i64 - rcy as i64);
            prop_assert_eq!(s.iou, want);
        }

        #[test]
        fn symmetric_and_monotone(lb in proptest::collection::vec(proptest::bool::weighted(0.2), 100),
                                  rb in proptest::collection::vec(proptest::bool::weighted(0.2), 100),
                                  shift in 0u32..3) {
            let l = BinaryMask::from_bits(10, 10, lb).unwrap();
            let r = BinaryMask::from_bits(10, 10, rb).unwrap();
            prop_assume!(!l.is_empty() && !r.is_empty());
            let la = analysis(l, 5.0, 5.0 + shift as f64);
            let ra = analysis(r, 4.0, 5.0);
            let mut last = 0.0;
            for s in 0..4 {
                let p = PipelineParams { align_search: s, ..Default::default() };
                let ab = align_and_score(&la, &ra, &p).iou;
                let ba = align_and_score(&ra, &la, &p).iou;
                prop_assert_eq!(ab, ba);
                prop_assert!(ab >= last);
                last = ab;
            }
        }
    }
}
