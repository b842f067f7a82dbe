//! Circular Hough transform over edge maps and the limbus selection rule
//! built on top of it.

use std::f64::consts::PI;

use crate::edges::{EdgeMap, GradientField};
use crate::error::{Error, Result};
use crate::imaging::{Point, Rect};

/// Half-width of the voting cone around the gradient line when gated.
const GATE_HALF_ANGLE: f64 = 15.0 * PI / 180.0;

/// Accumulator cells with fewer votes never become candidates.
const MIN_CANDIDATE_VOTES: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoughParams {
    pub r_min: u32,
    pub r_max: u32,
    pub top_k: usize,
    pub gradient_gated: bool,
}

impl HoughParams {
    pub fn validate(&self) -> Result<()> {
        if self.r_min == 0 || self.r_min > self.r_max {
            return Err(Error::InvalidParams(format!(
                "hough radii need 0 < r_min <= r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParams("hough top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleCandidate {
    pub circle: Circle,
    pub votes: u32,
    /// Votes divided by the circumference `2 pi r`.
    pub score: f64,
}

/// Integer offsets at rounded distance `r` from the origin, sorted by angle.
struct Ring {
    offsets: Vec<(i32, i32)>,
    angles: Vec<f64>,
}

impl Ring {
    fn new(r: u32) -> Self {
        let ri = r as i32 + 1;
        let lo = r as f64 - 0.5;
        let hi = r as f64 + 0.5;
        let mut pts: Vec<(f64, i32, i32)> = Vec::new();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let d = (dx as f64).hypot(dy as f64);
                if d >= lo && d < hi {
                    pts.push(((dy as f64).atan2(dx as f64), dx, dy));
                }
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        Ring {
            angles: pts.iter().map(|p| p.0).collect(),
            offsets: pts.iter().map(|p| (p.1, p.2)).collect(),
        }
    }

    /// Offsets whose angle lies in `[center - half, center + half]`, with
    /// wrap-around at +-pi.
    fn window(&self, center: f64, half: f64, mut visit: impl FnMut((i32, i32))) {
        let mut lo = center - half;
        let mut hi = center + half;
        // bring lo into [-pi, pi)
        while lo < -PI {
            lo += 2.0 * PI;
            hi += 2.0 * PI;
        }
        while lo >= PI {
            lo -= 2.0 * PI;
            hi -= 2.0 * PI;
        }
        let start = self.angles.partition_point(|&a| a < lo);
        if hi <= PI {
            let end = self.angles.partition_point(|&a| a <= hi);
            self.offsets[start..end]
                .iter()
                .copied()
                .for_each(&mut visit);
        } else {
            self.offsets[start..].iter().copied().for_each(&mut visit);
            let end = self.angles.partition_point(|&a| a <= hi - 2.0 * PI);
            self.offsets[..end].iter().copied().for_each(&mut visit);
        }
    }
}

/// Votes every edge pixel into a `(r, cy, cx)` accumulator at one-pixel
/// resolution and returns the best local maxima ranked by
/// circumference-normalized score.
///
/// Without gating an edge pixel votes for the full ring of centers at each
/// radius; with gating only for centers within 15 degrees of the gradient
/// line through it (both sides). Candidates closer than `r_min / 2` to a
/// better one are dropped.
pub fn hough_circles(
    edges: &EdgeMap,
    p: &HoughParams,
    grads: Option<&GradientField>,
) -> Result<Vec<CircleCandidate>> {
    p.validate()?;
    let (w, h) = (edges.width(), edges.height());
    if p.r_max >= w.max(h) {
        return Err(Error::RadiusRangeTooLarge {
            r_min: p.r_min,
            r_max: p.r_max,
            width: w,
            height: h,
        });
    }
    let grads = match (p.gradient_gated, grads) {
        (true, None) => {
            return Err(Error::InvalidParams(
                "gradient-gated voting needs a gradient field".into(),
            ))
        }
        (true, Some(g)) => {
            if g.width() != w || g.height() != h {
                return Err(Error::DimensionMismatch(w, h, g.width(), g.height()));
            }
            Some(g)
        }
        (false, _) => None,
    };
    let points: Vec<(u32, u32)> = edges.mask.points().collect();
    if points.is_empty() {
        return Err(Error::EmptyEdgeMap);
    }

    let nr = (p.r_max - p.r_min + 1) as usize;
    let plane = w as usize * h as usize;
    let mut acc = vec![0u32; nr * plane];
    for (ri, r) in (p.r_min..=p.r_max).enumerate() {
        let ring = Ring::new(r);
        let layer = &mut acc[ri * plane..(ri + 1) * plane];
        for &(x, y) in &points {
            let mut vote = |(dx, dy): (i32, i32)| {
                let cx = x as i64 + dx as i64;
                let cy = y as i64 + dy as i64;
                if cx >= 0 && cy >= 0 && cx < w as i64 && cy < h as i64 {
                    layer[cy as usize * w as usize + cx as usize] += 1;
                }
            };
            match grads {
                Some(g) => {
                    let phi = g.direction(x, y);
                    ring.window(phi, GATE_HALF_ANGLE, &mut vote);
                    ring.window(phi + PI, GATE_HALF_ANGLE, &mut vote);
                }
                None => ring.offsets.iter().copied().for_each(&mut vote),
            }
        }
    }

    let score_of =
        |ri: usize, votes: u32| votes as f64 / (2.0 * PI * (p.r_min as usize + ri) as f64);
    let mut maxima = Vec::new();
    for ri in 0..nr {
        for cy in 0..h as usize {
            for cx in 0..w as usize {
                let v = acc[ri * plane + cy * w as usize + cx];
                if v < MIN_CANDIDATE_VOTES {
                    continue;
                }
                let s = score_of(ri, v);
                let mut is_max = true;
                'nb: for dr in -1i64..=1 {
                    let nri = ri as i64 + dr;
                    if nri < 0 || nri >= nr as i64 {
                        continue;
                    }
                    for dy in -1i64..=1 {
                        let ny = cy as i64 + dy;
                        if ny < 0 || ny >= h as i64 {
                            continue;
                        }
                        for dx in -1i64..=1 {
                            let nx = cx as i64 + dx;
                            if (dr, dy, dx) == (0, 0, 0) || nx < 0 || nx >= w as i64 {
                                continue;
                            }
                            let nv =
                                acc[nri as usize * plane + ny as usize * w as usize + nx as usize];
                            if score_of(nri as usize, nv) > s {
                                is_max = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_max {
                    maxima.push(CircleCandidate {
                        circle: Circle {
                            cx: cx as f64,
                            cy: cy as f64,
                            r: (p.r_min as usize + ri) as f64,
                        },
                        votes: v,
                        score: s,
                    });
                }
            }
        }
    }

    maxima.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.votes.cmp(&a.votes))
            .then(a.circle.r.total_cmp(&b.circle.r))
            .then(a.circle.cy.total_cmp(&b.circle.cy))
            .then(a.circle.cx.total_cmp(&b.circle.cx))
    });
    let min_sep = p.r_min as f64 / 2.0;
    let mut kept: Vec<CircleCandidate> = Vec::new();
    for c in maxima {
        if kept
            .iter()
            .all(|k| k.circle.center().distance(&c.circle.center()) >= min_sep)
        {
            kept.push(c);
            if kept.len() == p.top_k {
                break;
            }
        }
    }
    Ok(kept)
}

/// How the limbus search is parameterized relative to the eye box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimbusSearch {
    /// Smallest radius as a fraction of the eye-box width.
    pub r_min_frac: f64,
    /// Largest radius as a fraction of the eye-box width.
    pub r_max_frac: f64,
    /// Candidates considered for the centroid-proximity choice.
    pub top_k: usize,
    /// Minimum votes as a fraction of the circumference.
    pub min_support: f64,
    /// Candidates scoring below this fraction of the best score are not
    /// considered for the centroid-proximity choice.
    pub relative_support: f64,
    pub gradient_gated: bool,
}

impl Default for LimbusSearch {
    fn default() -> Self {
        Self {
            r_min_frac: 0.15,
            r_max_frac: 0.50,
            top_k: 5,
            min_support: 0.25,
            relative_support: 0.7,
            gradient_gated: true,
        }
    }
}

impl LimbusSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min_frac > 0.0 && self.r_min_frac <= self.r_max_frac) {
            return Err(Error::InvalidParams(format!(
                "limbus radius fractions need 0 < min <= max, got [{}, {}]",
                self.r_min_frac, self.r_max_frac
            )));
        }
        if self.top_k == 0
            || !(0.0..=1.0).contains(&self.min_support)
            || !(0.0..=1.0).contains(&self.relative_support)
        {
            return Err(Error::InvalidParams(
                "limbus search needs top_k >= 1 and support fractions in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Integer radius bracket for an eye box of the given width.
    pub fn radius_bounds(&self, eye_box_width: u32) -> (u32, u32) {
        let w = eye_box_width as f64;
        let r_min = (self.r_min_frac * w).round().max(1.0) as u32;
        let r_max = ((self.r_max_frac * w).round() as u32).max(r_min);
        (r_min, r_max)
    }
}

/// Finds the corneal limbus inside an eye crop.
///
/// `eye_box` is the landmark bounding box in crop coordinates; it sets the
/// radius bracket, bounds where the center may lie, and is the point the
/// chosen circle should be nearest to.
pub fn detect_limbus(edges: &EdgeMap, eye_box: Rect, grads: &GradientField) -> Result<Circle> {
    detect_limbus_with(edges, eye_box, grads, &LimbusSearch::default())
}

pub fn detect_limbus_with(
    edges: &EdgeMap,
    eye_box: Rect,
    grads: &GradientField,
    search: &LimbusSearch,
) -> Result<Circle> {
    search.validate()?;
    let (r_min, mut r_max) = search.radius_bounds(eye_box.w);
    let limit = edges.width().max(edges.height());
    if r_max >= limit {
        r_max = limit - 1;
    }
    if r_min > r_max {
        return Err(Error::NoCircleFound);
    }
    let params = HoughParams {
        r_min,
        r_max,
        top_k: usize::MAX,
        gradient_gated: search.gradient_gated,
    };
    let cands = match hough_circles(edges, &params, Some(grads)) {
        Ok(c) => c,
        Err(Error::EmptyEdgeMap) => return Err(Error::NoCircleFound),
        Err(e) => return Err(e),
    };
    let anchor = eye_box.center();
    let cands: Vec<CircleCandidate> = cands
        .into_iter()
        .filter(|c| c.score >= search.min_support && eye_box.contains(c.circle.center()))
        .collect();
    let best = cands.first().map_or(0.0, |c| c.score);
    cands
        .into_iter()
        .take(search.top_k)
        .filter(|c| c.score >= search.relative_support * best)
        .min_by(|a, b| {
            let da = a.circle.center().distance(&anchor);
            let db = b.circle.center().distance(&anchor);
            da.total_cmp(&db).then(b.score.total_cmp(&a.score))
        })
        .map(|c| c.circle)
        .ok_or(Error::NoCircleFound)
}
