//! Deterministic synthetic eye-pair renderer.
//!
//! Each eye is an almond-shaped opening (two half-ellipses sharing the
//! horizontal axis) showing sclera, an iris disc with a darker limbal ring,
//! a pupil, and bright highlight blobs on the cornea. The upper lid can
//! hide part of the iris. Everything is supersampled 4x4 for soft edges,
//! then seeded Gaussian noise is added.
//!
//! The blob pattern is given relative to the limbus center. In consistent
//! mode both eyes carry the same pattern; the other modes alter it on the
//! image-right eye only.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::annotation::{annotation_json, EyeLandmarks, FaceAnnotation};
use crate::error::{Error, Result};
use crate::hough::Circle;
use crate::imaging::{luma, BinaryMask, Point, RgbImage};

const SUPERSAMPLE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlobShape {
    Disc,
    /// Stadium of half-length `size` and radius `size / 2`.
    Capsule,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob {
    pub shape: BlobShape,
    /// Offset of the blob center from the limbus center, in pixels.
    pub offset: (f64, f64),
    pub size: f64,
    /// Capsule orientation in radians; ignored for discs.
    pub angle: f64,
    pub intensity: u8,
}

impl Blob {
    fn contains(&self, x: f64, y: f64) -> bool {
        match self.shape {
            BlobShape::Disc => x.hypot(y) <= self.size,
            BlobShape::Capsule => {
                let (s, c) = self.angle.sin_cos();
                // project onto the capsule axis
                let t = (x * c + y * s).clamp(-self.size, self.size);
                (x - t * c).hypot(y - t * s) <= self.size / 2.0
            }
        }
    }

    fn extent(&self) -> f64 {
        self.size
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// Drop the largest blob (or add one when there is only one).
    Count,
    /// Move every blob well outside the alignment window.
    Position,
    /// Swap disc and capsule shapes and change sizes.
    Shape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Perturbed(Perturbation),
    /// A fresh random pattern for the image-right eye.
    Independent,
}

impl fmt::Display for Consistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Consistency::Consistent => "consistent",
            Consistency::Perturbed(Perturbation::Count) => "perturbed_count",
            Consistency::Perturbed(Perturbation::Position) => "perturbed_position",
            Consistency::Perturbed(Perturbation::Shape) => "perturbed_shape",
            Consistency::Independent => "independent",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyeConfig {
    /// Limbus center in image pixels; also the center of the eye opening.
    pub center: Point,
    pub radius: f64,
    pub iris: [u8; 3],
    pub sclera: [u8; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EyeSceneConfig {
    pub width: u32,
    pub height: u32,
    /// Image-left then image-right eye.
    pub eyes: [EyeConfig; 2],
    pub skin: [u8; 3],
    /// Limbus radius as a fraction of the eye-opening width.
    pub width_ratio: f64,
    /// Gap between iris bottom and lower lid, as a fraction of the radius.
    pub lower_gap: f64,
    pub pupil_frac: f64,
    /// Fraction of the limbus diameter hidden by the upper lid.
    pub occlusion: f64,
    /// Pattern on the image-left eye.
    pub blobs: Vec<Blob>,
    pub noise_sigma: f64,
    pub mode: Consistency,
    pub seed: u64,
}

impl EyeSceneConfig {
    /// Two eyes of radius `radius` on a canvas just large enough for the
    /// default crop margin, no blobs, no noise.
    pub fn centered_pair(radius: f64) -> Self {
        let a = radius / (2.0 * 0.3);
        let side = (2.0 * a * 1.8).ceil() + 8.0;
        let width = (2.0 * side + 16.0) as u32;
        let height = (side + 8.0) as u32;
        let cy = (height / 2) as f64;
        let lx = (width / 4) as f64;
        EyeSceneConfig {
            width,
            height,
            eyes: [
                EyeConfig {
                    center: Point::new(lx, cy),
                    radius,
                    iris: [92, 62, 42],
                    sclera: [228, 224, 220],
                },
                EyeConfig {
                    center: Point::new(lx + (width / 2) as f64, cy),
                    radius,
                    iris: [92, 62, 42],
                    sclera: [228, 224, 220],
                },
            ],
            skin: [196, 152, 128],
            width_ratio: 0.3,
            lower_gap: 0.1,
            pupil_frac: 0.4,
            occlusion: 0.0,
            blobs: Vec::new(),
            noise_sigma: 0.0,
            mode: Consistency::Consistent,
            seed: 0,
        }
    }

    fn opening(&self, eye: &EyeConfig) -> Opening {
        let r = eye.radius;
        Opening {
            cx: eye.center.x,
            cy: eye.center.y,
            a: r / (2.0 * self.width_ratio),
            b_up: r * (1.0 - 2.0 * self.occlusion),
            b_low: r * (1.0 + self.lower_gap),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigOutOfBounds(m));
        if self.width == 0 || self.height == 0 {
            return bad("empty canvas".into());
        }
        if !(0.0..=0.5).contains(&self.occlusion) {
            return bad(format!("occlusion {} outside [0, 0.5]", self.occlusion));
        }
        if !(self.width_ratio > 0.0 && self.width_ratio <= 0.5) {
            return bad(format!("width ratio {} outside (0, 0.5]", self.width_ratio));
        }
        if !(0.0..1.0).contains(&self.pupil_frac) || self.lower_gap < 0.0 || self.noise_sigma < 0.0
        {
            return bad("pupil fraction, lower gap or noise out of range".into());
        }
        let mut boxes = Vec::new();
        for eye in &self.eyes {
            if !(eye.radius > 0.0) {
                return bad(format!("limbus radius {}", eye.radius));
            }
            let o = self.opening(eye);
            let lash = o.lash_band();
            let (x0, x1) = (o.cx - o.a - lash, o.cx + o.a + lash);
            let (y0, y1) = (
                o.cy - eye.radius.max(o.b_up + lash),
                o.cy + o.b_low.max(eye.radius),
            );
            if x0 < 1.0 || y0 < 1.0 || x1 > self.width as f64 - 2.0 || y1 > self.height as f64 - 2.0
            {
                return bad(format!(
                    "eye at ({:.1}, {:.1}) r={} does not fit the {}x{} canvas",
                    o.cx, o.cy, eye.radius, self.width, self.height
                ));
            }
            let iris_luma = luma(eye.iris[0], eye.iris[1], eye.iris[2]);
            if let Some(b) = self.blobs.iter().find(|b| b.intensity <= iris_luma) {
                return bad(format!(
                    "blob intensity {} not above iris luma {iris_luma}",
                    b.intensity
                ));
            }
            boxes.push((x0, x1));
        }
        if boxes[0].1 >= boxes[1].0 {
            return bad("eye openings overlap".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Opening {
    cx: f64,
    cy: f64,
    a: f64,
    b_up: f64,
    b_low: f64,
}

impl Opening {
    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.a;
        let dy = y - self.cy;
        let b = if dy < 0.0 { self.b_up } else { self.b_low };
        dx * dx + (dy / b) * (dy / b) <= 1.0
    }

    fn lash_band(&self) -> f64 {
        (0.05 * self.a).max(1.5)
    }

    /// Dark band just above the upper lid.
    fn in_lash(&self, x: f64, y: f64) -> bool {
        if y >= self.cy || self.contains(x, y) {
            return false;
        }
        let band = self.lash_band();
        let dx = (x - self.cx) / (self.a + band * 0.3);
        let dy = (y - self.cy) / (self.b_up + band);
        dx * dx + dy * dy <= 1.0
    }

    /// Point on the lid boundary at horizontal offset `t * a`.
    fn lid_point(&self, t: f64, upper: bool) -> Point {
        let h = (1.0 - t * t).max(0.0).sqrt();
        let y = if upper {
            self.cy - self.b_up * h
        } else {
            self.cy + self.b_low * h
        };
        Point::new(self.cx + t * self.a, y)
    }

    /// Six landmarks in 68-point order: left corner, two upper-lid points
    /// left to right, right corner, two lower-lid points right to left.
    fn landmarks(&self) -> EyeLandmarks {
        let pts = [
            Point::new(self.cx - self.a, self.cy),
            self.lid_point(-1.0 / 3.0, true),
            self.lid_point(1.0 / 3.0, true),
            Point::new(self.cx + self.a, self.cy),
            self.lid_point(1.0 / 3.0, false),
            self.lid_point(-1.0 / 3.0, false),
        ];
        EyeLandmarks::new(&pts).expect("opening has positive extent")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub limbus: [Circle; 2],
    /// Full-image masks of visible highlight pixels.
    pub highlight: [BinaryMask; 2],
    pub consistent: bool,
    pub right_blobs: Vec<Blob>,
}

impl GroundTruth {
    /// IoU of the two truth masks after mapping the right limbus center onto
    /// the left one (rounded to whole pixels).
    pub fn aligned_iou(&self) -> f64 {
        let dx = (self.limbus[0].cx - self.limbus[1].cx).round() as i64;
        let dy = (self.limbus[0].cy - self.limbus[1].cy).round() as i64;
        let left = &self.highlight[0];
        let lc = left.count();
        let mut rc = 0;
        let mut inter = 0;
        for (x, y) in self.highlight[1].points() {
            rc += 1;
            if left.get_signed(x as i64 + dx, y as i64 + dy) {
                inter += 1;
            }
        }
        if lc + rc == 0 {
            return 0.0;
        }
        inter as f64 / (lc + rc - inter) as f64
    }
}

/// Blob pattern for the image-right eye under `mode`.
fn right_pattern(
    blobs: &[Blob],
    mode: Consistency,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Blob> {
    match mode {
        Consistency::Consistent => blobs.to_vec(),
        Consistency::Independent => {
            let n = rng.random_range(1..=3);
            random_blobs(rng, radius, n)
        }
        Consistency::Perturbed(Perturbation::Count) => {
            let mut out = blobs.to_vec();
            if out.len() >= 2 {
                let largest = out
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.size.total_cmp(&b.1.size))
                    .map(|(i, _)| i)
                    .expect("non-empty");
                out.remove(largest);
            } else {
                let extra = random_blobs_avoiding(rng, radius, 2, &out);
                out.extend(extra);
            }
            out
        }
        Consistency::Perturbed(Perturbation::Position) => {
            let limit = 0.62 * radius;
            blobs
                .iter()
                .map(|b| {
                    let min_shift = 2.0 * b.size + 4.0;
                    let mut best = *b;
                    for _ in 0..64 {
                        let t = rng.random_range(0.0..std::f64::consts::TAU);
                        let d = rng.random_range(min_shift..min_shift + 0.3 * radius);
                        let nx = b.offset.0 + d * t.cos();
                        let ny = b.offset.1 + d * t.sin();
                        if nx.hypot(ny) + b.size <= limit {
                            best.offset = (nx, ny);
                            break;
                        }
                        // fall back to the mirror position through the center
                        best.offset = (
                            -b.offset.0 * 1.0,
                            -b.offset.1 - min_shift.copysign(b.offset.1),
                        );
                    }
                    best
                })
                .collect()
        }
        Consistency::Perturbed(Perturbation::Shape) => blobs
            .iter()
            .map(|b| {
                let mut n = *b;
                match b.shape {
                    BlobShape::Disc => {
                        n.shape = BlobShape::Capsule;
                        n.size = b.size * 1.9;
                        n.angle = rng.random_range(0.0..std::f64::consts::PI);
                    }
                    BlobShape::Capsule => {
                        n.shape = BlobShape::Disc;
                        n.size = b.size * 0.5;
                    }
                }
                n
            })
            .collect(),
    }
}

/// Random non-overlapping blobs on a cornea of radius `radius`.
pub fn random_blobs(rng: &mut ChaCha8Rng, radius: f64, n: usize) -> Vec<Blob> {
    random_blobs_avoiding(rng, radius, n, &[])
}

fn random_blobs_avoiding(
    rng: &mut ChaCha8Rng,
    radius: f64,
    n: usize,
    existing: &[Blob],
) -> Vec<Blob> {
    let mut placed: Vec<Blob> = existing.to_vec();
    let mut out = Vec::with_capacity(n);
    let limit = 0.62 * radius;
    for _ in 0..n {
        for _attempt in 0..200 {
            let shape = if rng.random_bool(0.7) {
                BlobShape::Disc
            } else {
                BlobShape::Capsule
            };
            let size = match shape {
                BlobShape::Disc => rng.random_range(0.10..0.18) * radius,
                BlobShape::Capsule => rng.random_range(0.16..0.26) * radius,
            }
            .max(1.5);
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            let d = rng.random_range(0.0..(limit - size).max(0.5));
            let blob = Blob {
                shape,
                offset: (d * t.cos(), d * t.sin()),
                size,
                angle: rng.random_range(0.0..std::f64::consts::PI),
                intensity: rng.random_range(236..=255),
            };
            let clear = placed.iter().all(|b| {
                let gap = (b.offset.0 - blob.offset.0).hypot(b.offset.1 - blob.offset.1);
                gap >= b.extent() + blob.extent() + 2.0
            });
            if clear {
                placed.push(blob);
                out.push(blob);
                break;
            }
        }
    }
    out
}

struct EyeLayer<'a> {
    eye: &'a EyeConfig,
    opening: Opening,
    blobs: &'a [Blob],
    pupil_r: f64,
    bounds: (i64, i64, i64, i64),
}

impl EyeLayer<'_> {
    /// Color of one subsample and whether it is a visible highlight.
    fn sample(&self, x: f64, y: f64, skin: [u8; 3]) -> ([f64; 3], bool) {
        let o = &self.opening;
        let to_f = |c: [u8; 3]| [c[0] as f64, c[1] as f64, c[2] as f64];
        if !o.contains(x, y) {
            if o.in_lash(x, y) {
                return ([52.0, 38.0, 34.0], false);
            }
            return (to_f(skin), false);
        }
        let (dx, dy) = (x - self.eye.center.x, y - self.eye.center.y);
        let d = dx.hypot(dy);
        let r = self.eye.radius;
        if d > r {
            return (to_f(self.eye.sclera), false);
        }
        if let Some(b) = self
            .blobs
            .iter()
            .find(|b| b.contains(dx - b.offset.0, dy - b.offset.1))
        {
            let v = b.intensity as f64;
            return ([v, v, v], true);
        }
        if d <= self.pupil_r {
            return ([18.0, 16.0, 16.0], false);
        }
        let iris = to_f(self.eye.iris);
        if d > 0.86 * r {
            return (iris.map(|c| c * 0.6), false);
        }
        (iris, false)
    }
}

/// Renders the scene, its landmark annotation and ground truth.
///
/// The annotation's image path is left empty; corpus writers fill it in.
pub fn render_eye_pair(cfg: &EyeSceneConfig) -> Result<(RgbImage, FaceAnnotation, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let right_blobs = right_pattern(&cfg.blobs, cfg.mode, cfg.eyes[1].radius, &mut rng);
    let patterns = [cfg.blobs.as_slice(), right_blobs.as_slice()];

    let layers: Vec<EyeLayer> = cfg
        .eyes
        .iter()
        .zip(patterns)
        .map(|(eye, blobs)| {
            let opening = cfg.opening(eye);
            let pad = opening.lash_band() + 2.0;
            let top = eye.radius.max(opening.b_up) + pad;
            let bottom = eye.radius.max(opening.b_low) + pad;
            EyeLayer {
                eye,
                opening,
                blobs,
                pupil_r: cfg.pupil_frac * eye.radius,
                bounds: (
                    (opening.cx - opening.a - pad).floor() as i64,
                    (opening.cy - top).floor() as i64,
                    (opening.cx + opening.a + pad).ceil() as i64,
                    (opening.cy + bottom).ceil() as i64,
                ),
            }
        })
        .collect();

    let (w, h) = (cfg.width, cfg.height);
    let mut img = RgbImage::filled(w, h, cfg.skin)?;
    let mut truth = [BinaryMask::new(w, h), BinaryMask::new(w, h)];
    let n_sub = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    let step = 1.0 / SUPERSAMPLE as f64;
    let start = -0.5 + step / 2.0;
    for (k, layer) in layers.iter().enumerate() {
        let (x0, y0, x1, y1) = layer.bounds;
        for py in y0.max(0)..=y1.min(h as i64 - 1) {
            for px in x0.max(0)..=x1.min(w as i64 - 1) {
                let mut acc = [0.0; 3];
                let mut lit = 0u32;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let x = px as f64 + start + sx as f64 * step;
                        let y = py as f64 + start + sy as f64 * step;
                        let (c, hl) = layer.sample(x, y, cfg.skin);
                        for i in 0..3 {
                            acc[i] += c[i];
                        }
                        lit += hl as u32;
                    }
                }
                let rgb = acc.map(|v| (v / n_sub).round().clamp(0.0, 255.0) as u8);
                img.put(px as u32, py as u32, rgb);
                if lit as f64 >= n_sub / 2.0 {
                    truth[k].set(px as u32, py as u32, true);
                }
            }
        }
    }

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma checked");
        let mut noisy = Vec::with_capacity(img.data().len());
        for &v in img.data() {
            let n: f64 = normal.sample(&mut rng);
            noisy.push((v as f64 + n).round().clamp(0.0, 255.0) as u8);
        }
        img = RgbImage::new(w, h, noisy)?;
    }

    let ann = FaceAnnotation::new(
        PathBuf::new(),
        layers[0].opening.landmarks(),
        layers[1].opening.landmarks(),
    )?;
    let gt = GroundTruth {
        limbus: [0, 1].map(|i| Circle {
            cx: cfg.eyes[i].center.x,
            cy: cfg.eyes[i].center.y,
            r: cfg.eyes[i].radius,
        }),
        highlight: truth,
        consistent: cfg.mode == Consistency::Consistent,
        right_blobs,
    };
    Ok((img, ann, gt))
}

/// Ranges the corpus generator samples each image's scene from.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub width: u32,
    pub height: u32,
    pub radius: (f64, f64),
    pub noise_sigma: (f64, f64),
    pub occlusion: (f64, f64),
    pub blob_count: (usize, usize),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            width: 512,
            height: 256,
            radius: (18.0, 26.0),
            noise_sigma: (0.0, 6.0),
            occlusion: (0.0, 0.25),
            blob_count: (1, 3),
        }
    }
}

const IRIS_PALETTE: [[u8; 3]; 5] = [
    [92, 62, 42],
    [70, 48, 36],
    [110, 90, 60],
    [80, 110, 140],
    [90, 115, 85],
];

/// Draws the scene for corpus image `index` of the given class.
pub fn corpus_scene(
    base: &CorpusConfig,
    seed: u64,
    index: u64,
    consistent: bool,
) -> EyeSceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index * 2 + consistent as u64);
    let radius = rng.random_range(base.radius.0..=base.radius.1);
    let iris = IRIS_PALETTE[rng.random_range(0..IRIS_PALETTE.len())];
    let sclera_v = rng.random_range(205..=232u8);
    let sclera = [sclera_v, sclera_v - 4, sclera_v - 8];
    let skin = [
        rng.random_range(150..=215u8),
        rng.random_range(110..=165u8),
        rng.random_range(90..=140u8),
    ];
    // shared sub-pixel phase and an integer inter-eye distance
    let (fx, fy) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let cy = (base.height / 2) as f64 + rng.random_range(-4..=4) as f64 + fy;
    let lx = (base.width / 4) as f64 + rng.random_range(-6..=6) as f64 + fx;
    let sep = (base.width / 2) as f64 + rng.random_range(-8..=8) as f64;
    let n_blobs = rng.random_range(base.blob_count.0..=base.blob_count.1);
    let blobs = random_blobs(&mut rng, radius, n_blobs);
    let mode = if consistent {
        Consistency::Consistent
    } else {
        match rng.random_range(0..4) {
            0 => Consistency::Perturbed(Perturbation::Count),
            1 => Consistency::Perturbed(Perturbation::Position),
            2 => Consistency::Perturbed(Perturbation::Shape),
            _ => Consistency::Independent,
        }
    };
    EyeSceneConfig {
        width: base.width,
        height: base.height,
        eyes: [
            EyeConfig {
                center: Point::new(lx, cy),
                radius,
                iris,
                sclera,
            },
            EyeConfig {
                center: Point::new(lx + sep, cy),
                radius,
                iris,
                sclera,
            },
        ],
        skin,
        width_ratio: rng.random_range(0.28..0.32),
        lower_gap: rng.random_range(0.05..0.2),
        pupil_frac: rng.random_range(0.3..0.45),
        occlusion: rng.random_range(base.occlusion.0..=base.occlusion.1),
        blobs,
        noise_sigma: rng.random_range(base.noise_sigma.0..=base.noise_sigma.1),
        mode,
        seed: rng.random(),
    }
}

#[derive(Clone, Debug)]
pub struct CorpusPaths {
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
}

/// Writes `n_per_class` consistent ("real") and inconsistent ("fake") eye
/// pairs with sidecars, `manifest.csv` and `ground_truth.csv` to `out_dir`.
pub fn make_corpus(
    n_per_class: usize,
    base: &CorpusConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<CorpusPaths> {
    if n_per_class == 0 {
        return Err(Error::InvalidParams(
            "corpus needs at least one image per class".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let jobs: Vec<(bool, usize)> = [true, false]
        .into_iter()
        .flat_map(|c| (0..n_per_class).map(move |i| (c, i)))
        .collect();
    let rows: Vec<Result<(String, String, &'static str, f64)>> = jobs
        .par_iter()
        .map(|&(consistent, i)| {
            let label = if consistent { "real" } else { "fake" };
            let stem = format!("{label}_{i:04}");
            let cfg = corpus_scene(base, seed, i as u64, consistent);
            let (img, ann, gt) = render_eye_pair(&cfg)?;
            let png = format!("{stem}.png");
            let json = format!("{stem}.json");
            img.save_png(out_dir.join(&png))?;
            std::fs::write(
                out_dir.join(&json),
                annotation_json(&png, &ann.image_left_eye, &ann.image_right_eye),
            )?;
            Ok((png, json, label, gt.aligned_iou()))
        })
        .collect();

    let manifest = out_dir.join("manifest.csv");
    let ground_truth = out_dir.join("ground_truth.csv");
    let mut m = csv::Writer::from_path(&manifest).map_err(csv_io)?;
    let mut g = csv::Writer::from_path(&ground_truth).map_err(csv_io)?;
    m.write_record(["image", "landmarks", "label"])
        .map_err(csv_io)?;
    g.write_record(["image", "label", "true_iou"])
        .map_err(csv_io)?;
    for row in rows {
        let (png, json, label, iou) = row?;
        m.write_record([png.as_str(), json.as_str(), label])
            .map_err(csv_io)?;
        g.write_record([png.as_str(), label, &format!("{iou:.6}")])
            .map_err(csv_io)?;
    }
    m.flush()?;
    g.flush()?;
    Ok(CorpusPaths {
        manifest,
        ground_truth,
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
