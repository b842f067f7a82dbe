//! Batch scoring over a manifest, ROC/AUC and score histograms.
//!
//! Fakes are the positive class and a face is called fake when its IoU is
//! at or below the threshold. Only records with status `ok` and a known
//! label enter the ROC and the histograms.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::annotation::read_annotation;
use crate::error::{Error, Result};
use crate::hough::Circle;
use crate::imaging::load_image;
use crate::pipeline::{analyze_face, Failure, PipelineParams, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Real,
    Fake,
    Unknown,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
            Label::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "real" => Some(Label::Real),
            "fake" => Some(Label::Fake),
            "unknown" => Some(Label::Unknown),
            _ => None,
        }
    }

    fn swapped(self) -> Label {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
            Label::Unknown => Label::Unknown,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    /// Image path as written in the manifest.
    pub image: String,
    pub image_path: PathBuf,
    pub landmarks_path: PathBuf,
    pub label: Label,
}

const MANIFEST_HEADER: [&str; 3] = ["image", "landmarks", "label"];
const RECORD_HEADER: [&str; 12] = [
    "image",
    "label",
    "status",
    "iou",
    "left_cx",
    "left_cy",
    "left_r",
    "right_cx",
    "right_cy",
    "right_r",
    "left_area",
    "right_area",
];

fn parse_err(e: impl fmt::Display) -> Error {
    Error::ManifestParse(e.to_string())
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(parse_err)?;
    if got.iter().ne(want.iter().copied()) {
        return Err(Error::ManifestParse(format!(
            "expected header `{}`, got `{}`",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Parses manifest CSV text; relative paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut rdr, &MANIFEST_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let label = Label::parse(field(2)).ok_or_else(|| {
            Error::ManifestParse(format!("row {}: unknown label `{}`", i + 1, field(2)))
        })?;
        if field(0).is_empty() || field(1).is_empty() {
            return Err(Error::ManifestParse(format!("row {}: empty path", i + 1)));
        }
        rows.push(ManifestRow {
            image: field(0).to_string(),
            image_path: base_dir.join(field(0)),
            landmarks_path: base_dir.join(field(1)),
            label,
        });
    }
    Ok(rows)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or_else(|| Path::new("")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub image: String,
    pub label: Label,
    pub iou: f64,
    pub status: Status,
    /// Limbus circles in image coordinates.
    pub left: Option<Circle>,
    pub right: Option<Circle>,
    pub left_area: Option<u64>,
    pub right_area: Option<u64>,
}

impl ScoreRecord {
    fn failed(row: &ManifestRow, f: Failure) -> Self {
        Self {
            image: row.image.clone(),
            label: row.label,
            iou: 0.0,
            status: Status::Failed(f),
            left: None,
            right: None,
            left_area: None,
            right_area: None,
        }
    }

    /// Included in ROC and histograms.
    pub fn is_scored(&self) -> bool {
        self.status.is_ok() && self.label != Label::Unknown
    }
}

/// Scores one manifest row. The manifest's image path wins over the one
/// in the sidecar.
pub fn evaluate_row(row: &ManifestRow, p: &PipelineParams) -> ScoreRecord {
    let ann = match read_annotation(&row.landmarks_path, 0) {
        Ok(a) => a,
        Err(e) => return ScoreRecord::failed(row, Failure::from(&e)),
    };
    let img = match load_image(&row.image_path) {
        Ok(i) => i,
        Err(e) => return ScoreRecord::failed(row, Failure::from(&e)),
    };
    let report = analyze_face(&img, &ann, p);
    let circle = |e: &std::result::Result<crate::pipeline::EyeAnalysis, Failure>| {
        e.as_ref().ok().map(|a| Circle {
            cx: a.limbus.cx + a.crop.x as f64,
            cy: a.limbus.cy + a.crop.y as f64,
            r: a.limbus.r,
        })
    };
    let area = |e: &std::result::Result<crate::pipeline::EyeAnalysis, Failure>| {
        e.as_ref().ok().map(|a| a.highlight.count() as u64)
    };
    ScoreRecord {
        image: row.image.clone(),
        label: row.label,
        iou: report.iou(),
        status: report.status(),
        left: circle(&report.left),
        right: circle(&report.right),
        left_area: area(&report.left),
        right_area: area(&report.right),
    }
}

/// Scores every row on a pool of `jobs` workers (0 picks the machine's
/// parallelism). Records come back in manifest order.
pub fn batch_evaluate(
    rows: &[ManifestRow],
    p: &PipelineParams,
    jobs: usize,
) -> Result<Vec<ScoreRecord>> {
    p.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(pool.install(|| rows.par_iter().map(|r| evaluate_row(r, p)).collect()))
}

/// Per-label ok/failed counts of a batch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub total: usize,
    /// Indexed real, fake, unknown.
    pub ok: [usize; 3],
    pub not_ok: [usize; 3],
}

impl BatchSummary {
    pub fn of(records: &[ScoreRecord]) -> Self {
        let mut s = BatchSummary {
            total: records.len(),
            ..Default::default()
        };
        for r in records {
            let k = r.label as usize;
            if r.status.is_ok() {
                s.ok[k] += 1;
            } else {
                s.not_ok[k] += 1;
            }
        }
        s
    }

    /// Known-label records left out of the ROC.
    pub fn excluded(&self) -> usize {
        self.not_ok[0] + self.not_ok[1]
    }
}

impl fmt::Display for BatchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "records={}", self.total)?;
        for (k, l) in [Label::Real, Label::Fake, Label::Unknown]
            .iter()
            .enumerate()
        {
            write!(f, " {l}_ok={} {l}_not_ok={}", self.ok[k], self.not_ok[k])?;
        }
        write!(f, " excluded={}", self.excluded())
    }
}

fn opt_f(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.2}"))
}

pub fn write_records<W: Write>(out: W, records: &[ScoreRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_io)?;
    for r in records {
        let c = |c: Option<Circle>| [c.map(|c| c.cx), c.map(|c| c.cy), c.map(|c| c.r)].map(opt_f);
        let [lx, ly, lr] = c(r.left);
        let [rx, ry, rr] = c(r.right);
        let area = |a: Option<u64>| a.map_or(String::new(), |a| a.to_string());
        w.write_record([
            r.image.clone(),
            r.label.to_string(),
            r.status.to_string(),
            format!("{:.6}", r.iou),
            lx,
            ly,
            lr,
            rx,
            ry,
            rr,
            area(r.left_area),
            area(r.right_area),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_records(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_records(std::io::BufWriter::new(file), records)
}

pub fn parse_records(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut rdr, &RECORD_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        let row = i + 1;
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let bad =
            |what: &str, v: &str| Error::ManifestParse(format!("row {row}: bad {what} `{v}`"));
        let num = |k: usize| -> Result<Option<f64>> {
            match field(k) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(RECORD_HEADER[k], v)),
            }
        };
        let int = |k: usize| -> Result<Option<u64>> {
            match field(k) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(RECORD_HEADER[k], v)),
            }
        };
        let circle = |k: usize| -> Result<Option<Circle>> {
            Ok(match (num(k)?, num(k + 1)?, num(k + 2)?) {
                (Some(cx), Some(cy), Some(r)) => Some(Circle { cx, cy, r }),
                _ => None,
            })
        };
        let iou: f64 = field(3).parse().map_err(|_| bad("iou", field(3)))?;
        if !(0.0..=1.0).contains(&iou) {
            return Err(bad("iou", field(3)));
        }
        out.push(ScoreRecord {
            image: field(0).to_string(),
            label: Label::parse(field(1)).ok_or_else(|| bad("label", field(1)))?,
            iou,
            status: Status::parse(field(2)).ok_or_else(|| bad("status", field(2)))?,
            left: circle(4)?,
            right: circle(7)?,
            left_area: int(10)?,
            right_area: int(11)?,
        });
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    parse_records(&std::fs::read_to_string(path)?)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn class_scores(records: &[ScoreRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut real = Vec::new();
    let mut fake = Vec::new();
    for r in records.iter().filter(|r| r.is_scored()) {
        match r.label {
            Label::Real => real.push(r.iou),
            Label::Fake => fake.push(r.iou),
            Label::Unknown => {}
        }
    }
    if real.is_empty() || fake.is_empty() {
        return Err(Error::SingleClassOnly);
    }
    real.sort_by(f64::total_cmp);
    fake.sort_by(f64::total_cmp);
    Ok((real, fake))
}

/// ROC swept over every distinct IoU plus the two infinite sentinels.
pub fn roc_curve(records: &[ScoreRecord]) -> Result<Vec<RocPoint>> {
    let (real, fake) = class_scores(records)?;
    let mut values: Vec<f64> = real.iter().chain(&fake).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut ir, mut jf) = (0, 0);
    for &v in &values {
        while ir < real.len() && real[ir] <= v {
            ir += 1;
        }
        while jf < fake.len() && fake[jf] <= v {
            jf += 1;
        }
        points.push(RocPoint {
            threshold: v,
            fpr: ir as f64 / nr,
            tpr: jf as f64 / nf,
        });
    }
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(points)
}

/// Trapezoidal area under a curve running from fpr 0 to fpr 1.
pub fn auc(points: &[RocPoint]) -> Result<f64> {
    let malformed = |m: &str| Err(Error::MalformedCurve(m.into()));
    if points.len() < 2 {
        return malformed("fewer than two points");
    }
    if points
        .iter()
        .any(|p| !(0.0..=1.0).contains(&p.fpr) || !(0.0..=1.0).contains(&p.tpr))
    {
        return malformed("rates outside [0, 1]");
    }
    if points[0].fpr != 0.0 || points[points.len() - 1].fpr != 1.0 {
        return malformed("curve does not span fpr 0 to 1");
    }
    let mut area = 0.0;
    for w in points.windows(2) {
        if w[1].fpr < w[0].fpr || w[1].tpr < w[0].tpr {
            return malformed("rates decrease along the curve");
        }
        area += (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0;
    }
    Ok(area)
}

/// Probability that a fake scores below a real, ties counted half.
pub fn mann_whitney(records: &[ScoreRecord]) -> Result<f64> {
    let (real, fake) = class_scores(records)?;
    let mut wins = 0.0;
    for &f in &fake {
        let below = real.partition_point(|&r| r < f);
        let upto = real.partition_point(|&r| r <= f);
        wins += (real.len() - upto) as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(wins / (real.len() as f64 * fake.len() as f64))
}

/// Records with real and fake labels exchanged.
pub fn swap_labels(records: &[ScoreRecord]) -> Vec<ScoreRecord> {
    records
        .iter()
        .map(|r| ScoreRecord {
            label: r.label.swapped(),
            ..r.clone()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub real: usize,
    pub fake: usize,
}

/// Equal-width bins over [0, 1]; the top bin is closed on the right.
pub fn score_histogram(records: &[ScoreRecord], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins < 2 {
        return Err(Error::InvalidParams(format!(
            "histogram needs >= 2 bins, got {bins}"
        )));
    }
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: i as f64 / bins as f64,
            hi: (i + 1) as f64 / bins as f64,
            real: 0,
            fake: 0,
        })
        .collect();
    for r in records.iter().filter(|r| r.is_scored()) {
        let k = ((r.iou * bins as f64).floor() as usize).min(bins - 1);
        match r.label {
            Label::Real => out[k].real += 1,
            Label::Fake => out[k].fake += 1,
            Label::Unknown => {}
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl OperatingPoint {
    pub fn youden(&self) -> f64 {
        self.tpr - self.fpr
    }
}

/// Threshold maximizing Youden's J, ties going to the lower fpr.
///
/// The returned threshold sits halfway between the winning IoU value and
/// the next larger one, so it separates the same records with margin.
pub fn pick_threshold(records: &[ScoreRecord]) -> Result<OperatingPoint> {
    let pts = roc_curve(records)?;
    let mut best = 0;
    for (i, p) in pts.iter().enumerate().skip(1) {
        let (j, bj) = (p.tpr - p.fpr, pts[best].tpr - pts[best].fpr);
        if j > bj || (j == bj && p.fpr < pts[best].fpr) {
            best = i;
        }
    }
    let p = pts[best];
    let next = pts.get(best + 1).map_or(f64::INFINITY, |q| q.threshold);
    let threshold = if p.threshold.is_finite() && next.is_finite() {
        (p.threshold + next) / 2.0
    } else {
        p.threshold
    };
    Ok(OperatingPoint {
        threshold,
        fpr: p.fpr,
        tpr: p.tpr,
    })
}

fn fmt_threshold(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.6}")
    } else {
        format!("{t}")
    }
}

pub fn write_roc<W: Write>(mut out: W, points: &[RocPoint], auc: f64) -> Result<()> {
    writeln!(out, "threshold,fpr,tpr")?;
    for p in points {
        writeln!(
            out,
            "{},{:.6},{:.6}",
            fmt_threshold(p.threshold),
            p.fpr,
            p.tpr
        )?;
    }
    writeln!(out, "# auc={auc:.6}")?;
    Ok(())
}

pub fn write_histogram<W: Write>(mut out: W, bins: &[HistogramBin]) -> Result<()> {
    writeln!(out, "bin_lo,bin_hi,count_real,count_fake")?;
    for b in bins {
        writeln!(out, "{:.6},{:.6},{},{}", b.lo, b.hi, b.real, b.fake)?;
    }
    Ok(())
}
