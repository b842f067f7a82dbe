//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use corneal::annotation::read_annotation;
use corneal::edges::{canny_with_gradients, CannyParams};
use corneal::evaluation::{
    auc, batch_evaluate, mann_whitney, read_manifest, roc_curve, Label, ScoreRecord,
};
use corneal::hough::{detect_limbus, Circle};
use corneal::imaging::{crop, load_image, to_grayscale, BinaryMask, Point, Rect};
use corneal::pipeline::{
    align_and_score, analyze_face, eye_crop_box, EyeAnalysis, PairStatus, PipelineParams, Status,
};
use corneal::synthgen::{
    make_corpus, random_blobs, render_eye_pair, Blob, BlobShape, CorpusConfig, EyeSceneConfig,
};
use corneal::threshold::{yen_threshold, Histogram256, ThresholdResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const YEN_CASES: usize = 1000;
const YEN_BUDGET: Duration = Duration::from_secs(1);

const HOUGH_EYES: usize = 100;
const HOUGH_MIN_HITS: usize = 95;
const HOUGH_CENTER_TOL: f64 = 2.0;
const HOUGH_RADIUS_TOL: f64 = 2.0;
const HOUGH_BUDGET: Duration = Duration::from_secs(10);

const IOU_PAIRS: usize = 200;

const AUC_SETS: usize = 50;
const AUC_TOL: f64 = 1e-9;

const E2E_PER_CLASS: usize = 500;
const E2E_MIN_AUC: f64 = 0.95;
const E2E_MIN_REAL_MEDIAN: f64 = 0.7;
const E2E_MAX_FAKE_MEDIAN: f64 = 0.45;
const E2E_BUDGET: Duration = Duration::from_secs(120);

const REAL_MIN_OK: usize = 4;

const DETERMINISM_PER_CLASS: usize = 30;

const FACE_BUDGET: Duration = Duration::from_secs(1);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Textbook Yen over normalized probabilities, recomputed from scratch for every t.
fn yen_oracle(counts: &[u64; 256]) -> u8 {
    let n: u64 = counts.iter().sum();
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut best_t = 0u8;
    let mut best = f64::NEG_INFINITY;
    for t in 0..255 {
        let p1: f64 = p[..=t].iter().sum();
        let g1: f64 = p[..=t].iter().map(|v| v * v).sum();
        let g2: f64 = p[t + 1..].iter().map(|v| v * v).sum();
        if g1 == 0.0 || g2 == 0.0 {
            continue;
        }
        let crit = -(g1 * g2).ln() + 2.0 * (p1 * (1.0 - p1)).ln();
        if crit.is_finite() && crit > best {
            best = crit;
            best_t = t as u8;
        }
    }
    best_t
}

fn yen_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hists: Vec<Histogram256> = (0..YEN_CASES)
        .map(|_| {
            let mut counts = [0u64; 256];
            let occupied = rng.random_range(2..=256usize);
            let max_count = [10u64, 1000, 100_000][rng.random_range(0..3)];
            for _ in 0..occupied {
                counts[rng.random_range(0..256)] += rng.random_range(1..=max_count);
            }
            if counts.iter().filter(|&&c| c > 0).count() < 2 {
                counts[0] += 1;
                counts[255] += 1;
            }
            Histogram256::from_counts(counts)
        })
        .collect();
    let start = Instant::now();
    let got: Vec<ThresholdResult> = hists.iter().map(|h| yen_threshold(h).unwrap()).collect();
    let elapsed = start.elapsed();
    let mismatches = hists
        .iter()
        .zip(&got)
        .filter(|(h, r)| yen_oracle(&h.counts) != r.t)
        .count();
    outcome(
        mismatches == 0 && elapsed < YEN_BUDGET,
        format!("{mismatches}/{YEN_CASES} mismatches, {elapsed:.2?}"),
    )
}

fn hough_scene(rng: &mut ChaCha8Rng) -> EyeSceneConfig {
    let radius = rng.random_range(15.0..=60.0);
    let mut cfg = EyeSceneConfig::centered_pair(radius);
    let (fx, fy) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    for e in &mut cfg.eyes {
        e.center = Point::new(e.center.x + fx, e.center.y + fy);
    }
    cfg.occlusion = rng.random_range(0.0..=0.3);
    cfg.noise_sigma = rng.random_range(0.0..=8.0);
    cfg.lower_gap = rng.random_range(0.05..0.2);
    cfg.pupil_frac = rng.random_range(0.3..0.45);
    let n = rng.random_range(0..=3);
    cfg.blobs = random_blobs(rng, radius, n);
    cfg.seed = rng.random();
    cfg
}

fn hough_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = PipelineParams::default();
    let mut hits = 0;
    let mut spent = Duration::ZERO;
    for _ in 0..HOUGH_EYES {
        let cfg = hough_scene(&mut rng);
        let (img, ann, truth) = render_eye_pair(&cfg).unwrap();
        let gray = to_grayscale(&img);
        let lm = &ann.image_left_eye;
        let start = Instant::now();
        let rect = eye_crop_box(lm, params.crop_margin, (gray.width(), gray.height())).unwrap();
        let patch = crop(&gray, rect).unwrap();
        let local = lm.translated(-(rect.x as f64), -(rect.y as f64));
        let (edges, grads) = canny_with_gradients(&patch, &CannyParams::default()).unwrap();
        let found = detect_limbus(&edges, local.bounding_rect(), &grads);
        spent += start.elapsed();
        if let Ok(c) = found {
            let t = truth.limbus[0];
            let dc = (c.cx + rect.x as f64 - t.cx).hypot(c.cy + rect.y as f64 - t.cy);
            if dc <= HOUGH_CENTER_TOL && (c.r - t.r).abs() <= HOUGH_RADIUS_TOL {
                hits += 1;
            }
        }
    }
    outcome(
        hits >= HOUGH_MIN_HITS && spent < HOUGH_BUDGET,
        format!("{hits}/{HOUGH_EYES} within tolerance, detection {spent:.2?}"),
    )
}

fn eye_with(highlight: BinaryMask) -> EyeAnalysis {
    let (w, h) = (highlight.width(), highlight.height());
    EyeAnalysis {
        crop: Rect { x: 0, y: 0, w, h },
        eye_mask: BinaryMask::from_fn(w, h, |_, _| true),
        limbus: Circle {
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            r: w as f64 / 3.0,
        },
        corneal_mask: BinaryMask::from_fn(w, h, |_, _| true),
        highlight,
        threshold: ThresholdResult {
            t: 0,
            criterion: 0.0,
        },
    }
}

fn naive_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.get(x, y), b.get(x, y));
            inter += (p && q) as usize;
            union += (p || q) as usize;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn iou_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = PipelineParams {
        align_search: 0,
        ..PipelineParams::default()
    };
    let mut mismatches = 0;
    for _ in 0..IOU_PAIRS {
        let (w, h) = (rng.random_range(4..40u32), rng.random_range(4..40u32));
        let density = rng.random_range(0.05..0.6);
        let a = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density));
        let b = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density));
        let s = align_and_score(&eye_with(a.clone()), &eye_with(b.clone()), &p);
        if s.iou != naive_iou(&a, &b) {
            mismatches += 1;
        }
    }
    let blob = BinaryMask::disc(30, 30, 15.0, 15.0, 6.0);
    let identity = align_and_score(&eye_with(blob.clone()), &eye_with(blob), &p).iou;
    let left = BinaryMask::from_fn(30, 30, |x, _| x < 10);
    let right = BinaryMask::from_fn(30, 30, |x, _| x >= 20);
    let disjoint = align_and_score(&eye_with(left), &eye_with(right), &p).iou;
    outcome(
        mismatches == 0 && identity == 1.0 && disjoint == 0.0,
        format!("{mismatches}/{IOU_PAIRS} mismatches, identity {identity}, disjoint {disjoint}"),
    )
}

fn record(label: Label, iou: f64) -> ScoreRecord {
    ScoreRecord {
        image: String::new(),
        label,
        iou,
        status: Status::Pair(PairStatus::Ok),
        left: None,
        right: None,
        left_area: None,
        right_area: None,
    }
}

// Fake is the positive class and scores lower; ties count half.
fn pairwise_auc(recs: &[ScoreRecord]) -> f64 {
    let fakes: Vec<f64> = recs
        .iter()
        .filter(|r| r.label == Label::Fake)
        .map(|r| r.iou)
        .collect();
    let reals: Vec<f64> = recs
        .iter()
        .filter(|r| r.label == Label::Real)
        .map(|r| r.iou)
        .collect();
    let mut s = 0.0;
    for f in &fakes {
        for r in &reals {
            s += if f < r {
                1.0
            } else if f == r {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (fakes.len() * reals.len()) as f64
}

fn auc_dual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..AUC_SETS {
        let n = rng.random_range(2..120);
        let mut recs: Vec<ScoreRecord> = (0..n)
            .map(|_| {
                let label = if rng.random_bool(0.5) {
                    Label::Real
                } else {
                    Label::Fake
                };
                // coarse grid so ties occur
                let v = (rng.random_range(0.0..1.0f64) * 40.0).round() / 40.0;
                record(label, v)
            })
            .collect();
        recs.push(record(Label::Real, 0.5));
        recs.push(record(Label::Fake, 0.5));
        let trap = auc(&roc_curve(&recs).unwrap()).unwrap();
        let mw = mann_whitney(&recs).unwrap();
        let oracle = pairwise_auc(&recs);
        worst = worst.max((trap - mw).abs()).max((trap - oracle).abs());
    }
    let perfect: Vec<ScoreRecord> = [0.1, 0.2, 0.3]
        .iter()
        .map(|&v| record(Label::Fake, v))
        .chain([0.7, 0.9].iter().map(|&v| record(Label::Real, v)))
        .collect();
    let perfect_auc = auc(&roc_curve(&perfect).unwrap()).unwrap();
    let hand = [
        record(Label::Fake, 0.2),
        record(Label::Fake, 0.4),
        record(Label::Real, 0.3),
        record(Label::Real, 0.9),
    ];
    let hand_auc = auc(&roc_curve(&hand).unwrap()).unwrap();
    outcome(
        worst <= AUC_TOL && perfect_auc == 1.0 && hand_auc == 0.75,
        format!("max gap {worst:.1e}, perfect {perfect_auc}, hand {hand_auc}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let paths = make_corpus(E2E_PER_CLASS, &CorpusConfig::default(), 5, dir.path()).unwrap();
    let rows = read_manifest(&paths.manifest).unwrap();
    let recs = batch_evaluate(&rows, &PipelineParams::default(), 0).unwrap();
    let area = auc(&roc_curve(&recs).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let scored = |l: Label| -> Vec<f64> {
        recs.iter()
            .filter(|r| r.is_scored() && r.label == l)
            .map(|r| r.iou)
            .collect()
    };
    let (real_med, fake_med) = (median(scored(Label::Real)), median(scored(Label::Fake)));
    outcome(
        area >= E2E_MIN_AUC
            && real_med >= E2E_MIN_REAL_MEDIAN
            && fake_med <= E2E_MAX_FAKE_MEDIAN
            && elapsed < E2E_BUDGET,
        format!(
            "auc {area:.4}, median real {real_med:.3}, median fake {fake_med:.3}, {elapsed:.1?}"
        ),
    )
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/real")
}

fn real_smoke() -> Outcome {
    let dir = fixture_dir();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".json").map(str::to_owned))
        .collect();
    names.sort();
    let mut ok = 0;
    let mut in_range = true;
    let mut statuses = Vec::new();
    for name in &names {
        let run = std::panic::catch_unwind(|| {
            let ann = read_annotation(dir.join(format!("{name}.json")), 0).unwrap();
            let img = load_image(dir.join(format!("{name}.jpg"))).unwrap();
            assert_eq!((img.width(), img.height()), (1024, 1024));
            let r = analyze_face(&img, &ann, &PipelineParams::default());
            (r.status(), r.iou())
        });
        match run {
            Ok((status, iou)) => {
                ok += status.is_ok() as usize;
                in_range &= (0.0..=1.0).contains(&iou);
                statuses.push(format!("{name}={}", status.code()));
            }
            Err(_) => {
                in_range = false;
                statuses.push(format!("{name}=panic"));
            }
        }
    }
    outcome(
        names.len() >= 5 && ok >= REAL_MIN_OK && in_range,
        format!("{ok}/{} ok [{}]", names.len(), statuses.join(" ")),
    )
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_corneal"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

// synth, batch and roc into `dir`; returns every CSV produced, by name.
fn cli_round(dir: &Path, jobs: &str) -> Vec<(String, Vec<u8>)> {
    let s = |p: &str| dir.join(p).to_str().unwrap().to_owned();
    let n = DETERMINISM_PER_CLASS.to_string();
    run_cli(&[
        "synth",
        "-n",
        &n,
        "--seed",
        "17",
        "--out",
        &s("corpus"),
        "--jobs",
        jobs,
    ]);
    run_cli(&[
        "batch",
        &s("corpus/manifest.csv"),
        "--out",
        &s("records.csv"),
        "--jobs",
        jobs,
    ]);
    run_cli(&[
        "roc",
        &s("records.csv"),
        "--out",
        &s("roc.csv"),
        "--hist",
        &s("hist.csv"),
    ]);
    [
        "corpus/manifest.csv",
        "corpus/ground_truth.csv",
        "records.csv",
        "roc.csv",
        "hist.csv",
    ]
    .iter()
    .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
    .collect()
}

fn determinism() -> Outcome {
    let runs: Vec<_> = ["1", "1", "8"]
        .iter()
        .map(|jobs| {
            let d = tempfile::tempdir().unwrap();
            cli_round(d.path(), jobs)
        })
        .collect();
    let differing: Vec<String> = runs[0]
        .iter()
        .zip(&runs[1])
        .zip(&runs[2])
        .filter(|((a, b), c)| a.1 != b.1 || a.1 != c.1)
        .map(|((a, _), _)| a.0.clone())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "5 CSVs identical across two runs and --jobs 1/8".into()
        } else {
            format!("differ: {}", differing.join(", "))
        },
    )
}

fn performance() -> Outcome {
    let radius = 48.0;
    let mut cfg = EyeSceneConfig::centered_pair(radius);
    cfg.width = 1024;
    cfg.height = 1024;
    cfg.eyes[0].center = Point::new(352.3, 480.6);
    cfg.eyes[1].center = Point::new(672.3, 480.6);
    cfg.noise_sigma = 4.0;
    cfg.blobs = vec![Blob {
        shape: BlobShape::Disc,
        offset: (10.0, -12.0),
        size: 6.0,
        angle: 0.0,
        intensity: 250,
    }];
    let (img, ann, _) = render_eye_pair(&cfg).unwrap();
    let p = PipelineParams::default();
    let start = Instant::now();
    let report = analyze_face(&img, &ann, &p);
    let elapsed = start.elapsed();
    outcome(
        elapsed < FACE_BUDGET && report.status().is_ok(),
        format!("{elapsed:.2?} status {}", report.status().code()),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("1 yen oracle equivalence", yen_equivalence),
        ("2 hough accuracy", hough_accuracy),
        ("3 iou correctness", iou_correctness),
        ("4 auc dual computation", auc_dual),
        ("5 end-to-end separation", end_to_end),
        ("6 real-image smoke test", real_smoke),
        ("7 determinism", determinism),
        ("8 single-face performance", performance),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let o = check();
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
