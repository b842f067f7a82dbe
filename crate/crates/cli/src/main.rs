use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corneal::annotation::read_annotation;
use corneal::edges::CannyParams;
use corneal::evaluation::{
    auc, batch_evaluate, mann_whitney, pick_threshold, read_manifest, read_records, roc_curve,
    save_records, score_histogram, write_histogram, write_roc, BatchSummary,
};
use corneal::figures::{histogram_svg, roc_svg};
use corneal::imaging::load_image;
use corneal::overlay::render_overlay;
use corneal::pipeline::{analyze_face, Failure, PipelineParams, Status};
use corneal::synthgen::{make_corpus, CorpusConfig};
use corneal::Error;

/// Exit codes.
const EXIT_OTHER: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NO_CIRCLE: u8 = 3;
const EXIT_BAD_ANNOTATION: u8 = 4;
const EXIT_SINGLE_CLASS: u8 = 5;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "corneal",
    version,
    about = "Score the consistency of corneal specular highlights between the two eyes of a face",
    after_help = "Exit codes: 0 ok, 1 other failure, 2 I/O, 3 no limbus circle, \
                  4 bad annotation, 5 only one class in ROC input, 64 bad usage."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one face and print `iou=<v> status=<s>`.
    Analyze {
        image: PathBuf,
        /// Landmark sidecar JSON.
        landmarks: PathBuf,
        /// Face entry of the sidecar to analyze.
        #[arg(long, default_value_t = 0)]
        face: usize,
        /// Write an annotated copy of the image here.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score every row of a manifest CSV (`image,landmarks,label`).
    Batch {
        manifest: PathBuf,
        /// Records CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// ROC curve and AUC from one or more records CSVs.
    Roc {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// ROC CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-class IoU histogram CSV here.
        #[arg(long)]
        hist: Option<PathBuf>,
        /// Histogram bin count.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Write an SVG plot of the ROC curve.
        #[arg(long)]
        roc_svg: Option<PathBuf>,
        /// Write an SVG plot of the histogram.
        #[arg(long)]
        hist_svg: Option<PathBuf>,
    },
    /// Generate a synthetic corpus of consistent and inconsistent eye pairs.
    Synth {
        /// Images per class.
        #[arg(long, short)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        scene: SceneArgs,
        /// Worker threads (0 uses every core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// Gaussian sigma of the edge detector.
    #[arg(long, default_value_t = 1.4)]
    sigma: f64,
    /// Low hysteresis threshold, relative to the strongest gradient.
    #[arg(long, default_value_t = 0.1)]
    canny_low: f64,
    /// High hysteresis threshold, relative to the strongest gradient.
    #[arg(long, default_value_t = 0.25)]
    canny_high: f64,
    /// Fraction of the landmark box added around each eye crop.
    #[arg(long, default_value_t = 0.4)]
    crop_margin: f64,
    /// Half-width in pixels of the alignment search.
    #[arg(long, default_value_t = 3)]
    align_search: u32,
    /// Scale the right highlight by the ratio of limbus radii before aligning.
    #[arg(long)]
    rescale_right: bool,
    /// Worker threads (0 uses every core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl PipelineArgs {
    fn params(&self) -> Result<PipelineParams, CliError> {
        let p = PipelineParams {
            canny: CannyParams {
                sigma: self.sigma,
                low: self.canny_low,
                high: self.canny_high,
            },
            crop_margin: self.crop_margin,
            align_search: self.align_search,
            rescale_right: self.rescale_right,
            ..PipelineParams::default()
        };
        p.validate()
            .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
        Ok(p)
    }
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 512)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    /// Smallest limbus radius in pixels.
    #[arg(long, default_value_t = 18.0)]
    radius_min: f64,
    /// Largest limbus radius in pixels.
    #[arg(long, default_value_t = 26.0)]
    radius_max: f64,
    /// Largest noise sigma.
    #[arg(long, default_value_t = 6.0)]
    noise_max: f64,
    /// Largest upper-lid occlusion fraction.
    #[arg(long, default_value_t = 0.25)]
    occlusion_max: f64,
}

impl SceneArgs {
    fn config(&self) -> Result<CorpusConfig, CliError> {
        let ok = self.radius_min > 0.0
            && self.radius_min <= self.radius_max
            && self.noise_max >= 0.0
            && (0.0..=0.5).contains(&self.occlusion_max);
        if !ok {
            return Err(CliError::new(
                EXIT_USAGE,
                "need 0 < radius-min <= radius-max, noise-max >= 0, occlusion-max in [0, 0.5]",
            ));
        }
        Ok(CorpusConfig {
            width: self.width,
            height: self.height,
            radius: (self.radius_min, self.radius_max),
            noise_sigma: (0.0, self.noise_max),
            occlusion: (0.0, self.occlusion_max),
            ..CorpusConfig::default()
        })
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FileNotFound(_)
        | Error::Io(_)
        | Error::UnsupportedFormat(_)
        | Error::CorruptImage(_)
        | Error::ManifestParse(_) => EXIT_IO,
        Error::NoCircleFound => EXIT_NO_CIRCLE,
        Error::BadAnnotation(_) | Error::DegenerateLandmarks | Error::DegeneratePolygon => {
            EXIT_BAD_ANNOTATION
        }
        Error::SingleClassOnly => EXIT_SINGLE_CLASS,
        Error::InvalidParams(_) | Error::InvalidSigma(_) | Error::ConfigOutOfBounds(_) => {
            EXIT_USAGE
        }
        _ => EXIT_OTHER,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(exit_code(&e), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_IO, e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn failure_code(f: &Failure) -> u8 {
    match f {
        Failure::NoCircle => EXIT_NO_CIRCLE,
        Failure::BadAnnotation(_) => EXIT_BAD_ANNOTATION,
        Failure::Io(_) | Failure::Image(_) => EXIT_IO,
        Failure::EmptyCornea | Failure::Other(_) => EXIT_OTHER,
    }
}

fn analyze(
    image: &Path,
    landmarks: &Path,
    face: usize,
    overlay: Option<&Path>,
    args: &PipelineArgs,
) -> Result<(), CliError> {
    let p = args.params()?;
    let ann = read_annotation(landmarks, face)?;
    let img = load_image(image)?;
    let report = analyze_face(&img, &ann, &p);
    let status = report.status();
    let mut line = format!("iou={:.6} status={status}", report.iou());
    if let Some(s) = report.score {
        line += &format!(" dx={} dy={}", s.translation.0, s.translation.1);
    }
    for (side, eye) in [("left", &report.left), ("right", &report.right)] {
        if let Ok(e) = eye {
            line += &format!(
                " {side}_cx={:.1} {side}_cy={:.1} {side}_r={:.1} {side}_area={}",
                e.limbus.cx + e.crop.x as f64,
                e.limbus.cy + e.crop.y as f64,
                e.limbus.r,
                e.highlight.count()
            );
        }
    }
    println!("{line}");
    if let Some(path) = overlay {
        render_overlay(&img, &report).save_png(path)?;
    }
    match status {
        Status::Failed(f) => Err(CliError::new(failure_code(&f), f.to_string())),
        Status::Pair(_) => Ok(()),
    }
}

fn batch(manifest: &Path, out: &Path, args: &PipelineArgs) -> Result<(), CliError> {
    let p = args.params()?;
    let rows = read_manifest(manifest)?;
    // fail on an unwritable destination before doing the work
    drop(create(out)?);
    let records = batch_evaluate(&rows, &p, args.jobs)?;
    save_records(out, &records)?;
    println!("{} out={}", BatchSummary::of(&records), out.display());
    Ok(())
}

fn roc(
    inputs: &[PathBuf],
    out: &Path,
    hist: Option<&Path>,
    bins: usize,
    roc_plot: Option<&Path>,
    hist_plot: Option<&Path>,
) -> Result<(), CliError> {
    if bins < 2 {
        return Err(CliError::new(EXIT_USAGE, "--bins must be at least 2"));
    }
    let mut records = Vec::new();
    for path in inputs {
        records.extend(read_records(path)?);
    }
    let points = roc_curve(&records)?;
    let area = auc(&points)?;
    let mw = mann_whitney(&records)?;
    let op = pick_threshold(&records)?;
    let mut w = create(out)?;
    write_roc(&mut w, &points, area)?;
    w.flush()?;
    let histogram = score_histogram(&records, bins)?;
    if let Some(path) = hist {
        let mut w = create(path)?;
        write_histogram(&mut w, &histogram)?;
        w.flush()?;
    }
    if let Some(path) = roc_plot {
        std::fs::write(path, roc_svg(&points, area))?;
    }
    if let Some(path) = hist_plot {
        std::fs::write(path, histogram_svg(&histogram))?;
    }
    let summary = BatchSummary::of(&records);
    println!(
        "auc={area:.6} mann_whitney={mw:.6} threshold={:.6} tpr={:.6} fpr={:.6} included={} excluded={}",
        op.threshold,
        op.tpr,
        op.fpr,
        summary.ok[0] + summary.ok[1],
        summary.excluded()
    );
    Ok(())
}

fn synth(n: usize, seed: u64, out: &Path, scene: &SceneArgs, jobs: usize) -> Result<(), CliError> {
    let cfg = scene.config()?;
    if n == 0 {
        return Err(CliError::new(EXIT_USAGE, "-n must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::new(EXIT_OTHER, e.to_string()))?;
    let paths = pool.install(|| make_corpus(n, &cfg, seed, out))?;
    println!(
        "manifest={} ground_truth={} images={}",
        paths.manifest.display(),
        paths.ground_truth.display(),
        2 * n
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze {
            image,
            landmarks,
            face,
            overlay,
            pipeline,
        } => analyze(image, landmarks, *face, overlay.as_deref(), pipeline),
        Command::Batch {
            manifest,
            out,
            pipeline,
        } => batch(manifest, out, pipeline),
        Command::Roc {
            records,
            out,
            hist,
            bins,
            roc_svg,
            hist_svg,
        } => roc(
            records,
            out,
            hist.as_deref(),
            *bins,
            roc_svg.as_deref(),
            hist_svg.as_deref(),
        ),
        Command::Synth {
            n,
            seed,
            out,
            scene,
            jobs,
        } => synth(*n, *seed, out, scene, *jobs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
