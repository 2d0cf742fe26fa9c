//! `fabscan`: generate synthetic fabric, train the two-stage detector, run
//! detection, score it, and compare index maps with word histograms.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fabscan_core::cascade::{detect_image, train, DetectionReport, ModelBundle};
use fabscan_core::coding::LcreMode;
use fabscan_core::eval::{bench_table_csv, boi_vs_bof_bench, roc, score_reports, stage_scores, Level, StageScores};
use fabscan_core::imaging::{load_image, GrayImage, Rect};
use fabscan_core::synthgen::{generate_corpus, generate_training_set, CorpusSpec, DefectSpec, FabricSpec, GroundTruth};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "fabscan", version, about = "Two-stage defect detection for patterned fabric")]
struct Cli {
    /// TOML file overriding any default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for corpus generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = ["weighted-distance", "kernel-similarity"])]
    lcre_mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a seeded corpus plus training images and write a manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both stages on the manifest's training images.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run detection on images (or every manifest sample) and write reports.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write a PGM with flagged sub-regions and primitives outlined.
        #[arg(long)]
        overlay: bool,
        images: Vec<PathBuf>,
    },
    /// Score reports against the manifest's ground truth.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Index-map versus histogram classification table.
    BenchBoi {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

impl From<fabscan_core::Error> for Failure {
    fn from(e: fabscan_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

const MANIFEST_FORMAT: &str = "fabscan-manifest";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    fabric: FabricSpec,
    corpus: CorpusSpec,
    /// Paths relative to the manifest.
    training: Vec<String>,
    samples: Vec<ManifestSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSample {
    id: String,
    image: String,
    defects: Vec<DefectSpec>,
    truth: GroundTruth,
}

impl Manifest {
    fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = read(path)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Data(format!("invalid manifest {}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Failure::Data(format!("{}: unsupported manifest {} v{}", path.display(), m.format, m.version)));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, base))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Data(format!("cannot create {}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn resolve_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(Failure::Usage)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.pipeline.seed = seed;
        cfg.corpus.seed = seed;
    }
    if let Some(mode) = &cli.lcre_mode {
        cfg.pipeline.lcre_mode = mode.parse::<LcreMode>().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn generate(cfg: &Config, out: &Path) -> CliResult<()> {
    for dir in ["images", "train"] {
        create_dir(&out.join(dir))?;
    }
    let corpus = generate_corpus(&cfg.fabric, &cfg.corpus)?;
    let training = generate_training_set(&cfg.fabric, cfg.train_count, cfg.corpus.seed)?;
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        fabric: cfg.fabric.clone(),
        corpus: cfg.corpus.clone(),
        training: Vec::new(),
        samples: Vec::new(),
    };
    for (i, img) in training.iter().enumerate() {
        let rel = format!("train/train_{i:03}.pgm");
        img.save_pgm(&out.join(&rel))?;
        manifest.training.push(rel);
    }
    for s in corpus {
        let rel = format!("images/{}.pgm", s.id);
        s.image.save_pgm(&out.join(&rel))?;
        manifest.samples.push(ManifestSample { id: s.id, image: rel, defects: s.defects, truth: s.truth });
    }
    write(&out.join("manifest.json"), &json(&manifest))?;
    eprintln!("wrote {} samples and {} training images to {}", manifest.samples.len(), manifest.training.len(), out.display());
    Ok(())
}

fn train_cmd(cfg: &Config, manifest: &Path, out: &Path) -> CliResult<()> {
    let (m, base) = Manifest::load(manifest)?;
    if m.training.is_empty() {
        return Err(Failure::Data(format!("{} lists no training images", manifest.display())));
    }
    let images = m.training.par_iter().map(|rel| load_image(&base.join(rel))).collect::<fabscan_core::Result<Vec<_>>>()?;
    let bundle = train(&images, &cfg.pipeline)?;
    let mut text = bundle.to_text();
    text.push('\n');
    write(out, &text)?;
    eprintln!("trained on {} images, {} stage-1 keys", images.len(), bundle.ahog.entries.len());
    Ok(())
}

fn load_bundle(path: &Path) -> CliResult<ModelBundle> {
    Ok(ModelBundle::from_text(&read(path)?)?)
}

/// Outlines flagged sub-regions dark and defective primitives bright.
fn overlay(img: &GrayImage, report: &DetectionReport) -> GrayImage {
    let mut out = img.clone();
    let mut outline = |r: &Rect, v: f64| {
        for x in r.x..r.right() {
            for y in [r.y, r.bottom() - 1] {
                if x >= 0 && y >= 0 && (x as usize) < out.width() && (y as usize) < out.height() {
                    out.set(x as usize, y as usize, v);
                }
            }
        }
        for y in r.y..r.bottom() {
            for x in [r.x, r.right() - 1] {
                if x >= 0 && y >= 0 && (x as usize) < out.width() && (y as usize) < out.height() {
                    out.set(x as usize, y as usize, v);
                }
            }
        }
    };
    for s in report.subregions.iter().filter(|s| s.defective) {
        outline(&s.bounds, 0.0);
    }
    for p in report.defective_primitives() {
        outline(&p.bounds, 1.0);
    }
    out
}

fn detect_cmd(model: &Path, out: &Path, manifest: Option<&Path>, images: &[PathBuf], draw: bool) -> CliResult<()> {
    let bundle = load_bundle(model)?;
    let mut inputs: Vec<(String, PathBuf)> = Vec::new();
    if let Some(path) = manifest {
        let (m, base) = Manifest::load(path)?;
        inputs.extend(m.samples.into_iter().map(|s| (s.id, base.join(s.image))));
    }
    for path in images {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
        inputs.push((name, path.clone()));
    }
    if inputs.is_empty() {
        return Err(Failure::Usage("detect needs --manifest or at least one image".into()));
    }
    create_dir(out)?;
    let results: Vec<CliResult<DetectionReport>> = inputs
        .par_iter()
        .map(|(name, path)| {
            let img = load_image(path)?;
            let report = detect_image(name, &img, &bundle)?;
            write(&out.join(format!("{name}.json")), &format!("{}\n", report.to_json()))?;
            write(&out.join(format!("{name}.csv")), &report.to_csv())?;
            if draw {
                overlay(&img, &report).save_pgm(&out.join(format!("{name}.overlay.pgm")))?;
            }
            Ok(report)
        })
        .collect();

    let mut summary = String::from("image,defective,subregions_flagged,primitives_flagged\n");
    let mut timings = String::from("image,segment_us,ahog_us,sift_us,total_us\n");
    let mut failures = Vec::new();
    for ((name, _), r) in inputs.iter().zip(results) {
        match r {
            Ok(r) => {
                summary.push_str(&format!(
                    "{name},{},{},{}\n",
                    r.defective,
                    r.subregions.iter().filter(|s| s.defective).count(),
                    r.defective_primitives().count()
                ));
                let t = r.timings;
                timings.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    t.segment.as_micros(),
                    t.ahog.as_micros(),
                    t.sift.as_micros(),
                    t.total.as_micros()
                ));
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    write(&out.join("summary.csv"), &summary)?;
    // wall-clock figures live apart from the reproducible outputs
    write(&out.join("timings.csv"), &timings)?;
    if !failures.is_empty() {
        return Err(Failure::Data(failures.join("\n")));
    }
    eprintln!("wrote {} reports to {}", inputs.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    image: fabscan_core::eval::Metrics,
    subregion: fabscan_core::eval::Metrics,
    primitive: fabscan_core::eval::Metrics,
    ahog_auc: f64,
    sift_auc: f64,
}

fn eval_cmd(manifest: &Path, reports_dir: &Path, model: &Path, out: &Path) -> CliResult<()> {
    let (m, base) = Manifest::load(manifest)?;
    let bundle = load_bundle(model)?;
    let mut reports = Vec::with_capacity(m.samples.len());
    for s in &m.samples {
        let path = reports_dir.join(format!("{}.json", s.id));
        reports.push(
            serde_json::from_str::<DetectionReport>(&read(&path)?)
                .map_err(|e| Failure::Data(format!("invalid report {}: {e}", path.display())))?,
        );
    }
    let truths: Vec<(String, GroundTruth)> = m.samples.iter().map(|s| (s.id.clone(), s.truth.clone())).collect();
    let partial: Vec<fabscan_core::Result<StageScores>> =
        m.samples.par_iter().map(|s| stage_scores(&load_image(&base.join(&s.image))?, &s.truth, &m.fabric, &bundle)).collect();
    let mut scores = StageScores::default();
    for p in partial {
        scores.extend(p?);
    }
    let ahog_roc = roc(&scores.subregions)?;
    let sift_roc = roc(&scores.primitives)?;
    let summary = EvalSummary {
        image: score_reports(&reports, &truths, &m.fabric, Level::Image)?,
        subregion: score_reports(&reports, &truths, &m.fabric, Level::SubRegion)?,
        primitive: score_reports(&reports, &truths, &m.fabric, Level::Primitive)?,
        ahog_auc: ahog_roc.auc,
        sift_auc: sift_roc.auc,
    };
    create_dir(out)?;
    write(&out.join("metrics.json"), &json(&summary))?;
    write(&out.join("roc_ahog.csv"), &ahog_roc.to_csv())?;
    write(&out.join("roc_sift.csv"), &sift_roc.to_csv())?;
    println!(
        "image accuracy {:.4}  primitive recall {}  AUC stage1 {:.4} stage2 {:.4}",
        summary.image.accuracy,
        summary.primitive.recall.map_or("n/a".into(), |r| format!("{r:.4}")),
        summary.ahog_auc,
        summary.sift_auc
    );
    Ok(())
}

fn bench_cmd(cfg: &Config, out: &Path) -> CliResult<()> {
    let base = cfg.corpus.seed;
    let seeds: Vec<u64> = (0..cfg.bench_seeds as u64).map(|i| base.wrapping_add(i)).collect();
    let tables = seeds.par_iter().map(|&s| boi_vs_bof_bench(&cfg.bench, s)).collect::<fabscan_core::Result<Vec<_>>>()?;
    let mut text = String::new();
    for (seed, rows) in seeds.iter().zip(&tables) {
        for (i, line) in bench_table_csv(rows).lines().enumerate() {
            if i == 0 {
                if text.is_empty() {
                    text.push_str(&format!("seed,{line}\n"));
                }
            } else {
                text.push_str(&format!("{seed},{line}\n"));
            }
        }
    }
    write(out, &text)?;
    let n = tables.iter().map(Vec::len).sum::<usize>() as f64;
    let (bof, boi) = tables.iter().flatten().fold((0.0, 0.0), |(a, b), r| (a + r.bof_accuracy, b + r.boi_accuracy));
    println!("mean accuracy over {} seeds: BoF {:.4}  BoI {:.4}", seeds.len(), bof / n, boi / n);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli)?;
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Generate { out } => generate(&cfg, out),
        Command::Train { manifest, out } => train_cmd(&cfg, manifest, out),
        Command::Detect { model, out, manifest, overlay, images } => detect_cmd(model, out, manifest.as_deref(), images, *overlay),
        Command::Eval { manifest, reports, model, out } => eval_cmd(manifest, reports, model, out),
        Command::BenchBoi { out } => bench_cmd(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(match f {
                Failure::Usage(_) => 1,
                Failure::Data(_) => 2,
            })
        }
    }
}
