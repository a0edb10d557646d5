//! `isound`: command-line front-end for the impact-sounding pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impact_sounding::clustering::format_score_table;
use impact_sounding::pipeline::{
    self, cluster_stage, features_stage, map_stage, pca_stage, read_features, Artifacts, PipelineConfig, FEATURES_FILE,
};
use impact_sounding::synth::{self, SlabSpec};
use impact_sounding::{Error, ErrorClass, FeatureMatrix, Result};

/// Environment variable holding the default output directory.
const OUT_ENV: &str = "ISOUND_OUT";

#[derive(Parser)]
#[command(
    name = "isound",
    version,
    about = "Impact-sounding feature extraction, clustering and defect maps"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Worker threads for per-recording stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic slab: manifest, WAV files and ground truth.
    Synth(SynthArgs),
    /// Extract the feature table from a manifest.
    Features(PipelineArgs),
    /// Fit PCA and write the component and combined maps.
    Pca(PipelineArgs),
    /// Run the clustering comparison and write labels, label maps and the silhouette report.
    Cluster(PipelineArgs),
    /// Write normalized feature maps.
    Map(PipelineArgs),
    /// Run every stage and write a run manifest.
    Run(PipelineArgs),
    /// Score cluster labels against ground truth.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory [default: $ISOUND_OUT or `slab`].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Solid slab without planted defects.
    #[arg(long)]
    no_defects: bool,
    #[arg(long)]
    length_cm: Option<f64>,
    #[arg(long)]
    width_cm: Option<f64>,
    #[arg(long)]
    spacing_cm: Option<f64>,
    #[arg(long)]
    noise_rms: Option<f64>,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    sample_rate_hz: Option<f64>,
}

/// Pipeline settings. Each flag overrides the same key in `--config`.
#[derive(Args)]
struct PipelineArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Manifest CSV (`id,x_cm,y_cm,wav_path`).
    #[arg(short, long)]
    manifest: Option<PathBuf>,
    /// Output directory [default: $ISOUND_OUT or `out`].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Grid spacing in cm, or `auto`.
    #[arg(long)]
    spacing_cm: Option<String>,
    /// Frequency band `fmin:fmax` in Hz, or `none`.
    #[arg(long)]
    band: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    include_dc: Option<bool>,
    /// `none` or `hann`.
    #[arg(long)]
    window: Option<String>,
    /// Keep a peak-centred window of this many samples (0 = whole recording).
    #[arg(long)]
    trim_samples: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    conventional_moments: Option<bool>,
    /// Show enhanced features in the feature maps.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    enhance: Option<bool>,
    #[arg(long)]
    pca_components: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pca_standardize: Option<bool>,
    /// Comma-separated: `kmeans`, `spectral`.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated cluster counts.
    #[arg(long)]
    ks: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Map gamma applied after min-max scaling.
    #[arg(long)]
    gamma: Option<f64>,
    /// Spectral affinity width, or `auto`.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Labels CSV, or a directory of them.
    #[arg(long)]
    labels: PathBuf,
    /// Ground-truth CSV (`id,truth_label`).
    #[arg(long)]
    truth: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(dir) = std::env::var_os(OUT_ENV) {
            cfg.out_dir = PathBuf::from(dir);
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
            cfg.apply_text(&text)?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let overrides = [
            ("manifest", path(&self.manifest)),
            ("out_dir", path(&self.out)),
            ("spacing_cm", self.spacing_cm.clone()),
            ("band", self.band.clone()),
            ("include_dc", opt(&self.include_dc)),
            ("window", self.window.clone()),
            ("trim_samples", opt(&self.trim_samples)),
            ("conventional_moments", opt(&self.conventional_moments)),
            ("enhance", opt(&self.enhance)),
            ("pca_components", opt(&self.pca_components)),
            ("pca_standardize", opt(&self.pca_standardize)),
            ("methods", self.methods.clone()),
            ("ks", self.ks.clone()),
            ("seed", opt(&self.seed)),
            ("gamma", self.gamma.map(|g| format!("{g:?}"))),
            ("sigma", self.sigma.clone()),
            ("n_init", opt(&self.n_init)),
            ("max_iter", opt(&self.max_iter)),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reuses `features.csv` from the output directory when present.
fn load_or_extract(cfg: &PipelineConfig) -> Result<(FeatureMatrix, Artifacts)> {
    let cached = cfg.out_dir.join(FEATURES_FILE);
    if cached.is_file() {
        log::info!("reusing {}", cached.display());
        let raw = read_features(&cached).map_err(|e| e.in_stage("features"))?;
        return Ok((raw, Artifacts::default()));
    }
    features_stage::<f64>(cfg)
}

fn commit(out: &Artifacts, dir: &Path) -> Result<()> {
    let files = out.commit(dir)?;
    for f in &files {
        log::info!("wrote {} ({} bytes)", dir.join(&f.path).display(), f.bytes);
    }
    println!("{} files written to {}", files.len(), dir.display());
    Ok(())
}

fn synth_command(args: &SynthArgs) -> Result<()> {
    let mut spec = SlabSpec::survey_geometry();
    spec.seed = args.seed;
    if args.no_defects {
        spec.defects.clear();
    }
    if let Some(v) = args.length_cm {
        spec.length_cm = v;
    }
    if let Some(v) = args.width_cm {
        spec.width_cm = v;
    }
    if let Some(v) = args.spacing_cm {
        spec.spacing_cm = v;
    }
    if let Some(v) = args.noise_rms {
        spec.noise_rms = v;
    }
    if let Some(v) = args.duration_s {
        spec.duration_s = v;
    }
    if let Some(v) = args.sample_rate_hz {
        spec.sample_rate_hz = v;
    }
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("slab"));
    let slab = synth::generate::<f64>(&spec)?;
    synth::write_slab(&slab, &out)?;
    let (nx, ny) = slab.dataset.grid_dims();
    println!(
        "{} recordings on a {nx}x{ny} grid written to {}",
        slab.dataset.len(),
        out.display()
    );
    Ok(())
}

fn score_command(args: &ScoreArgs) -> Result<()> {
    let scores = pipeline::score_path(&args.labels, &args.truth)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&scores)?);
    } else {
        println!("{:<28}{:>10}{:>10}", "labels", "accuracy", "ARI");
        for s in &scores {
            println!(
                "{:<28}{:>10.4}{:>10.4}",
                s.labels, s.score.accuracy_best_permutation, s.score.ari
            );
        }
    }
    Ok(())
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth_command(args),
        Command::Score(args) => score_command(args),
        Command::Features(args) => {
            let cfg = args.config()?;
            let (_, out) = features_stage::<f64>(&cfg)?;
            commit(&out, &cfg.out_dir)
        }
        Command::Map(args) => {
            let cfg = args.config()?;
            let (raw, mut out) = load_or_extract(&cfg)?;
            out.extend(map_stage(&raw, &cfg)?);
            commit(&out, &cfg.out_dir)
        }
        Command::Pca(args) => {
            let cfg = args.config()?;
            let (raw, mut out) = load_or_extract(&cfg)?;
            let (model, _, pca_out) = pca_stage(&raw, &cfg)?;
            out.extend(pca_out);
            commit(&out, &cfg.out_dir)?;
            let cumulative = model.cumulative_ratio();
            for (i, (r, c)) in model.explained_variance_ratio.iter().zip(&cumulative).enumerate() {
                println!("C{}: {:6.2}% (cumulative {:6.2}%)", i + 1, 100.0 * r, 100.0 * c);
            }
            Ok(())
        }
        Command::Cluster(args) => {
            let cfg = args.config()?;
            let (raw, mut out) = load_or_extract(&cfg)?;
            let (outcomes, cluster_out) = cluster_stage(&raw, &cfg)?;
            out.extend(cluster_out);
            commit(&out, &cfg.out_dir)?;
            let entries: Vec<_> = outcomes.into_iter().map(|o| o.score).collect();
            print!("{}", format_score_table(&entries));
            Ok(())
        }
        Command::Run(args) => {
            let cfg = args.config()?;
            let report = pipeline::run_pipeline::<f64>(&cfg)?;
            println!(
                "{} recordings, {}x{} grid, {} files written to {}",
                report.recordings,
                report.grid.0,
                report.grid.1,
                report.files.len() + 1,
                cfg.out_dir.display()
            );
            let ratios: Vec<String> = report
                .explained_variance_ratio
                .iter()
                .map(|r| format!("{:.2}%", 100.0 * r))
                .collect();
            println!("explained variance: {}", ratios.join(" "));
            print!("{}", format_score_table(&report.scores));
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(4);
    }
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
