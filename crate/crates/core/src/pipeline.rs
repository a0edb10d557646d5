//! End-to-end analysis: manifest to features, maps, PCA, clusterings and
//! reports.
//!
//! Every stage returns its outputs as in-memory [`Artifacts`]; nothing touches
//! the output directory until [`Artifacts::commit`], which removes what it
//! wrote if any write fails.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::clustering::{
    build_input, compare_clusterings, labels_csv, ClusterConfig, ClusterMethod, InputKind, KMeansOptions, ScoreEntry,
};
use crate::error::{Error, Result};
use crate::features::{
    build_feature_matrix, compute_spectra, enhance, standardize, trim_around_peak, FeatureMatrix, MomentNormalization,
};
use crate::mapping::{normalize_map, rasterize_points, write_map_csv, write_pgm, GridGeometry, GridMap, PointValues};
use crate::pca::{combine_components, fit_pca, transform, PcaModel};
use crate::scalar::Scalar;
use crate::signal_io::{load_manifest_file, Dataset, ManifestOptions, Recording, DEFAULT_SPACING_CM};
use crate::spectral::{SpectrumOptions, Window};
use crate::synth::{read_labels, score_against_truth, TruthScore};

pub const FEATURES_FILE: &str = "features.csv";
pub const PCA_MODEL_FILE: &str = "pca_model.json";
pub const PCA_SCORES_FILE: &str = "pca_scores.csv";
pub const SCATTER_FILE: &str = "pca_scatter.csv";
pub const SILHOUETTE_FILE: &str = "silhouette_report.json";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub spacing_cm: Option<f64>,
    pub band: Option<(f64, f64)>,
    pub include_dc: bool,
    pub window: Window,
    /// Peak-centred window length in samples; 0 keeps whole recordings.
    pub trim_samples: usize,
    pub conventional_moments: bool,
    /// Feature maps show `[E, P^3, M1^2, M2^2, M3, M4]`.
    pub enhance: bool,
    pub pca_components: usize,
    /// Fit the exported PCA model on z-scored features.
    pub pca_standardize: bool,
    pub methods: Vec<ClusterMethod>,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub gamma: f64,
    /// Spectral affinity width; `None` uses the median pairwise distance.
    pub sigma: Option<f64>,
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let kmeans = KMeansOptions::default();
        PipelineConfig {
            manifest: PathBuf::from("manifest.csv"),
            out_dir: PathBuf::from("out"),
            spacing_cm: None,
            band: None,
            include_dc: false,
            window: Window::None,
            trim_samples: 0,
            conventional_moments: false,
            enhance: true,
            pca_components: 3,
            pca_standardize: true,
            methods: vec![ClusterMethod::KMeans, ClusterMethod::Spectral],
            ks: vec![2, 3],
            seed: 0,
            gamma: 1.0,
            sigma: None,
            n_init: kmeans.n_init,
            max_iter: kmeans.max_iter,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidArgument(format!(
            "`{key}` expects a boolean, got `{value}`"
        ))),
    }
}

fn parse_num<N: std::str::FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "auto" | "none" | "" => Ok(None),
        v => parse_num(key, v).map(Some),
    }
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(",")
}

fn auto_text(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| format!("{v:?}"))
}

impl PipelineConfig {
    pub fn moment_normalization(&self) -> MomentNormalization {
        if self.conventional_moments {
            MomentNormalization::Conventional
        } else {
            MomentNormalization::AsPrinted
        }
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            include_dc: self.include_dc,
            band: self.band,
            window: self.window,
        }
    }

    pub fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            n_init: self.n_init,
            max_iter: self.max_iter,
        }
    }

    /// Comparison grid restricted to the configured methods and ks.
    pub fn cluster_configs(&self) -> Vec<ClusterConfig> {
        ClusterConfig::default_grid(&self.ks)
            .into_iter()
            .filter(|c| self.methods.contains(&c.method))
            .collect()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "manifest" => self.manifest = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "spacing_cm" => self.spacing_cm = parse_auto(key, value)?,
            "band" => {
                self.band = match value {
                    "none" | "full" | "" => None,
                    v => {
                        let (lo, hi) = v.split_once(':').ok_or_else(|| {
                            Error::InvalidArgument(format!("`band` expects fmin:fmax in Hz, got `{v}`"))
                        })?;
                        Some((parse_num(key, lo.trim())?, parse_num(key, hi.trim())?))
                    }
                }
            }
            "include_dc" => self.include_dc = parse_bool(key, value)?,
            "window" => {
                self.window = match value {
                    "none" => Window::None,
                    "hann" => Window::Hann,
                    v => return Err(Error::InvalidArgument(format!("unknown window `{v}`"))),
                }
            }
            "trim_samples" => self.trim_samples = parse_num(key, value)?,
            "conventional_moments" => self.conventional_moments = parse_bool(key, value)?,
            "enhance" => self.enhance = parse_bool(key, value)?,
            "pca_components" => self.pca_components = parse_num(key, value)?,
            "pca_standardize" => self.pca_standardize = parse_bool(key, value)?,
            "methods" => self.methods = value.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?,
            "ks" => {
                self.ks = value
                    .split(',')
                    .map(|k| parse_num(key, k.trim()))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "sigma" => self.sigma = parse_auto(key, value)?,
            "n_init" => self.n_init = parse_num(key, value)?,
            "max_iter" => self.max_iter = parse_num(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::InvalidArgument(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(1..=6).contains(&self.pca_components) {
            return bad(format!("pca_components must be in [1, 6], got {}", self.pca_components));
        }
        if self.ks.is_empty() || self.ks.iter().any(|&k| k < 2) {
            return bad(format!("k values must be >= 2, got {:?}", self.ks));
        }
        if self.methods.is_empty() {
            return bad("at least one cluster method is required".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if let Some(s) = self.sigma.filter(|s| !(s.is_finite() && *s > 0.0)) {
            return bad(format!("sigma must be positive, got {s}"));
        }
        if let Some(s) = self.spacing_cm.filter(|s| !(s.is_finite() && *s > 0.0)) {
            return bad(format!("spacing_cm must be positive, got {s}"));
        }
        if let Some((lo, hi)) = self
            .band
            .filter(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return bad(format!("band must satisfy fmin <= fmax, got {lo}:{hi}"));
        }
        if self.n_init == 0 || self.max_iter == 0 {
            return bad("n_init and max_iter must be positive".into());
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("manifest", self.manifest.display().to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("spacing_cm", auto_text(self.spacing_cm)),
            (
                "band",
                self.band
                    .map_or_else(|| "none".into(), |(lo, hi)| format!("{lo:?}:{hi:?}")),
            ),
            ("include_dc", self.include_dc.to_string()),
            (
                "window",
                match self.window {
                    Window::None => "none".into(),
                    Window::Hann => "hann".into(),
                },
            ),
            ("trim_samples", self.trim_samples.to_string()),
            ("conventional_moments", self.conventional_moments.to_string()),
            ("enhance", self.enhance.to_string()),
            ("pca_components", self.pca_components.to_string()),
            ("pca_standardize", self.pca_standardize.to_string()),
            ("methods", join(self.methods.iter().map(|m| m.to_string()))),
            ("ks", join(self.ks.iter().map(|k| k.to_string()))),
            ("seed", self.seed.to_string()),
            ("gamma", format!("{:?}", self.gamma)),
            ("sigma", auto_text(self.sigma)),
            ("n_init", self.n_init.to_string()),
            ("max_iter", self.max_iter.to_string()),
        ]
    }

    /// Canonical `key = value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    /// Hash of every setting that can change results (the output directory
    /// is excluded).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().into_iter().filter(|(k, _)| *k != "out_dir") {
            h.update(format!("{k} = {v}\n"));
        }
        format!("{:x}", h.finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// One output file, path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts(pub Vec<Artifact>);

impl Artifacts {
    pub fn push(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.0.push(Artifact {
            path: path.into(),
            bytes: bytes.into(),
        });
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.0.extend(other.0);
    }

    pub fn get(&self, path: impl AsRef<Path>) -> Option<&[u8]> {
        self.0
            .iter()
            .find(|a| a.path == path.as_ref())
            .map(|a| a.bytes.as_slice())
    }

    pub fn paths(&self) -> Vec<&Path> {
        self.0.iter().map(|a| a.path.as_path()).collect()
    }

    fn push_map<T: Scalar>(&mut self, stem: &str, map: &GridMap<T>) {
        self.push(format!("maps/{stem}.pgm"), write_pgm(map));
        self.push(format!("maps/{stem}.csv"), write_map_csv(map));
    }

    /// Writes every artifact under `out_dir`. On failure, files written by
    /// this call are removed before the error is returned.
    pub fn commit(&self, out_dir: &Path) -> Result<Vec<FileRecord>> {
        let mut written: Vec<PathBuf> = Vec::new();
        let result = self
            .0
            .iter()
            .map(|a| {
                let path = out_dir.join(&a.path);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
                }
                std::fs::write(&path, &a.bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                written.push(path);
                Ok(FileRecord {
                    path: a.path.to_string_lossy().replace('\\', "/"),
                    bytes: a.bytes.len(),
                    sha256: sha256_hex(&a.bytes),
                })
            })
            .collect::<Result<Vec<_>>>();
        if result.is_err() {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
        }
        result
    }
}

/// Loads the manifest and extracts the raw feature table.
pub fn load_dataset<T: Scalar>(config: &PipelineConfig) -> Result<Dataset<T>> {
    let opts = ManifestOptions {
        spacing_cm: config.spacing_cm,
        default_spacing_cm: DEFAULT_SPACING_CM,
    };
    let dataset = load_manifest_file::<T>(&config.manifest, &opts)?;
    if config.trim_samples == 0 {
        return Ok(dataset);
    }
    let trimmed = dataset
        .recordings()
        .iter()
        .map(|r| Recording {
            samples: trim_around_peak(&r.samples, config.trim_samples),
            ..r.clone()
        })
        .collect();
    Dataset::new(trimmed, Some(dataset.spacing_cm()), dataset.spacing_cm())
}

pub fn extract_features<T: Scalar>(dataset: &Dataset<T>, config: &PipelineConfig) -> Result<FeatureMatrix<T>> {
    let spectra = compute_spectra(dataset, &config.spectrum_options())?;
    build_feature_matrix(dataset, &spectra, config.moment_normalization())
}

/// Feature extraction stage: `features.csv`.
pub fn features_stage<T: Scalar>(config: &PipelineConfig) -> Result<(FeatureMatrix<T>, Artifacts)> {
    let run = || {
        let dataset = load_dataset::<T>(config)?;
        let raw = extract_features(&dataset, config)?;
        let mut out = Artifacts::default();
        out.push(FEATURES_FILE, raw.to_csv()?);
        Ok((raw, out))
    };
    run().map_err(|e: Error| e.in_stage("features"))
}

/// Reads a feature table written by [`features_stage`].
pub fn read_features<T: Scalar>(path: &Path) -> Result<FeatureMatrix<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    FeatureMatrix::from_csv(std::io::BufReader::new(file))
}

fn geometry<T>(matrix: &FeatureMatrix<T>, config: &PipelineConfig) -> Result<GridGeometry> {
    GridGeometry::from_positions(&matrix.positions, config.spacing_cm)
}

fn scalar_map<T: Scalar>(matrix: &FeatureMatrix<T>, g: GridGeometry, values: &[T]) -> Result<GridMap<T>> {
    rasterize_points(&matrix.ids, &matrix.positions, g, PointValues::Scalar(values))
}

/// Feature map stage: one normalized map per feature column.
pub fn map_stage<T: Scalar>(raw: &FeatureMatrix<T>, config: &PipelineConfig) -> Result<Artifacts> {
    let run = || {
        let shown = if config.enhance { enhance(raw)? } else { raw.clone() };
        let g = geometry(raw, config)?;
        let mut out = Artifacts::default();
        for (j, name) in shown.columns.iter().enumerate() {
            let map = scalar_map(&shown, g, &shown.data.column(j))?;
            let map = normalize_map(&map, T::lit(config.gamma))?;
            out.push_map(&format!("feature_{}", name.to_ascii_lowercase()), &map);
        }
        Ok(out)
    };
    run().map_err(|e: Error| e.in_stage("map"))
}

/// PCA stage: model JSON, score table, per-component and combined maps.
pub fn pca_stage<T: Scalar>(
    raw: &FeatureMatrix<T>,
    config: &PipelineConfig,
) -> Result<(PcaModel<T>, FeatureMatrix<T>, Artifacts)> {
    let run = || {
        let input = if config.pca_standardize {
            standardize(raw)?.matrix
        } else {
            raw.clone()
        };
        let model = fit_pca(&input, config.pca_components)?;
        let scores = transform(&model, &input)?;
        let g = geometry(raw, config)?;
        let gamma = T::lit(config.gamma);
        let mut out = Artifacts::default();
        out.push(PCA_MODEL_FILE, model.to_json()?);
        out.push(PCA_SCORES_FILE, scores.to_csv()?);
        for j in 0..scores.ncols() {
            let map = scalar_map(raw, g, &scores.data.column(j))?;
            out.push_map(&format!("pca_c{}", j + 1), &normalize_map(&map, gamma)?);
        }
        let combined = if scores.ncols() >= 3 {
            combine_components(&scores.data.select_columns(&[0, 1, 2]))?
        } else {
            scores.data.rows_iter().map(|r| r.iter().copied().sum()).collect()
        };
        let map = scalar_map(raw, g, &combined)?;
        out.push_map("pca_combined", &normalize_map(&map, gamma)?);
        Ok((model, scores, out))
    };
    run().map_err(|e: Error| e.in_stage("pca"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilhouetteReport {
    pub seed: u64,
    pub sigma: Option<f64>,
    pub entries: Vec<ScoreEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub config: ClusterConfig,
    pub labels: Vec<usize>,
    pub score: ScoreEntry,
}

/// Clustering stage: labels and label map per configuration, the silhouette
/// report, and PCA(X,3) scores with every labeling for scatter plots.
pub fn cluster_stage<T: Scalar>(
    raw: &FeatureMatrix<T>,
    config: &PipelineConfig,
) -> Result<(Vec<ClusterOutcome>, Artifacts)> {
    let run = || {
        let results = compare_clusterings(
            raw,
            &config.cluster_configs(),
            config.seed,
            &config.kmeans_options(),
            config.sigma,
        )?;
        let g = geometry(raw, config)?;
        let mut out = Artifacts::default();
        let mut outcomes = Vec::with_capacity(results.len());
        for (cfg, model, score) in results {
            let slug = cfg.slug();
            out.push(format!("labels/{slug}.csv"), labels_csv(raw, &model.labels)?);
            let map = rasterize_points(&raw.ids, &raw.positions, g, PointValues::<T>::Labels(&model.labels))?;
            out.push_map(&format!("labels_{slug}"), &map);
            outcomes.push(ClusterOutcome {
                config: cfg,
                labels: model.labels,
                score,
            });
        }
        let report = SilhouetteReport {
            seed: config.seed,
            sigma: config.sigma,
            entries: outcomes.iter().map(|o| o.score.clone()).collect(),
        };
        out.push(SILHOUETTE_FILE, serde_json::to_vec_pretty(&report)?);
        out.push(SCATTER_FILE, scatter_csv(raw, &outcomes)?);
        Ok((outcomes, out))
    };
    run().map_err(|e: Error| e.in_stage("cluster"))
}

fn scatter_csv<T: Scalar>(raw: &FeatureMatrix<T>, outcomes: &[ClusterOutcome]) -> Result<String> {
    let scores = build_input(raw, InputKind::Pca3)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["id", "x_cm", "y_cm"].iter().map(|s| s.to_string()).collect();
    header.extend(scores.columns.iter().cloned());
    header.extend(outcomes.iter().map(|o| format!("label_{}", o.config.slug())));
    w.write_record(&header)?;
    for i in 0..raw.nrows() {
        let mut rec = vec![
            raw.ids[i].clone(),
            format!("{:?}", raw.positions[i].x_cm),
            format!("{:?}", raw.positions[i].y_cm),
        ];
        rec.extend(scores.data.row(i).iter().map(|v| format!("{v:?}")));
        rec.extend(outcomes.iter().map(|o| o.labels[i].to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("flushing scatter table", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 input yields UTF-8 CSV"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub recordings: usize,
    pub grid: (usize, usize),
    pub explained_variance_ratio: Vec<f64>,
    pub scores: Vec<ScoreEntry>,
    pub files: Vec<FileRecord>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    scalar: &'static str,
    config_hash: String,
    config: &'a str,
    input_manifest_sha256: String,
    created_unix_s: u64,
    files: &'a [FileRecord],
}

/// All stages, in memory, without writing anything.
pub fn build_outputs<T: Scalar>(config: &PipelineConfig) -> Result<(RunReport, Artifacts)> {
    config.validate()?;
    let t0 = Instant::now();
    let (raw, mut out) = features_stage::<T>(config)?;
    log::info!("features: {} recordings in {:.2?}", raw.nrows(), t0.elapsed());
    out.extend(map_stage(&raw, config)?);
    let (model, _, pca_out) = pca_stage(&raw, config)?;
    out.extend(pca_out);
    log::info!("pca: {} components, {:.2?}", model.n_components(), t0.elapsed());
    let (outcomes, cluster_out) = cluster_stage(&raw, config)?;
    out.extend(cluster_out);
    log::info!("cluster: {} runs, {:.2?}", outcomes.len(), t0.elapsed());
    let g = geometry(&raw, config)?;
    let report = RunReport {
        recordings: raw.nrows(),
        grid: (g.nx, g.ny),
        explained_variance_ratio: model.explained_variance_ratio.iter().map(|v| v.as_f64()).collect(),
        scores: outcomes.into_iter().map(|o| o.score).collect(),
        files: Vec::new(),
    };
    Ok((report, out))
}

/// Runs every stage and writes the outputs plus `run_manifest.json`, which
/// lists each file with its hash.
pub fn run_pipeline<T: Scalar>(config: &PipelineConfig) -> Result<RunReport> {
    let (mut report, out) = build_outputs::<T>(config)?;
    let input =
        std::fs::read(&config.manifest).map_err(|e| Error::io(format!("reading {}", config.manifest.display()), e))?;
    report.files = out.commit(&config.out_dir)?;
    let config_text = config.to_text();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scalar: std::any::type_name::<T>(),
        config_hash: config.hash(),
        config: &config_text,
        input_manifest_sha256: sha256_hex(&input),
        created_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files: &report.files,
    };
    let mut last = Artifacts::default();
    last.push(RUN_MANIFEST_FILE, serde_json::to_vec_pretty(&manifest)?);
    if let Err(e) = last.commit(&config.out_dir) {
        for f in &report.files {
            let _ = std::fs::remove_file(config.out_dir.join(&f.path));
        }
        return Err(e);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub labels: String,
    #[serde(flatten)]
    pub score: TruthScore,
}

/// Scores a labels CSV against a truth CSV, matching rows by id.
pub fn score_labels(labels_csv: &[u8], truth_csv: &[u8]) -> Result<TruthScore> {
    let (ids, labels) = read_labels(labels_csv)?;
    let (truth_ids, truth) = read_labels(truth_csv)?;
    let by_id: HashMap<&str, usize> = truth_ids
        .iter()
        .map(String::as_str)
        .zip(truth.iter().copied())
        .collect();
    let aligned =
        ids.iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("id `{id}` missing from truth table")).in_recording(id)
                })
            })
            .collect::<Result<Vec<_>>>()?;
    score_against_truth(&labels, &aligned)
}

/// Scores one labels file, or every `*.csv` in a directory (sorted by name).
pub fn score_path(labels: &Path, truth: &Path) -> Result<Vec<LabelScore>> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(format!("reading {}", p.display()), e));
    let truth_bytes = read(truth)?;
    let files = if labels.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(labels)
            .map_err(|e| Error::io(format!("listing {}", labels.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        v
    } else {
        vec![labels.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no label files in {}",
            labels.display()
        )));
    }
    files
        .iter()
        .map(|p| {
            Ok(LabelScore {
                labels: p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                score: score_labels(&read(p)?, &truth_bytes).map_err(|e| e.in_stage("score"))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, write_slab, SlabSpec};

    fn small_slab(dir: &Path) -> PipelineConfig {
        let mut spec = SlabSpec::survey_geometry();
        spec.length_cm = 30.0;
        spec.defects.clear();
        spec.defects.push(crate::synth::Defect {
            region: crate::synth::Region::Rect {
                x0_cm: 10.0,
                y0_cm: 0.0,
                x1_cm: 18.0,
                y1_cm: 20.0,
            },
            kind: crate::synth::DefectKind::Void,
        });
        spec.duration_s = 0.01;
        write_slab(&generate::<f64>(&spec).unwrap(), dir).unwrap();
        PipelineConfig {
            manifest: dir.join("manifest.csv"),
            out_dir: dir.join("out"),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("# comment\nband = 100:20000\nks = 2, 3, 4\nmethods = kmeans\nsigma = 0.5\nwindow = hann\n")
            .unwrap();
        assert_eq!(cfg.band, Some((100.0, 20000.0)));
        assert_eq!(cfg.ks, vec![2, 3, 4]);
        assert_eq!(cfg.sigma, Some(0.5));
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn config_errors() {
        assert!(PipelineConfig::from_text("bogus = 1").is_err());
        assert!(PipelineConfig::from_text("no equals sign").is_err());
        let mut cfg = PipelineConfig {
            ks: vec![1],
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.ks = vec![2];
        cfg.pca_components = 7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_out_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            out_dir: "elsewhere".into(),
            ..a.clone()
        };
        let c = PipelineConfig { seed: 9, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn default_grid_has_eight_configs() {
        assert_eq!(PipelineConfig::default().cluster_configs().len(), 8);
        let cfg = PipelineConfig {
            methods: vec![ClusterMethod::Spectral],
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.cluster_configs().len(), 2);
    }

    #[test]
    fn run_writes_inventory_and_is_deterministic() {
        let dir = std::env::temp_dir().join(format!("isound-pipeline-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = small_slab(&dir);
        let report = run_pipeline::<f64>(&cfg).unwrap();
        assert_eq!(report.recordings, 16 * 11);
        assert_eq!(report.grid, (16, 11));
        assert_eq!(report.scores.len(), 8);
        let count = |prefix: &str| {
            report
                .files
                .iter()
                .filter(|f| f.path.starts_with(prefix) && f.path.ends_with(".pgm"))
                .count()
        };
        assert_eq!(count("maps/feature_"), 6);
        assert_eq!(count("maps/pca_c") - count("maps/pca_combined"), 3);
        assert_eq!(count("maps/pca_combined"), 1);
        assert_eq!(count("maps/labels_"), 8);
        assert!(cfg.out_dir.join(RUN_MANIFEST_FILE).exists());

        let (_, again) = build_outputs::<f64>(&cfg).unwrap();
        for a in &again.0 {
            assert_eq!(
                std::fs::read(cfg.out_dir.join(&a.path)).unwrap(),
                a.bytes,
                "{}",
                a.path.display()
            );
        }
        let scores = score_path(&cfg.out_dir.join("labels"), &dir.join("truth.csv")).unwrap();
        assert_eq!(scores.len(), 8);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn commit_rolls_back_on_failure() {
        let dir = std::env::temp_dir().join(format!("isound-commit-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(dir.join("blocked")).unwrap();
        let mut a = Artifacts::default();
        a.push("ok.txt", "fine");
        // A directory already occupies this path, so the write fails.
        a.push("blocked", "nope");
        assert!(a.commit(&dir).is_err());
        assert!(!dir.join("ok.txt").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn score_matches_by_id() {
        let labels = b"id,x_cm,y_cm,label\nb,0,0,1\na,2,0,0\n";
        let truth = b"id,truth_label\na,5\nb,7\n";
        let s = score_labels(labels, truth).unwrap();
        assert_eq!(s.accuracy_best_permutation, 1.0);
        assert!(score_labels(labels, b"id,truth_label\na,5\n").is_err());
    }
}
