//! Synthetic slabs with planted void and delamination regions.
//!
//! Every lattice point gets a damped-sinusoid impact response plus white
//! noise. The class templates are test fixtures, not measured physics:
//!
//! * solid: one mode at `solid_freq_hz`, amplitude 1
//! * void: the same mode shifted down by `void_freq_shift`, amplitude
//!   scaled by `void_amplitude`
//! * delamination: the solid mode plus a low-frequency flexural mode, both
//!   scaled by `delamination_amplitude`

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::signal_io::{write_manifest, write_wav, Dataset, ManifestRow, Position, Recording};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Void,
    Delamination,
}

/// Ground-truth classes. The numeric value is the label written to
/// `truth.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurfaceClass {
    Solid = 0,
    Void = 1,
    Delamination = 2,
}

impl From<DefectKind> for SurfaceClass {
    fn from(k: DefectKind) -> Self {
        match k {
            DefectKind::Void => SurfaceClass::Void,
            DefectKind::Delamination => SurfaceClass::Delamination,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Rect {
        x0_cm: f64,
        y0_cm: f64,
        x1_cm: f64,
        y1_cm: f64,
    },
    Circle {
        cx_cm: f64,
        cy_cm: f64,
        r_cm: f64,
    },
}

impl Region {
    /// Boundary-inclusive membership.
    pub fn contains(&self, p: Position) -> bool {
        const EPS: f64 = 1e-9;
        match *self {
            Region::Rect {
                x0_cm,
                y0_cm,
                x1_cm,
                y1_cm,
            } => p.x_cm >= x0_cm - EPS && p.x_cm <= x1_cm + EPS && p.y_cm >= y0_cm - EPS && p.y_cm <= y1_cm + EPS,
            Region::Circle { cx_cm, cy_cm, r_cm } => {
                let (dx, dy) = (p.x_cm - cx_cm, p.y_cm - cy_cm);
                dx * dx + dy * dy <= r_cm * r_cm + EPS
            }
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Region::Rect {
                x0_cm,
                y0_cm,
                x1_cm,
                y1_cm,
            } => (x0_cm, y0_cm, x1_cm, y1_cm),
            Region::Circle { cx_cm, cy_cm, r_cm } => (cx_cm - r_cm, cy_cm - r_cm, cx_cm + r_cm, cy_cm + r_cm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub region: Region,
    pub kind: DefectKind,
}

/// Response templates per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub solid_freq_hz: f64,
    /// Exponential decay rate of the solid mode (1/s).
    pub solid_decay: f64,
    /// Fractional downward shift of the dominant frequency over voids.
    pub void_freq_shift: f64,
    pub void_amplitude: f64,
    pub delamination_amplitude: f64,
    pub flexural_freq_hz: f64,
    pub flexural_decay: f64,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            solid_freq_hz: 6000.0,
            solid_decay: 300.0,
            void_freq_shift: 0.30,
            void_amplitude: 0.4,
            delamination_amplitude: 0.6,
            flexural_freq_hz: 1200.0,
            flexural_decay: 80.0,
        }
    }
}

/// A damped mode `A exp(-decay t) sin(2 pi f t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub freq_hz: f64,
    pub decay: f64,
}

impl Templates {
    pub fn modes(&self, class: SurfaceClass) -> Vec<Mode> {
        let solid = Mode {
            amplitude: 1.0,
            freq_hz: self.solid_freq_hz,
            decay: self.solid_decay,
        };
        match class {
            SurfaceClass::Solid => vec![solid],
            SurfaceClass::Void => vec![Mode {
                amplitude: self.void_amplitude,
                freq_hz: self.solid_freq_hz * (1.0 - self.void_freq_shift),
                ..solid
            }],
            SurfaceClass::Delamination => vec![
                Mode {
                    amplitude: self.delamination_amplitude,
                    ..solid
                },
                Mode {
                    amplitude: self.delamination_amplitude,
                    freq_hz: self.flexural_freq_hz,
                    decay: self.flexural_decay,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    /// Extent along y.
    pub width_cm: f64,
    /// Extent along x.
    pub length_cm: f64,
    pub spacing_cm: f64,
    pub defects: Vec<Defect>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub noise_rms: f64,
    pub seed: u64,
    pub templates: Templates,
}

impl SlabSpec {
    /// 162 x 20 cm slab at 2 cm spacing (82 x 11 = 902 points), 44.1 kHz,
    /// with a 20 x 20 cm void and a 6 cm radius delamination.
    pub fn survey_geometry() -> Self {
        SlabSpec {
            width_cm: 20.0,
            length_cm: 162.0,
            spacing_cm: 2.0,
            defects: vec![
                Defect {
                    region: Region::Rect {
                        x0_cm: 30.0,
                        y0_cm: 0.0,
                        x1_cm: 50.0,
                        y1_cm: 20.0,
                    },
                    kind: DefectKind::Void,
                },
                Defect {
                    region: Region::Circle {
                        cx_cm: 110.0,
                        cy_cm: 10.0,
                        r_cm: 6.0,
                    },
                    kind: DefectKind::Delamination,
                },
            ],
            sample_rate_hz: 44100.0,
            duration_s: 0.05,
            noise_rms: 0.01,
            seed: 1,
            templates: Templates::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("spacing_cm", self.spacing_cm)?;
        positive("sample_rate_hz", self.sample_rate_hz)?;
        positive("duration_s", self.duration_s)?;
        if !(self.width_cm >= 0.0 && self.length_cm >= 0.0) {
            return Err(Error::InvalidArgument("slab extents must be non-negative".into()));
        }
        if !(self.noise_rms >= 0.0) {
            return Err(Error::InvalidArgument("noise_rms must be non-negative".into()));
        }
        if self.sample_count() == 0 {
            return Err(Error::InvalidArgument("duration too short for one sample".into()));
        }
        for d in &self.defects {
            let (x0, y0, x1, y1) = d.region.bounds();
            let eps = 1e-9;
            if x0 > x1 || y0 > y1 || x0 < -eps || y0 < -eps || x1 > self.length_cm + eps || y1 > self.width_cm + eps {
                return Err(Error::InvalidArgument(format!(
                    "{:?} defect region {:?} extends beyond the {} x {} cm slab",
                    d.kind, d.region, self.length_cm, self.width_cm
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> (usize, usize) {
        let nx = (self.length_cm / self.spacing_cm + 1e-9).floor() as usize + 1;
        let ny = (self.width_cm / self.spacing_cm + 1e-9).floor() as usize + 1;
        (nx, ny)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Lattice positions, x-major.
    pub fn positions(&self) -> Vec<Position> {
        let (nx, ny) = self.grid();
        (0..nx)
            .flat_map(|i| (0..ny).map(move |j| (i, j)))
            .map(|(i, j)| Position::new(i as f64 * self.spacing_cm, j as f64 * self.spacing_cm))
            .collect()
    }

    /// Planted class at `p`; later defects win where regions overlap.
    pub fn class_at(&self, p: Position) -> SurfaceClass {
        self.defects
            .iter()
            .rev()
            .find(|d| d.region.contains(p))
            .map_or(SurfaceClass::Solid, |d| d.kind.into())
    }
}

/// Generated dataset plus the planted class of every recording.
#[derive(Debug, Clone)]
pub struct SyntheticSlab<T> {
    pub dataset: Dataset<T>,
    pub truth: Vec<usize>,
}

/// Samples quantized to the 16-bit grid so the in-memory and WAV forms agree.
fn render_recording(spec: &SlabSpec, modes: &[Mode], index: usize) -> Vec<f64> {
    let n = spec.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let noise = Normal::new(0.0, spec.noise_rms).expect("validated noise level");
    (0..n)
        .map(|s| {
            let t = s as f64 / spec.sample_rate_hz;
            let clean: f64 = modes
                .iter()
                .map(|m| m.amplitude * (-m.decay * t).exp() * (2.0 * PI * m.freq_hz * t).sin())
                .sum();
            let x = if spec.noise_rms > 0.0 {
                clean + noise.sample(&mut rng)
            } else {
                clean
            };
            (x.clamp(-1.0, 32767.0 / 32768.0) * 32768.0).round() / 32768.0
        })
        .collect()
}

fn point_id(index: usize) -> String {
    format!("p{index:04}")
}

pub fn generate<T: Scalar>(spec: &SlabSpec) -> Result<SyntheticSlab<T>> {
    spec.validate()?;
    let positions = spec.positions();
    let classes: Vec<SurfaceClass> = positions.iter().map(|&p| spec.class_at(p)).collect();
    let recordings = positions
        .par_iter()
        .zip(classes.par_iter())
        .enumerate()
        .map(|(i, (&p, &class))| {
            let samples = render_recording(spec, &spec.templates.modes(class), i)
                .into_iter()
                .map(T::lit)
                .collect();
            Recording::new(point_id(i), samples, spec.sample_rate_hz, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::new(recordings, Some(spec.spacing_cm), spec.spacing_cm)?;
    Ok(SyntheticSlab {
        dataset,
        truth: classes.into_iter().map(|c| c as usize).collect(),
    })
}

/// Writes `manifest.csv`, `wav/<id>.wav` and `truth.csv` under `dir`.
pub fn write_slab<T: Scalar>(slab: &SyntheticSlab<T>, dir: &Path) -> Result<()> {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(format!("creating {}", wav_dir.display()), e))?;
    let rate = slab.dataset.sample_rate_hz().round() as u32;
    let mut rows = Vec::with_capacity(slab.dataset.len());
    for r in slab.dataset.recordings() {
        let rel = format!("wav/{}.wav", r.id);
        let path = dir.join(&rel);
        std::fs::write(&path, write_wav(&r.samples, rate))
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        rows.push(ManifestRow {
            id: r.id.clone(),
            position: r.position,
            wav_path: rel,
        });
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, write_manifest(&rows)?)
        .map_err(|e| Error::io(format!("writing {}", manifest.display()), e))?;
    let truth = dir.join("truth.csv");
    std::fs::write(&truth, truth_csv(&slab.dataset.ids(), &slab.truth)?)
        .map_err(|e| Error::io(format!("writing {}", truth.display()), e))?;
    Ok(())
}

pub fn truth_csv(ids: &[String], truth: &[usize]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "truth_label"])?;
    for (id, t) in ids.iter().zip(truth) {
        w.write_record([id.as_str(), &t.to_string()])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("flushing truth table", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 input yields UTF-8 CSV"))
}

/// Parses `id,<label>` CSV (truth or cluster labels; the label is the last
/// column).
pub fn read_labels<R: std::io::Read>(reader: R) -> Result<(Vec<String>, Vec<usize>)> {
    let mut r = csv::Reader::from_reader(reader);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let last = rec.get(rec.len().saturating_sub(1)).unwrap_or("");
        let label = last.parse().map_err(|_| Error::Manifest {
            line: i + 2,
            reason: format!("label `{last}` is not a non-negative integer"),
        })?;
        ids.push(rec.get(0).unwrap_or("").to_string());
        labels.push(label);
    }
    Ok((ids, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthScore {
    pub accuracy_best_permutation: f64,
    pub ari: f64,
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut uniq: Vec<usize> = labels.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let dense = labels.iter().map(|l| uniq.binary_search(l).expect("present")).collect();
    (dense, uniq.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Vec<Vec<u64>> {
    let (da, ka) = dense_labels(a);
    let (db, kb) = dense_labels(b);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&i, &j) in da.iter().zip(&db) {
        table[i][j] += 1;
    }
    table
}

/// Adjusted Rand index (Hubert and Arabie).
pub fn adjusted_rand_index(labels: &[usize], truth: &[usize]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let table = contingency(labels, truth);
    let index: f64 = table.iter().flatten().map(|&c| comb2(c as f64)).sum();
    let rows: f64 = table.iter().map(|r| comb2(r.iter().sum::<u64>() as f64)).sum();
    let cols: f64 = (0..table[0].len())
        .map(|j| comb2(table.iter().map(|r| r[j]).sum::<u64>() as f64))
        .sum();
    let total = comb2(n);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < f64::EPSILON {
        // Both partitions trivial in the same way.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over one-to-one matchings of predicted clusters to truth
/// classes, plus ARI.
pub fn score_against_truth(labels: &[usize], truth: &[usize]) -> Result<TruthScore> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let table = contingency(labels, truth);
    let (ka, kb) = (table.len(), table[0].len());
    let m = ka.max(kb);
    if m > 8 {
        return Err(Error::InvalidArgument(format!(
            "permutation search supports at most 8 classes, got {m}"
        )));
    }
    let cell = |i: usize, j: usize| if i < ka && j < kb { table[i][j] } else { 0 };
    let best = permutations(m)
        .iter()
        .map(|p| (0..m).map(|i| cell(i, p[i])).sum::<u64>())
        .max()
        .unwrap_or(0);
    Ok(TruthScore {
        accuracy_best_permutation: best as f64 / labels.len() as f64,
        ari: adjusted_rand_index(labels, truth)?,
    })
}

/// Collapses planted classes to defect (1) versus solid (0).
pub fn binary_truth(truth: &[usize]) -> Vec<usize> {
    truth
        .iter()
        .map(|&t| usize::from(t != SurfaceClass::Solid as usize))
        .collect()
}

/// Two isotropic 2-D Gaussian blobs (unit std) whose centres are
/// `separation` apart; labels 0 and 1.
pub fn two_blobs(n_per_blob: usize, separation: f64, seed: u64) -> (Matrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(2 * n_per_blob);
    let mut labels = Vec::with_capacity(2 * n_per_blob);
    for (label, cx) in [(0, 0.0), (1, separation)] {
        for _ in 0..n_per_blob {
            rows.push([cx + unit.sample(&mut rng), unit.sample(&mut rng)]);
            labels.push(label);
        }
    }
    (Matrix::from_rows(&rows).expect("rectangular"), labels)
}

/// Two concentric 2-D rings with uniform angles and uniform radial jitter
/// in `[-jitter, jitter]`; labels 0 (inner) and 1 (outer).
pub fn concentric_rings(n_per_ring: usize, radii: (f64, f64), jitter: f64, seed: u64) -> (Matrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_ring);
    let mut labels = Vec::with_capacity(2 * n_per_ring);
    for (label, r) in [(0, radii.0), (1, radii.1)] {
        for _ in 0..n_per_ring {
            let theta = rng.random_range(0.0..2.0 * PI);
            let rr = r + if jitter > 0.0 {
                rng.random_range(-jitter..=jitter)
            } else {
                0.0
            };
            rows.push([rr * theta.cos(), rr * theta.sin()]);
            labels.push(label);
        }
    }
    (Matrix::from_rows(&rows).expect("rectangular"), labels)
}
