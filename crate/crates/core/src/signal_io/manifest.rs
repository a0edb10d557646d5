//! Position manifest: `id,x_cm,y_cm,wav_path`, one row per sample point.

use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{Dataset, Position, Recording, DEFAULT_SPACING_CM};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MANIFEST_HEADER: [&str; 4] = ["id", "x_cm", "y_cm", "wav_path"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub position: Position,
    pub wav_path: String,
}

#[derive(Debug, Clone, Copy)]
pub struct ManifestOptions {
    /// Fixed grid spacing; inferred from the positions when `None`.
    pub spacing_cm: Option<f64>,
    pub default_spacing_cm: f64,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            spacing_cm: None,
            default_spacing_cm: DEFAULT_SPACING_CM,
        }
    }
}

fn parse_rows<R: Read>(text: R) -> Result<Vec<ManifestRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(text);
    let header = reader.headers()?.clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(Error::Manifest {
            line: 1,
            reason: format!(
                "header must be `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Manifest {
                line,
                reason: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let coord = |idx: usize| -> Result<f64> {
            let field = &record[idx];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Manifest {
                    line,
                    reason: format!("`{}` is not a decimal number: `{field}`", MANIFEST_HEADER[idx]),
                })
        };
        rows.push(ManifestRow {
            id: record[0].to_string(),
            position: Position::new(coord(1)?, coord(2)?),
            wav_path: record[3].to_string(),
        });
    }
    Ok(rows)
}

/// Reads a manifest and decodes each referenced WAV through `resolve`.
///
/// `resolve` receives the row and returns the file bytes; an I/O error is
/// reported as a missing file for that row. The dataset keeps row order.
pub fn load_manifest<T, R, F>(text: R, mut resolve: F, options: &ManifestOptions) -> Result<Dataset<T>>
where
    T: Scalar,
    R: Read,
    F: FnMut(&ManifestRow) -> std::io::Result<Vec<u8>>,
{
    let rows = parse_rows(text)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut blobs = Vec::with_capacity(rows.len());
    for row in &rows {
        let bytes = resolve(row).map_err(|source| Error::MissingFile {
            id: row.id.clone(),
            path: PathBuf::from(&row.wav_path),
            source,
        })?;
        blobs.push(bytes);
    }
    let recordings = rows
        .par_iter()
        .zip(blobs.par_iter())
        .map(|(row, bytes)| {
            Recording::from_wav(row.id.clone(), bytes, row.position).map_err(|e| e.in_recording(&row.id))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(recordings, options.spacing_cm, options.default_spacing_cm)
}

/// Loads a manifest from disk; relative WAV paths resolve against its directory.
pub fn load_manifest_file<T: Scalar>(path: &Path, options: &ManifestOptions) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening manifest {}", path.display()), e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_manifest(
        std::io::BufReader::new(file),
        |row| std::fs::read(base.join(&row.wav_path)),
        options,
    )
}

/// Serializes manifest rows with the canonical header.
pub fn write_manifest(rows: &[ManifestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            &r.position.x_cm.to_string(),
            &r.position.y_cm.to_string(),
            r.wav_path.as_str(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("flushing manifest", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8 from UTF-8 input"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::write_wav;
    use std::collections::HashMap;

    fn store(ids: &[&str]) -> HashMap<String, Vec<u8>> {
        ids.iter()
            .map(|id| (format!("{id}.wav"), write_wav(&[0.25f64, -0.25, 0.5], 44100)))
            .collect()
    }

    fn load(text: &str, files: &HashMap<String, Vec<u8>>) -> Result<Dataset<f64>> {
        load_manifest(
            text.as_bytes(),
            |row| {
                files
                    .get(&row.wav_path)
                    .cloned()
                    .ok_or_else(|| std::io::Error::from(std::io::ErrorKind::NotFound))
            },
            &ManifestOptions::default(),
        )
    }

    #[test]
    fn survey_geometry_manifest() {
        let mut text = String::from("id,x_cm,y_cm,wav_path\n");
        let mut files = HashMap::new();
        let wav = write_wav(&[0.1f64, 0.2], 44100);
        let mut n = 0;
        for i in 0..82 {
            for j in 0..11 {
                text.push_str(&format!("pt{n},{},{},pt{n}.wav\n", 2 * i, 2 * j));
                files.insert(format!("pt{n}.wav"), wav.clone());
                n += 1;
            }
        }
        let ds = load(&text, &files).unwrap();
        assert_eq!(ds.len(), 902);
        assert_eq!(ds.grid_dims(), (82, 11));
        assert_eq!(ds.recordings()[5].id, "pt5");
    }

    #[test]
    fn single_row_falls_back_to_default_spacing() {
        let ds = load("id,x_cm,y_cm,wav_path\na,0,0,a.wav\n", &store(&["a"])).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.spacing_cm(), DEFAULT_SPACING_CM);
    }

    #[test]
    fn duplicate_id() {
        let text = "id,x_cm,y_cm,wav_path\na,0,0,a.wav\na,2,0,a.wav\n";
        assert!(matches!(load(text, &store(&["a"])), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn missing_file() {
        let text = "id,x_cm,y_cm,wav_path\na,0,0,a.wav\nb,2,0,b.wav\n";
        assert!(matches!(
            load(text, &store(&["a"])),
            Err(Error::MissingFile { id, .. }) if id == "b"
        ));
    }

    #[test]
    fn bad_header_and_number() {
        assert!(matches!(
            load("id,x,y,wav\n", &store(&[])),
            Err(Error::Manifest { line: 1, .. })
        ));
        assert!(matches!(
            load("id,x_cm,y_cm,wav_path\na,1;5,0,a.wav\n", &store(&["a"])),
            Err(Error::Manifest { line: 2, .. })
        ));
    }

    #[test]
    fn empty_manifest() {
        assert!(matches!(
            load("id,x_cm,y_cm,wav_path\n", &store(&[])),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn write_then_parse_rows() {
        let rows = vec![
            ManifestRow {
                id: "a".into(),
                position: Position::new(0.0, 1.5),
                wav_path: "wav/a.wav".into(),
            },
            ManifestRow {
                id: "b".into(),
                position: Position::new(2.0, -0.0),
                wav_path: "wav/b.wav".into(),
            },
        ];
        let text = write_manifest(&rows).unwrap();
        assert!(text.starts_with("id,x_cm,y_cm,wav_path\n"));
        assert_eq!(parse_rows(text.as_bytes()).unwrap(), rows);
    }
}
