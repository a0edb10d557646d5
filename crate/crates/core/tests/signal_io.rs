use std::io::Cursor;

use impact_sounding::signal_io::{
    grid_dims, load_manifest, parse_wav, to_pcm16, write_manifest, write_wav, ManifestOptions, ManifestRow, Position,
};
use impact_sounding::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hound_wav(samples: &[i16], channels: u16, rate: u32) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
    buf.into_inner()
}

/// Inserts a `LIST` chunk right before the `data` chunk and patches the RIFF size.
fn with_list_chunk(wav: &[u8]) -> Vec<u8> {
    let data_at = wav.windows(4).rposition(|w| w == b"data").unwrap();
    let payload = b"INFOISFT\x06\x00\x00\x00tests\x00";
    let mut out = wav[..data_at].to_vec();
    out.extend_from_slice(b"LIST");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&wav[data_at..]);
    let riff = (out.len() - 8) as u32;
    out[4..8].copy_from_slice(&riff.to_le_bytes());
    out
}

fn random_i16(rng: &mut ChaCha8Rng, n: usize) -> Vec<i16> {
    (0..n).map(|_| rng.random()).collect()
}

#[test]
fn reference_writer_samples_scale_by_two_to_the_fifteen() {
    let bytes = hound_wav(&[0, 16384, -32768], 1, 44100);
    let pcm = parse_wav::<f64>(&bytes).unwrap();
    assert_eq!(pcm.samples, vec![0.0, 0.5, -1.0]);
    assert_eq!(pcm.sample_rate_hz, 44100.0);
}

#[test]
fn list_chunk_before_data_is_skipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ints = random_i16(&mut rng, 1001);
    let plain = hound_wav(&ints, 1, 44100);
    let listed = with_list_chunk(&plain);
    assert_ne!(plain, listed);
    // The reference reader agrees the modified file is valid.
    let reread: Vec<i16> = hound::WavReader::new(Cursor::new(&listed))
        .unwrap()
        .samples::<i16>()
        .map(Result::unwrap)
        .collect();
    assert_eq!(reread, ints);
    let a = parse_wav::<f64>(&plain).unwrap();
    let b = parse_wav::<f64>(&listed).unwrap();
    assert_eq!(a, b);
    let back: Vec<i16> = b.samples.iter().map(|&s| to_pcm16(s)).collect();
    assert_eq!(back, ints);
}

#[test]
fn stereo_takes_first_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let interleaved = random_i16(&mut rng, 200);
    let pcm = parse_wav::<f64>(&hound_wav(&interleaved, 2, 22050)).unwrap();
    let left: Vec<f64> = interleaved.iter().step_by(2).map(|&s| s as f64 / 32768.0).collect();
    assert_eq!(pcm.samples, left);
    assert_eq!(pcm.channels, 2);
}

#[test]
fn written_files_read_back_with_reference_reader() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for len in [1, 2, 17, 4096] {
        let ints = random_i16(&mut rng, len);
        let samples: Vec<f64> = ints.iter().map(|&s| s as f64 / 32768.0).collect();
        let bytes = write_wav(&samples, 44100);
        let mut r = hound::WavReader::new(Cursor::new(bytes)).unwrap();
        assert_eq!(r.spec().sample_rate, 44100);
        assert_eq!(r.spec().bits_per_sample, 16);
        let got: Vec<i16> = r.samples::<i16>().map(Result::unwrap).collect();
        assert_eq!(got, ints);
    }
}

#[test]
fn zero_length_data_is_rejected() {
    let bytes = hound_wav(&[], 1, 44100);
    assert!(matches!(parse_wav::<f64>(&bytes), Err(Error::EmptySamples)));
}

fn lattice_rows(nx: usize, ny: usize, spacing: f64) -> Vec<ManifestRow> {
    let mut rows = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            rows.push(ManifestRow {
                id: format!("r{i}_{j}"),
                position: Position::new(spacing * i as f64, spacing * j as f64),
                wav_path: format!("{i}_{j}.wav"),
            });
        }
    }
    rows
}

fn load(rows: &[ManifestRow], opts: &ManifestOptions) -> impact_sounding::Result<impact_sounding::Dataset> {
    let tiny = hound_wav(&[100, -100, 50], 1, 44100);
    let text = write_manifest(rows).unwrap();
    load_manifest(text.as_bytes(), |_| Ok(tiny.clone()), opts)
}

#[test]
fn survey_extent_gives_82_by_11() {
    let rows = lattice_rows(82, 11, 2.0);
    let ds = load(&rows, &ManifestOptions::default()).unwrap();
    assert_eq!(ds.len(), 902);
    assert_eq!(grid_dims(&ds), (82, 11));
    assert_eq!(ds.spacing_cm(), 2.0);
    let last = ds.positions().into_iter().fold(Position::new(0.0, 0.0), |m, p| {
        Position::new(m.x_cm.max(p.x_cm), m.y_cm.max(p.y_cm))
    });
    assert_eq!((last.x_cm, last.y_cm), (162.0, 20.0));
}

#[test]
fn grid_is_invariant_under_row_permutation() {
    let rows = lattice_rows(9, 5, 2.0);
    let base = load(&rows, &ManifestOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let ds = load(&shuffled, &ManifestOptions::default()).unwrap();
        assert_eq!(grid_dims(&ds), grid_dims(&base));
        assert_eq!(ds.origin(), base.origin());
        assert_eq!(ds.ids(), shuffled.iter().map(|r| r.id.clone()).collect::<Vec<_>>());
        for r in &shuffled {
            assert_eq!(ds.lattice_index(r.position), base.lattice_index(r.position));
        }
    }
}

#[test]
fn missing_centre_keeps_three_by_three() {
    let mut rows = lattice_rows(3, 3, 2.0);
    rows.remove(4);
    let ds = load(&rows, &ManifestOptions::default()).unwrap();
    assert_eq!(ds.len(), 8);
    assert_eq!(grid_dims(&ds), (3, 3));
}

#[test]
fn single_row_uses_default_spacing() {
    let rows = vec![ManifestRow {
        id: "only".into(),
        position: Position::new(0.0, 0.0),
        wav_path: "only.wav".into(),
    }];
    let opts = ManifestOptions {
        spacing_cm: None,
        default_spacing_cm: 5.0,
    };
    let ds = load(&rows, &opts).unwrap();
    assert_eq!(ds.spacing_cm(), 5.0);
    assert_eq!(grid_dims(&ds), (1, 1));
}

#[test]
fn jitter_within_tolerance_is_accepted_and_beyond_rejected() {
    let mut rows = lattice_rows(4, 3, 2.0);
    rows[5].position.x_cm += 0.4;
    let opts = ManifestOptions {
        spacing_cm: Some(2.0),
        ..ManifestOptions::default()
    };
    assert!(load(&rows, &opts).is_ok());
    rows[5].position.x_cm += 0.3;
    match load(&rows, &opts) {
        Err(Error::OffLattice { id, .. }) => assert_eq!(id, rows[5].id),
        other => panic!("expected off-lattice error, got {other:?}"),
    }
}

#[test]
fn duplicate_id_is_rejected() {
    let mut rows = lattice_rows(2, 1, 2.0);
    rows[1].id = rows[0].id.clone();
    assert!(matches!(
        load(&rows, &ManifestOptions::default()),
        Err(Error::DuplicateId(_))
    ));
}
