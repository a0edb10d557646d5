use impact_sounding::clustering::{build_input, InputKind};
use impact_sounding::features::{build_feature_matrix, compute_spectra, standardize, MomentNormalization};
use impact_sounding::mapping::{normalize_map, rasterize, write_map_csv, write_pgm, Cells, PointValues};
use impact_sounding::pca::{combine_components, fit_pca, transform};
use impact_sounding::signal_io::{load_manifest_file, ManifestOptions};
use impact_sounding::spectral::SpectrumOptions;
use impact_sounding::synth::{generate, write_slab, SlabSpec, SurfaceClass};
use impact_sounding::{FeatureMatrix, SyntheticSlab};

fn features(slab: &SyntheticSlab) -> FeatureMatrix {
    let spectra = compute_spectra(&slab.dataset, &SpectrumOptions::default()).unwrap();
    build_feature_matrix(&slab.dataset, &spectra, MomentNormalization::AsPrinted).unwrap()
}

fn centroid(rows: &[&[f64]]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn planted_classes_are_well_separated() {
    let slab = generate::<f64>(&SlabSpec::survey_geometry()).unwrap();
    let x = standardize(&features(&slab)).unwrap().matrix;
    let classes = [SurfaceClass::Solid, SurfaceClass::Void, SurfaceClass::Delamination];
    let members: Vec<Vec<&[f64]>> = classes
        .iter()
        .map(|&c| {
            (0..x.nrows())
                .filter(|&i| slab.truth[i] == c as usize)
                .map(|i| x.data.row(i))
                .collect()
        })
        .collect();
    let centroids: Vec<Vec<f64>> = members.iter().map(|m| centroid(m)).collect();
    // Root-mean-square distance of members to their own centroid.
    let spread = members
        .iter()
        .zip(&centroids)
        .map(|(m, c)| (m.iter().map(|r| dist(r, c).powi(2)).sum::<f64>() / m.len() as f64).sqrt())
        .fold(0.0, f64::max);
    for a in 0..3 {
        for b in 0..a {
            let gap = dist(&centroids[a], &centroids[b]);
            assert!(gap > 3.0 * spread, "classes {a}/{b}: gap {gap}, spread {spread}");
        }
    }
}

#[test]
fn written_slab_reloads_identically() {
    let mut spec = SlabSpec::survey_geometry();
    spec.length_cm = 60.0;
    spec.defects.truncate(1);
    let slab = generate::<f64>(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_slab(&slab, dir.path()).unwrap();
    let loaded = load_manifest_file::<f64>(&dir.path().join("manifest.csv"), &ManifestOptions::default()).unwrap();
    assert_eq!(loaded.recordings(), slab.dataset.recordings());
    assert_eq!(loaded.grid_dims(), (31, 11));
    let again = generate::<f64>(&spec).unwrap();
    assert_eq!(again.dataset.recordings(), slab.dataset.recordings());
    assert_eq!(again.truth, slab.truth);
}

#[test]
fn noiseless_defect_free_slab_has_identical_rows() {
    let mut spec = SlabSpec::survey_geometry();
    spec.length_cm = 10.0;
    spec.defects.clear();
    spec.noise_rms = 0.0;
    let slab = generate::<f64>(&spec).unwrap();
    assert!(slab.truth.iter().all(|&t| t == 0));
    let t = features(&slab);
    for i in 1..t.nrows() {
        assert_eq!(t.data.row(i), t.data.row(0));
    }
}

#[test]
fn maps_cover_the_survey_grid() {
    let slab = generate::<f64>(&SlabSpec::survey_geometry()).unwrap();
    let t = features(&slab);
    let e = rasterize(&slab.dataset, PointValues::Scalar(&t.data.column(0))).unwrap();
    assert_eq!((e.geometry.nx, e.geometry.ny), (82, 11));
    assert_eq!(e.sampled_cells(), 902);
    let csv = write_map_csv(&e);
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.lines().all(|l| l.split(',').count() == 83));

    let normalized = normalize_map(&e, 1.0).unwrap();
    let pgm = write_pgm(&normalized);
    let img = image::load_from_memory_with_format(&pgm, image::ImageFormat::Pnm)
        .unwrap()
        .into_luma8();
    assert_eq!(img.dimensions(), (82, 11));
    let Cells::Scalar(values) = &normalized.cells else {
        unreachable!()
    };
    for j in 0..11u32 {
        for i in 0..82u32 {
            let v = values[normalized.index(i as usize, j as usize)];
            let px = img.get_pixel(i, j).0[0] as f64 / 255.0;
            assert!((px - v).abs() <= 1.0 / 255.0);
        }
    }
    let labels = rasterize(&slab.dataset, PointValues::<f64>::Labels(&slab.truth)).unwrap();
    let img = image::load_from_memory_with_format(&write_pgm(&labels), image::ImageFormat::Pnm)
        .unwrap()
        .into_luma8();
    let mut levels: Vec<u8> = img.pixels().map(|p| p.0[0]).collect();
    levels.sort_unstable();
    levels.dedup();
    assert_eq!(levels, vec![0, 128, 255]);
}

#[test]
fn combined_component_map_separates_defects() {
    let slab = generate::<f64>(&SlabSpec::survey_geometry()).unwrap();
    let x = standardize(&features(&slab)).unwrap().matrix;
    let scores = transform(&fit_pca(&x, 3).unwrap(), &x).unwrap();
    let combined = combine_components(&scores.data).unwrap();
    let via_input = build_input(&features(&slab), InputKind::Pca3).unwrap();
    assert_eq!(via_input.data, scores.data);
    for (i, r) in scores.data.rows_iter().enumerate() {
        assert_eq!(combined[i], r[0] + r[1] + r[2]);
    }
    let class_stats = |class: SurfaceClass| {
        let v: Vec<f64> = (0..combined.len())
            .filter(|&i| slab.truth[i] == class as usize)
            .map(|i| combined[i])
            .collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64)
    };
    let (ms, vs) = class_stats(SurfaceClass::Solid);
    for class in [SurfaceClass::Void, SurfaceClass::Delamination] {
        let (md, vd) = class_stats(class);
        let pooled = ((vs + vd) / 2.0).sqrt();
        assert!(
            (ms - md).abs() > 2.0 * pooled,
            "{class:?}: means {ms} {md}, pooled std {pooled}"
        );
    }
}
