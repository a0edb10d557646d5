use impact_sounding::features::{
    build_feature_matrix, compute_spectra, energy, power, spectral_moments, MomentNormalization,
};
use impact_sounding::signal_io::{Position, Recording};
use impact_sounding::spectral::{dft_naive, fft, one_sided_spectrum, Spectrum, SpectrumOptions};
use impact_sounding::synth::{generate, SlabSpec, SurfaceClass};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn reference_fft(samples: &[f64]) -> Vec<Complex<f64>> {
    let n = samples.len().next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

fn max_err(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn fft_agrees_with_independent_fft_library() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(1..=4096);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(max_err(&fft(&x), &reference_fft(&x)) < 1e-9, "n = {n}");
    }
}

#[test]
fn naive_dft_agrees_with_independent_fft_library_on_padded_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [1usize, 2, 3, 8, 100, 512] {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reference = reference_fft(&x);
        x.resize(n.next_power_of_two(), 0.0);
        assert!(max_err(&dft_naive(&x), &reference) < 1e-9, "n = {n}");
    }
}

#[test]
fn energy_matches_parseval_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let n = rng.random_range(2..3000);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spectrum = reference_fft(&x);
        let parseval = spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>() / spectrum.len() as f64;
        let e = energy(&x);
        assert!((e - parseval).abs() <= 1e-6 * e);
    }
}

#[test]
fn sine_peak_lands_on_nearest_bin() {
    let rate = 44100.0;
    let samples: Vec<f64> = (0..4096)
        .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / rate).sin() * 0.5)
        .collect();
    let rec = Recording::new("sine", samples, rate, Position::new(0.0, 0.0)).unwrap();
    let s = one_sided_spectrum(&rec, &SpectrumOptions::default()).unwrap();
    let nearest = (1..=2048)
        .min_by(|&a, &b| {
            let fa = (a as f64 * rate / 4096.0 - 1000.0).abs();
            let fb = (b as f64 * rate / 4096.0 - 1000.0).abs();
            fa.total_cmp(&fb)
        })
        .unwrap();
    let argmax = s.amps().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    // Bins start at k = 1 when DC is excluded.
    assert_eq!(argmax + 1, nearest);
    assert_eq!(nearest, 93);
}

/// Moments by direct summation, written out independently of the library.
fn moments_by_hand(f: &[f64], a: &[f64]) -> [f64; 4] {
    let p: f64 = a.iter().sum();
    let m1 = f.iter().zip(a).map(|(f, a)| a * f).sum::<f64>() / p;
    let c = |r: i32| f.iter().zip(a).map(|(f, a)| a * (f - m1).powi(r)).sum::<f64>();
    let m2 = c(2) / p;
    [m1, m2, c(3) / (p * m2.powi(3)), c(4) / (p * m2.powi(4))]
}

#[test]
fn two_line_example() {
    let s = Spectrum::new(vec![100.0, 200.0, 300.0], vec![1.0, 0.0, 1.0]).unwrap();
    let (m1, m2, m3, m4) = spectral_moments(&s, MomentNormalization::AsPrinted).unwrap();
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    assert!(rel(m1, 200.0) < 1e-12);
    assert!(rel(m2, 10000.0) < 1e-12);
    assert!(m3.abs() < 1e-12);
    assert!(rel(m4, 1e-8) < 1e-12);
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let m = rng.random_range(3..200);
    let step = rng.random_range(1.0..50.0);
    let start = rng.random_range(1.0..500.0);
    let f: Vec<f64> = (0..m).map(|k| start + step * k as f64).collect();
    let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    (f, a)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn moments_match_direct_summation_and_are_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let (f, a) = random_spectrum(&mut rng);
        let s = Spectrum::new(f.clone(), a.clone()).unwrap();
        let got = spectral_moments(&s, MomentNormalization::AsPrinted).unwrap();
        let want = moments_by_hand(&f, &a);
        for (g, w) in [got.0, got.1, got.2, got.3].into_iter().zip(want) {
            assert!(rel_close(g, w, 1e-9), "{g} vs {w}");
        }
        let delta = rng.random_range(1.0..1000.0);
        let shifted = Spectrum::new(f.iter().map(|v| v + delta).collect(), a.clone()).unwrap();
        let sh = spectral_moments(&shifted, MomentNormalization::AsPrinted).unwrap();
        assert!(rel_close(sh.0, got.0 + delta, 1e-9));
        assert!(rel_close(sh.1, got.1, 1e-9));
        assert!(rel_close(sh.2, got.2, 1e-9));
        assert!(rel_close(sh.3, got.3, 1e-9));
    }
}

#[test]
fn scaling_a_recording_scales_energy_and_power_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let n = rng.random_range(16..600);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let alpha = rng.random_range(0.1..1.9);
        let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        let opts = SpectrumOptions::default();
        let r1 = Recording::new("a", x, 8000.0, Position::new(0.0, 0.0)).unwrap();
        let r2 = Recording::new("b", scaled, 8000.0, Position::new(0.0, 0.0)).unwrap();
        let s1 = one_sided_spectrum(&r1, &opts).unwrap();
        let s2 = one_sided_spectrum(&r2, &opts).unwrap();
        assert!(rel_close(
            energy(&r2.samples),
            alpha * alpha * energy(&r1.samples),
            1e-9
        ));
        assert!(rel_close(power(&s2), alpha * power(&s1), 1e-9));
        let m1 = spectral_moments(&s1, MomentNormalization::AsPrinted).unwrap();
        let m2 = spectral_moments(&s2, MomentNormalization::AsPrinted).unwrap();
        for (a, b) in [(m1.0, m2.0), (m1.1, m2.1), (m1.2, m2.2), (m1.3, m2.3)] {
            assert!(rel_close(a, b, 1e-9), "{a} vs {b}");
        }
    }
}

#[test]
fn defects_carry_less_energy_and_power_than_solid() {
    let slab = generate::<f64>(&SlabSpec::survey_geometry()).unwrap();
    let spectra = compute_spectra(&slab.dataset, &SpectrumOptions::default()).unwrap();
    let table = build_feature_matrix(&slab.dataset, &spectra, MomentNormalization::AsPrinted).unwrap();
    assert_eq!((table.nrows(), table.ncols()), (902, 6));
    let mean = |col: usize, class: SurfaceClass| {
        let v: Vec<f64> = (0..table.nrows())
            .filter(|&i| slab.truth[i] == class as usize)
            .map(|i| table.data[(i, col)])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (e, p) = (0, 1);
    assert!(mean(p, SurfaceClass::Void) < mean(p, SurfaceClass::Solid));
    assert!(mean(e, SurfaceClass::Void) < 0.25 * mean(e, SurfaceClass::Solid));
    let pooled = |col| (mean(col, SurfaceClass::Void) * 121.0 + mean(col, SurfaceClass::Delamination) * 29.0) / 150.0;
    assert!(pooled(e) < mean(e, SurfaceClass::Solid));
    assert!(pooled(p) < mean(p, SurfaceClass::Solid));
}

#[test]
fn duplicated_recording_duplicates_its_row() {
    let mut spec = SlabSpec::survey_geometry();
    spec.length_cm = 4.0;
    spec.defects.clear();
    let slab = generate::<f64>(&spec).unwrap();
    let mut recs = slab.dataset.recordings().to_vec();
    let mut copy = recs[0].clone();
    copy.id = "copy".into();
    copy.position = Position::new(6.0, 0.0);
    recs.push(copy);
    let ds = impact_sounding::signal_io::Dataset::new(recs, Some(2.0), 2.0).unwrap();
    let spectra = compute_spectra(&ds, &SpectrumOptions::default()).unwrap();
    let t = build_feature_matrix(&ds, &spectra, MomentNormalization::AsPrinted).unwrap();
    let last = t.nrows() - 1;
    assert_eq!(t.data.row(0), t.data.row(last));
}
