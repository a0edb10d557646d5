//! One-sided amplitude spectra via a radix-2 FFT, with a direct DFT kept as
//! the reference.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::Recording;

/// Frequency/amplitude pairs `{f_k, a_k}` of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    freqs_hz: Vec<T>,
    amps: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// Checks: equal non-zero lengths, strictly increasing frequencies,
    /// non-negative amplitudes.
    pub fn new(freqs_hz: Vec<T>, amps: Vec<T>) -> Result<Self> {
        if freqs_hz.len() != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: freqs_hz.len(),
                found: amps.len(),
            });
        }
        if freqs_hz.is_empty() {
            return Err(Error::InvalidArgument("spectrum has no bins".into()));
        }
        if freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "spectrum frequencies must be strictly increasing".into(),
            ));
        }
        if amps.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "spectrum amplitudes must be finite and non-negative".into(),
            ));
        }
        Ok(Spectrum { freqs_hz, amps })
    }

    pub fn freqs_hz(&self) -> &[T] {
        &self.freqs_hz
    }

    pub fn amps(&self) -> &[T] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Debug dump as `freq_hz,amp` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,amp\n");
        for (f, a) in self.freqs_hz.iter().zip(&self.amps) {
            s.push_str(&format!("{f:?},{a:?}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub include_dc: bool,
    /// Inclusive `(fmin_hz, fmax_hz)` band to keep.
    pub band: Option<(f64, f64)>,
    pub window: Window,
}

/// Direct evaluation of `S_k = sum_n x(n) exp(-i 2 pi k n / N)`.
///
/// O(N^2); exists to check [`fft`].
pub fn dft_naive<T: Scalar>(samples: &[T]) -> Vec<Complex<T>> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let twiddles = twiddle_table::<T>(n);
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, &x) in samples.iter().enumerate() {
                // k*j mod n keeps the phase exact.
                acc = acc + twiddles[(k * j) % n] * x;
            }
            acc
        })
        .collect()
}

/// `exp(-i 2 pi m / n)` for m in 0..n, each evaluated from its exact angle.
fn twiddle_table<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    (0..n)
        .map(|m| {
            let theta = -2.0 * PI * (m as f64) / (n as f64);
            Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
        })
        .collect()
}

/// Zero-pads `samples` to the next power of two and transforms it.
pub fn fft<T: Scalar>(samples: &[T]) -> Vec<Complex<T>> {
    if samples.is_empty() {
        return Vec::new();
    }
    let n = samples.len().next_power_of_two();
    let mut buf: Vec<Complex<T>> = samples
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(n)
        .collect();
    fft_in_place(&mut buf);
    buf
}

/// Iterative decimation-in-time radix-2 FFT. `buf.len()` must be a power of two.
pub fn fft_in_place<T: Scalar>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let twiddles = twiddle_table::<T>(n);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let u = buf[start + k];
                let v = buf[start + k + half] * w;
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

fn hann<T: Scalar>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Amplitude spectrum `a_k = |S_k|` at `f_k = k * rate / N'` for
/// `k = (include_dc ? 0 : 1) ..= N'/2`, N' the padded length.
pub fn one_sided_spectrum<T: Scalar>(recording: &Recording<T>, options: &SpectrumOptions) -> Result<Spectrum<T>> {
    let windowed;
    let samples: &[T] = match options.window {
        Window::None => &recording.samples,
        Window::Hann => {
            windowed = recording
                .samples
                .iter()
                .zip(hann::<T>(recording.samples.len()))
                .map(|(&x, w)| x * w)
                .collect::<Vec<_>>();
            &windowed
        }
    };
    let bins = fft(samples);
    let padded = bins.len();
    let rate = recording.sample_rate_hz;
    let first = usize::from(!options.include_dc);
    let (fmin, fmax) = options.band.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));

    let mut freqs = Vec::new();
    let mut amps = Vec::new();
    for (k, bin) in bins.iter().enumerate().take(padded / 2 + 1).skip(first) {
        let f = k as f64 * rate / padded as f64;
        if f < fmin || f > fmax {
            continue;
        }
        freqs.push(T::lit(f));
        amps.push(bin.norm());
    }
    if amps.is_empty() {
        return Err(Error::EmptyBand {
            fmin_hz: fmin,
            fmax_hz: fmax,
        });
    }
    Spectrum::new(freqs, amps)
}
