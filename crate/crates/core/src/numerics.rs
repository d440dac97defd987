//! Numeric kernels shared by the rest of the crate: cosine similarity, mean
//! power, the discrete Fourier transform, loess smoothing and linear
//! resampling.
//!
//! Everything here is a pure function over slices.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Frequency-domain representation of a real series; `bins.len()` equals the
/// source length.
pub type Spectrum = Vec<Complex64>;

/// Cosine of the angle between `a` and `b`.
///
/// A zero-norm argument is an error rather than a silent zero: callers feed
/// the result into ratios.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine similarity of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("cosine similarity of empty vectors".into()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector(
            "cosine similarity with an all-zero vector".into(),
        ));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// `(1/N) * sum(x_i^2)`.
pub fn mean_power(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Shape("power of an empty series".into()));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Forward DFT, unnormalised: `X_k = sum_n x_n e^{-2 pi i k n / N}`.
pub fn dft(x: &[f64]) -> Result<Spectrum> {
    if x.is_empty() {
        return Err(Error::Shape("DFT of an empty series".into()));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    Ok(buf)
}

/// Inverse DFT with the `1/N` factor, returning the complex result.
pub fn idft_complex(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    if spectrum.is_empty() {
        return Err(Error::Shape("inverse DFT of an empty spectrum".into()));
    }
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(buf)
}

/// Inverse DFT keeping the real part. For the spectrum of a real series the
/// discarded imaginary part is round-off only.
pub fn idft(spectrum: &[Complex64]) -> Result<Vec<f64>> {
    Ok(idft_complex(spectrum)?.into_iter().map(|c| c.re).collect())
}

/// Local polynomial regression on the implicit grid `0, 1, ..., n-1`.
///
/// `window` is the number of nearest neighbours that receive tricube
/// weight; when it exceeds `n` the bandwidth is stretched past the data the
/// way Cleveland's loess does.
#[derive(Debug, Clone, Copy)]
pub struct Loess {
    pub window: usize,
    pub degree: usize,
}

impl Loess {
    pub fn new(window: usize, degree: usize) -> Result<Self> {
        if degree > 2 {
            return Err(Error::Config(format!("loess degree {degree} not in 0..=2")));
        }
        if window < degree + 1 {
            return Err(Error::Config(format!(
                "loess window of {window} points cannot fit degree {degree}"
            )));
        }
        Ok(Self { window, degree })
    }

    /// Fitted value at `x0` (which may lie outside the grid).
    pub fn fit_at(&self, ys: &[f64], x0: f64) -> f64 {
        let n = ys.len();
        debug_assert!(n > 0);
        let q = self.window.min(n);
        let last_start = (n - q) as f64;
        let lo = (x0 - (q as f64 - 1.0) / 2.0).ceil().clamp(0.0, last_start) as usize;
        let hi = lo + q - 1;
        let mut h = (x0 - lo as f64).abs().max((hi as f64 - x0).abs());
        if self.window > n {
            h += (self.window - n) as f64 / 2.0;
        }
        // Half a grid step past the farthest neighbour keeps it weighted.
        let h = h + 0.5;

        let mut moments = [0.0f64; 5];
        let mut rhs = [0.0f64; 3];
        for (i, &y) in ys.iter().enumerate().take(hi + 1).skip(lo) {
            let z = (i as f64 - x0) / h;
            let r = z.abs();
            if r >= 1.0 {
                continue;
            }
            let w = (1.0 - r * r * r).powi(3);
            let mut zp = w;
            for m in moments.iter_mut() {
                *m += zp;
                zp *= z;
            }
            rhs[0] += w * y;
            rhs[1] += w * z * y;
            rhs[2] += w * z * z * y;
        }
        let mut degree = self.degree;
        loop {
            if let Some(c) = solve_normal(&moments, &rhs, degree) {
                return c;
            }
            if degree == 0 {
                // All weights vanished; fall back to the nearest observation.
                return ys[x0.round().clamp(0.0, (n - 1) as f64) as usize];
            }
            degree -= 1;
        }
    }

    pub fn smooth(&self, ys: &[f64]) -> Vec<f64> {
        (0..ys.len()).map(|i| self.fit_at(ys, i as f64)).collect()
    }
}

/// Solves the (degree+1)^2 weighted normal equations and returns the
/// intercept, or `None` when the system is numerically singular.
fn solve_normal(moments: &[f64; 5], rhs: &[f64; 3], degree: usize) -> Option<f64> {
    let k = degree + 1;
    let mut a = [[0.0f64; 4]; 3];
    for r in 0..k {
        a[r][..k].copy_from_slice(&moments[r..r + k]);
        a[r][k] = rhs[r];
    }
    let scale = moments[0].abs().max(f64::MIN_POSITIVE);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some(a[0][k] / a[0][0])
}

/// Loess smoother with the window expressed as a fraction of the series
/// length.
pub fn loess_smooth(x: &[f64], span: f64, degree: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Shape("loess of an empty series".into()));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::Config(format!("loess span {span} not in (0, 1]")));
    }
    let window = (span * x.len() as f64).floor() as usize;
    Ok(Loess::new(window, degree)?.smooth(x))
}

/// Linear interpolation of `x` onto a uniform grid of `new_len` points with
/// both endpoints kept.
pub fn resample_linear(x: &[f64], new_len: usize) -> Result<Vec<f64>> {
    if x.len() < 2 || new_len < 2 {
        return Err(Error::Shape(format!(
            "linear resampling needs at least 2 points (from {} to {new_len})",
            x.len()
        )));
    }
    let n = x.len();
    let denom = (new_len - 1) as f64;
    Ok((0..new_len)
        .map(|i| {
            let pos = (i * (n - 1)) as f64 / denom;
            let idx = (pos.floor() as usize).min(n - 2);
            let frac = pos - idx as f64;
            if frac == 0.0 {
                x[idx]
            } else if frac == 1.0 {
                x[idx + 1]
            } else {
                x[idx] + frac * (x[idx + 1] - x[idx])
            }
        })
        .collect())
}
