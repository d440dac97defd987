//! Augmentation transforms and positive-pair construction.
//!
//! Every transform maps a length-`n` series to a length-`n` series, except
//! [`neighbor_pair`] which halves. Randomness comes only from the `rng`
//! argument.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dft, idft, resample_linear, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AugmentationKind {
    Jitter { sigma: f64 },
    Scale { lo: f64, hi: f64, per_step: bool },
    Flip,
    Permute { num_segments: usize },
    Resize { crop_fraction: f64 },
    TimeMask { mask_fraction: f64 },
    FreqMask { mask_fraction: f64 },
    TimeNeighbor,
}

impl AugmentationKind {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, f: f64| {
            if f > 0.0 && f < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")))
            }
        };
        match *self {
            AugmentationKind::Jitter { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Config(format!("jitter sigma must be positive, got {sigma}")))
            }
            AugmentationKind::Scale { lo, hi, .. } if !(lo > 0.0 && lo <= hi && hi.is_finite()) => {
                Err(Error::Config(format!("scale range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")))
            }
            AugmentationKind::Permute { num_segments } if num_segments < 1 => {
                Err(Error::Config("permute needs at least one segment".into()))
            }
            AugmentationKind::Resize { crop_fraction } => check_crop_fraction(crop_fraction),
            AugmentationKind::TimeMask { mask_fraction } => frac("mask_fraction", mask_fraction),
            AugmentationKind::FreqMask { mask_fraction } => frac("mask_fraction", mask_fraction),
            _ => Ok(()),
        }
    }

    /// Applies the transform to `x`.
    ///
    /// `TimeNeighbor` has no single-series form; here it returns the second
    /// half of `x` resampled to `x.len()`. Use [`make_pair_with_neighbor`]
    /// when the true continuation is available.
    pub fn apply<R: Rng>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        match *self {
            AugmentationKind::Jitter { sigma } => Ok(jitter(x, sigma, rng)),
            AugmentationKind::Scale { lo, hi, per_step } => Ok(if per_step {
                scale_per_step(x, lo, hi, rng)
            } else {
                scale(x, lo, hi, rng)
            }),
            AugmentationKind::Flip => Ok(flip(x)),
            AugmentationKind::Permute { num_segments } => permute(x, num_segments, rng),
            AugmentationKind::Resize { crop_fraction } => resize(x, crop_fraction, rng),
            AugmentationKind::TimeMask { mask_fraction } => Ok(time_mask(x, mask_fraction, rng)),
            AugmentationKind::FreqMask { mask_fraction } => freq_mask(x, mask_fraction, rng),
            AugmentationKind::TimeNeighbor => {
                let (_, b) = neighbor_pair(x)?;
                resample_linear(&b, x.len())
            }
        }
    }
}

/// An augmentation plus the seed of its stream, as stored in experiment
/// manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    #[serde(flatten)]
    pub kind: AugmentationKind,
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.kind.apply(x, &mut ChaCha8Rng::seed_from_u64(self.seed))
    }
}

/// The eight augmentations plus the no-pretraining baseline, under the names
/// used in rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Resizing,
    Jittering,
    TimeMasking,
    Flipping,
    TimeNeighboring,
    Permutation,
    Scaling,
    FreqMasking,
    NoPretrain,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Resizing,
        Method::Jittering,
        Method::TimeMasking,
        Method::Flipping,
        Method::TimeNeighboring,
        Method::Permutation,
        Method::Scaling,
        Method::FreqMasking,
        Method::NoPretrain,
    ];

    pub const AUGMENTATIONS: [Method; 8] = [
        Method::Resizing,
        Method::Jittering,
        Method::TimeMasking,
        Method::Flipping,
        Method::TimeNeighboring,
        Method::Permutation,
        Method::Scaling,
        Method::FreqMasking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Resizing => "resizing",
            Method::Jittering => "jittering",
            Method::TimeMasking => "time_masking",
            Method::Flipping => "flipping",
            Method::TimeNeighboring => "time_neighboring",
            Method::Permutation => "permutation",
            Method::Scaling => "scaling",
            Method::FreqMasking => "freq_masking",
            Method::NoPretrain => "no_pretrain",
        }
    }

    /// Default transform for the method; `None` for the baseline.
    pub fn default_kind(self) -> Option<AugmentationKind> {
        Some(match self {
            Method::Resizing => AugmentationKind::Resize { crop_fraction: 0.5 },
            Method::Jittering => AugmentationKind::Jitter { sigma: 0.1 },
            Method::TimeMasking => AugmentationKind::TimeMask { mask_fraction: 0.2 },
            Method::Flipping => AugmentationKind::Flip,
            Method::TimeNeighboring => AugmentationKind::TimeNeighbor,
            Method::Permutation => AugmentationKind::Permute { num_segments: 4 },
            Method::Scaling => AugmentationKind::Scale {
                lo: 0.5,
                hi: 1.5,
                per_step: false,
            },
            Method::FreqMasking => AugmentationKind::FreqMask { mask_fraction: 0.2 },
            Method::NoPretrain => return None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "resizing" | "resize" => Method::Resizing,
            "jittering" | "jitter" => Method::Jittering,
            "timemasking" | "timemask" => Method::TimeMasking,
            "flipping" | "flip" => Method::Flipping,
            "timeneighboring" | "timeneighbor" | "neighbor" => Method::TimeNeighboring,
            "permutation" | "permute" => Method::Permutation,
            "scaling" | "scale" => Method::Scaling,
            "freqmasking" | "freqmask" | "frequencymasking" => Method::FreqMasking,
            "nopretrain" | "nopretraining" | "none" => Method::NoPretrain,
            _ => return Err(Error::Config(format!("unknown augmentation method {s:?}"))),
        })
    }
}

/// `x + eps`, `eps ~ N(0, sigma^2)` iid.
pub fn jitter<R: Rng>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma validated positive");
    x.iter().map(|v| v + normal.sample(rng)).collect()
}

/// One factor `s ~ U[lo, hi]` for the whole series.
pub fn scale<R: Rng>(x: &[f64], lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let s = lo + (hi - lo) * rng.random::<f64>();
    x.iter().map(|v| v * s).collect()
}

/// An independent factor `s_i ~ U[lo, hi]` per time step.
pub fn scale_per_step<R: Rng>(x: &[f64], lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    x.iter().map(|v| v * (lo + (hi - lo) * rng.random::<f64>())).collect()
}

pub fn flip(x: &[f64]) -> Vec<f64> {
    x.iter().rev().copied().collect()
}

/// Boundaries of `k` contiguous chunks over `n` points; the first `n % k`
/// chunks are one longer.
pub fn segment_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let seg = (start, start + len);
            start += len;
            seg
        })
        .collect()
}

/// Splits `x` into `num_segments` chunks and concatenates them in shuffled
/// order.
pub fn permute<R: Rng>(x: &[f64], num_segments: usize, rng: &mut R) -> Result<Vec<f64>> {
    if num_segments == 0 || num_segments > x.len() {
        return Err(Error::Config(format!(
            "cannot split {} points into {num_segments} segments",
            x.len()
        )));
    }
    let mut segs = segment_bounds(x.len(), num_segments);
    segs.shuffle(rng);
    Ok(segs.iter().flat_map(|&(a, b)| x[a..b].iter().copied()).collect())
}

/// Crops a random window of `floor(crop_fraction * n)` points and stretches
/// it back to `n`. `crop_fraction` lies in `(0, 1]`; 1 is the identity.
pub fn resize<R: Rng>(x: &[f64], crop_fraction: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_crop_fraction(crop_fraction)?;
    let n = x.len();
    let w = (crop_fraction * n as f64).floor() as usize;
    if w < 2 {
        return Err(Error::Config(format!(
            "crop window floor({crop_fraction} * {n}) = {w} is shorter than 2"
        )));
    }
    let start = rng.random_range(0..=n - w);
    resample_linear(&x[start..start + w], n)
}

fn check_crop_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("crop_fraction must lie in (0, 1], got {f}")))
    }
}

/// Zeroes a random contiguous window of `ceil(mask_fraction * n)` points.
pub fn time_mask<R: Rng>(x: &[f64], mask_fraction: f64, rng: &mut R) -> Vec<f64> {
    let n = x.len();
    let mut out = x.to_vec();
    if n == 0 {
        return out;
    }
    let w = ((mask_fraction * n as f64).ceil() as usize).clamp(1, n);
    let start = rng.random_range(0..=n - w);
    out[start..start + w].iter_mut().for_each(|v| *v = 0.0);
    out
}

/// Non-DC frequency bins `1..=n/2` that can be masked.
pub fn maskable_bins(n: usize) -> usize {
    n / 2
}

/// Zeroes `ceil(mask_fraction * n/2)` randomly chosen bins from `1..=n/2`
/// together with their conjugate partners.
pub fn freq_mask<R: Rng>(x: &[f64], mask_fraction: f64, rng: &mut R) -> Result<Vec<f64>> {
    let m = maskable_bins(x.len());
    if m == 0 {
        return Ok(x.to_vec());
    }
    let count = ((mask_fraction * m as f64).ceil() as usize).min(m);
    let bins: Vec<usize> = rand::seq::index::sample(rng, m, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    mask_bins(x, &bins)
}

/// Zeroes the listed bins (each in `1..=n/2`) and their partners `n - k`.
pub fn mask_bins(x: &[f64], bins: &[usize]) -> Result<Vec<f64>> {
    let n = x.len();
    let mut spec: Spectrum = dft(x)?;
    for &k in bins {
        if k == 0 || k > n / 2 {
            return Err(Error::Config(format!("bin {k} outside 1..={}", n / 2)));
        }
        spec[k] = Default::default();
        spec[n - k] = Default::default();
    }
    idft(&spec)
}

/// First and second half of `long`. An odd trailing element is dropped.
pub fn neighbor_pair(long: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if long.len() < 4 {
        return Err(Error::Shape(format!(
            "time-neighbour pair needs at least 4 points, got {}",
            long.len()
        )));
    }
    let h = long.len() / 2;
    Ok((long[..h].to_vec(), long[h..2 * h].to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// `(x, aug(x))`
    SingleView,
    /// `(aug1(x), aug2(x))` with independent streams.
    DoubleView,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastivePair {
    pub view_a: Vec<f64>,
    pub view_b: Vec<f64>,
    pub mode: ViewMode,
}

pub fn make_pair<R: Rng>(
    x: &[f64],
    mode: ViewMode,
    aug1: &AugmentationKind,
    aug2: Option<&AugmentationKind>,
    rng: &mut R,
) -> Result<ContrastivePair> {
    make_pair_with_neighbor(x, None, mode, aug1, aug2, rng)
}

/// As [`make_pair`], with the true continuation of `x` for time-wise
/// neighbouring.
///
/// With a neighbour, `TimeNeighbor` yields `neighbor` as the augmented view.
/// Without one, the two halves of `x`, each resampled to `x.len()`, form
/// the pair regardless of `mode`.
pub fn make_pair_with_neighbor<R: Rng>(
    x: &[f64],
    neighbor: Option<&[f64]>,
    mode: ViewMode,
    aug1: &AugmentationKind,
    aug2: Option<&AugmentationKind>,
    rng: &mut R,
) -> Result<ContrastivePair> {
    if mode == ViewMode::DoubleView && aug2.is_none() {
        return Err(Error::Config("double-view pairs need a second augmentation".into()));
    }
    if let Some(nb) = neighbor {
        if nb.len() != x.len() {
            return Err(Error::Shape(format!(
                "neighbour has length {} but the sample has {}",
                nb.len(),
                x.len()
            )));
        }
    }
    if *aug1 == AugmentationKind::TimeNeighbor && neighbor.is_none() {
        let (a, b) = neighbor_pair(x)?;
        return Ok(ContrastivePair {
            view_a: resample_linear(&a, x.len())?,
            view_b: resample_linear(&b, x.len())?,
            mode,
        });
    }
    let apply = |aug: &AugmentationKind, rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        match (aug, neighbor) {
            (AugmentationKind::TimeNeighbor, Some(nb)) => Ok(nb.to_vec()),
            _ => aug.apply(x, rng),
        }
    };
    // Separate sub-streams keep the two views independent.
    let mut rng_a = ChaCha8Rng::seed_from_u64(rng.random());
    let mut rng_b = ChaCha8Rng::seed_from_u64(rng.random());
    let (view_a, view_b) = match mode {
        ViewMode::SingleView => (x.to_vec(), apply(aug1, &mut rng_a)?),
        ViewMode::DoubleView => (
            apply(aug1, &mut rng_a)?,
            apply(aug2.expect("checked above"), &mut rng_b)?,
        ),
    };
    Ok(ContrastivePair { view_a, view_b, mode })
}
