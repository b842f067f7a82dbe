//! Intensity histograms and Yen's maximum-correlation threshold.

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u64; 256],
    pub total: u64,
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self {
            total: counts.iter().sum(),
            counts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdResult {
    /// Last bin of the background class.
    pub t: u8,
    /// Value of the correlation criterion at `t`.
    pub criterion: f64,
}

/// Histogram of `img` restricted to pixels set in `region`.
pub fn histogram256(img: &GrayImage, region: &BinaryMask) -> Result<Histogram256> {
    if img.width() != region.width() || img.height() != region.height() {
        return Err(Error::DimensionMismatch(
            img.width(),
            img.height(),
            region.width(),
            region.height(),
        ));
    }
    let mut counts = [0u64; 256];
    for (&v, &inside) in img.data().iter().zip(region.bits()) {
        if inside {
            counts[v as usize] += 1;
        }
    }
    let h = Histogram256::from_counts(counts);
    if h.total == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(h)
}

/// Yen's threshold.
///
/// With `P1(t)` the background mass and `G1(t)`, `G2(t)` the sums of squared
/// bin probabilities on each side, picks the `t` maximizing
/// `-ln(G1 G2) + 2 ln(P1 (1 - P1))`, ties going to the smallest `t`.
///
/// Sums are kept as exact integer prefix sums. Writing the criterion in
/// raw counts, the `ln N` terms from normalization cancel, so it equals
/// `2 ln(C (N - C)) - ln(S1) - ln(S2)` with `C` the background count and
/// `S1`, `S2` the per-side sums of squared counts.
pub fn yen_threshold(h: &Histogram256) -> Result<ThresholdResult> {
    let occupied = h.counts.iter().filter(|&&c| c > 0).count();
    if occupied < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let n = h.total;
    let sq_total: u128 = h.counts.iter().map(|&c| c as u128 * c as u128).sum();

    let mut mass = 0u64;
    let mut sq_low = 0u128;
    let mut best: Option<ThresholdResult> = None;
    for t in 0..255usize {
        let c = h.counts[t];
        mass += c;
        sq_low += c as u128 * c as u128;
        let sq_high = sq_total - sq_low;
        if mass == 0 || mass == n || sq_low == 0 || sq_high == 0 {
            continue;
        }
        let crit = -((sq_low as f64).ln() + (sq_high as f64).ln())
            + 2.0 * ((mass as f64).ln() + ((n - mass) as f64).ln());
        if best.is_none_or(|b| crit > b.criterion) {
            best = Some(ThresholdResult {
                t: t as u8,
                criterion: crit,
            });
        }
    }
    best.ok_or(Error::DegenerateHistogram)
}

/// Pixels of `region` strictly brighter than `t`.
pub fn binarize_above(img: &GrayImage, region: &BinaryMask, t: u8) -> Result<BinaryMask> {
    if img.width() != region.width() || img.height() != region.height() {
        return Err(Error::DimensionMismatch(
            img.width(),
            img.height(),
            region.width(),
            region.height(),
        ));
    }
    let bits = img
        .data()
        .iter()
        .zip(region.bits())
        .map(|(&v, &inside)| inside && v > t)
        .collect();
    BinaryMask::from_bits(img.width(), img.height(), bits)
}
