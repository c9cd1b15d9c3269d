use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::{EventList, EventRecord};
use crate::seed::{self, Stream};

/// Uniform bins along one separation axis: `count` bins of `width` starting
/// at `start`. Separations are absolute coordinate differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub start: f64,
    pub width: f64,
    pub count: usize,
}

impl BinSpec {
    pub fn new(start: f64, width: f64, count: usize) -> Result<Self> {
        if !(width > 0.0) || !start.is_finite() || count == 0 {
            return Err(Error::domain(format!(
                "bins need width > 0 and count > 0, got width {width}, count {count}"
            )));
        }
        Ok(Self { start, width, count })
    }

    /// Bins of `width` starting at zero that reach at least `max`.
    pub fn covering(width: f64, max: f64) -> Result<Self> {
        Self::new(0.0, width, ((max / width).ceil() as usize).max(1))
    }

    /// Bins of `pitch` centered on multiples of `pitch`, for separations of
    /// quantized coordinates.
    pub fn centered_on_multiples(pitch: f64, max: f64) -> Result<Self> {
        Self::new(-0.5 * pitch, pitch, ((max / pitch).round() as usize + 1).max(1))
    }

    pub fn index(&self, value: f64) -> Option<usize> {
        let k = ((value - self.start) / self.width).floor();
        if k >= 0.0 && (k as usize) < self.count {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn center(&self, index: usize) -> f64 {
        self.start + (index as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.center(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    /// one bin axis per data axis
    Full,
    /// vertical separation only, horizontal separations summed within a cap
    VerticalHorizontalAveraged,
}

/// How the total pair count entering the `g2` ratio is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairNormalization {
    /// same-shot pairs: the number expected without correlations,
    /// `events^2 / (2 shots)`
    MeanCountSquared,
    /// every pair offered to the histogram, in range or not
    Offered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairHistogram {
    pub axes: Vec<BinSpec>,
    pub mode: AxisMode,
    pub counts: Vec<u64>,
    pub shots: u64,
    pub events: u64,
    pub offered_pairs: u64,
    pub normalization: PairNormalization,
}

impl PairHistogram {
    pub fn empty(axes: Vec<BinSpec>, mode: AxisMode, normalization: PairNormalization) -> Self {
        let len = axes.iter().map(|a| a.count).product();
        Self {
            axes,
            mode,
            counts: vec![0; len],
            shots: 0,
            events: 0,
            offered_pairs: 0,
            normalization,
        }
    }

    /// Histogram with explicit counts whose normalization is their total.
    pub fn from_counts(axes: Vec<BinSpec>, counts: Vec<u64>) -> Result<Self> {
        let mut h = Self::empty(axes, AxisMode::Full, PairNormalization::Offered);
        if counts.len() != h.counts.len() {
            return Err(Error::BinMismatch);
        }
        h.offered_pairs = counts.iter().sum();
        h.counts = counts;
        Ok(h)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Denominator of the per-pair rate.
    pub fn pair_norm(&self) -> f64 {
        match self.normalization {
            PairNormalization::MeanCountSquared => {
                if self.shots == 0 {
                    0.0
                } else {
                    let e = self.events as f64;
                    e * e / (2.0 * self.shots as f64)
                }
            }
            PairNormalization::Offered => self.offered_pairs as f64,
        }
    }

    pub fn same_bins(&self, other: &Self) -> bool {
        self.axes == other.axes && self.mode == other.mode
    }

    /// Integer addition of counts and bookkeeping; order independent.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_bins(other) || self.normalization != other.normalization {
            return Err(Error::BinMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.shots += other.shots;
        self.events += other.events;
        self.offered_pairs += other.offered_pairs;
        Ok(())
    }

    fn flat_index(&self, a: &EventRecord, b: &EventRecord) -> Option<usize> {
        let mut flat = 0;
        for (axis, spec) in self.axes.iter().enumerate() {
            let sep = (a.coordinate(axis)? - b.coordinate(axis)?).abs();
            flat = flat * spec.count + spec.index(sep)?;
        }
        Some(flat)
    }

    fn add_pair(&mut self, a: &EventRecord, b: &EventRecord) {
        self.offered_pairs += 1;
        if let Some(i) = self.flat_index(a, b) {
            self.counts[i] += 1;
        }
    }
}

fn check_axes(events: &EventList, axes: &[BinSpec]) -> Result<()> {
    if axes.len() != events.dims {
        return Err(Error::Dimension {
            expected: events.dims,
            found: axes.len(),
        });
    }
    if events.dims > 2 && events.events.iter().any(|e| e.z.is_none()) {
        return Err(Error::domain(
            "three-dimensional analysis needs vertical positions on every event",
        ));
    }
    Ok(())
}

/// Histogram of separations of every unordered same-shot pair.
pub fn pair_histogram(events: &EventList, axes: &[BinSpec]) -> Result<PairHistogram> {
    check_axes(events, axes)?;
    let empty = PairHistogram::empty(axes.to_vec(), AxisMode::Full, PairNormalization::MeanCountSquared);
    let shots: Vec<&[EventRecord]> = events.by_shot().collect();
    let mut hist = shots
        .par_iter()
        .fold(
            || empty.clone(),
            |mut h, shot| {
                for (i, a) in shot.iter().enumerate() {
                    for b in &shot[i + 1..] {
                        h.add_pair(a, b);
                    }
                }
                h
            },
        )
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("partial histograms share bins");
                a
            },
        );
    hist.shots = events.shots;
    hist.events = events.len() as u64;
    Ok(hist)
}

const MIXING_BLOCK: u64 = 1 << 16;

/// Histogram of cross-shot pairs: the uncorrelated reference with the same
/// footprint as the same-shot histogram. All cross pairs are used when there
/// are at most `target_pairs` of them; otherwise `target_pairs` pairs are
/// drawn uniformly with replacement.
pub fn normalization_histogram(
    events: &EventList,
    axes: &[BinSpec],
    target_pairs: u64,
    seed: u64,
) -> Result<PairHistogram> {
    check_axes(events, axes)?;
    if events.shots < 2 {
        return Err(Error::domain("event mixing needs at least two shots"));
    }
    let empty = PairHistogram::empty(axes.to_vec(), AxisMode::Full, PairNormalization::Offered);
    let list = &events.events;
    let n = list.len() as u64;
    let same: u64 = events
        .counts_per_shot()
        .iter()
        .map(|c| c * c.saturating_sub(1) / 2)
        .sum();
    let cross = n * n.saturating_sub(1) / 2 - same;
    let mut hist = if cross == 0 || target_pairs == 0 {
        empty
    } else if cross <= target_pairs {
        let mut h = empty;
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if a.shot_id != b.shot_id {
                    h.add_pair(a, b);
                }
            }
        }
        h
    } else {
        let blocks = target_pairs.div_ceil(MIXING_BLOCK);
        (0..blocks)
            .into_par_iter()
            .map(|block| {
                let mut rng = seed::shot_rng(seed, Stream::Mixing, block);
                let mut h = empty.clone();
                let quota = MIXING_BLOCK.min(target_pairs - block * MIXING_BLOCK);
                while h.offered_pairs < quota {
                    let a = &list[rng.random_range(0..n) as usize];
                    let b = &list[rng.random_range(0..n) as usize];
                    if a.shot_id != b.shot_id {
                        h.add_pair(a, b);
                    }
                }
                h
            })
            .reduce(
                || empty.clone(),
                |mut a, b| {
                    a.merge(&b).expect("partial histograms share bins");
                    a
                },
            )
    };
    hist.shots = events.shots;
    hist.events = n;
    Ok(hist)
}

/// Collapses a three-axis histogram onto its vertical axis, summing the
/// horizontal bins whose center lies within `radius_cap` of zero separation.
pub fn average_horizontal(h: &PairHistogram, radius_cap: f64) -> Result<PairHistogram> {
    if h.axes.len() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: h.axes.len(),
        });
    }
    average_transverse(h, radius_cap)
}

/// Collapses a two- or three-axis histogram onto its last axis, keeping the
/// bins whose separation on the other axes lies within `radius_cap`.
pub fn average_transverse(h: &PairHistogram, radius_cap: f64) -> Result<PairHistogram> {
    if h.mode != AxisMode::Full || h.axes.len() < 2 {
        return Err(Error::domain(
            "transverse averaging needs a full histogram with at least two axes",
        ));
    }
    let (transverse, last) = h.axes.split_at(h.axes.len() - 1);
    let vertical = last[0];
    let widest = transverse.iter().map(|a| a.width).fold(0.0, f64::max);
    if !(radius_cap >= widest) {
        return Err(Error::domain(format!(
            "radius cap {radius_cap} is smaller than one horizontal bin"
        )));
    }
    let mut counts = vec![0; vertical.count];
    let planes = h.counts.len() / vertical.count;
    for plane in 0..planes {
        // unflatten the transverse index, last transverse axis fastest
        let mut rest = plane;
        let mut r2 = 0.0;
        for axis in transverse.iter().rev() {
            let c = axis.center(rest % axis.count);
            rest /= axis.count;
            r2 += c * c;
        }
        if r2.sqrt() > radius_cap {
            continue;
        }
        let base = plane * vertical.count;
        for (o, c) in counts.iter_mut().zip(&h.counts[base..base + vertical.count]) {
            *o += c;
        }
    }
    Ok(PairHistogram {
        axes: vec![vertical],
        mode: AxisMode::VerticalHorizontalAveraged,
        counts,
        shots: h.shots,
        events: h.events,
        offered_pairs: h.offered_pairs,
        normalization: h.normalization,
    })
}
