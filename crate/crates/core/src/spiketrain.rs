//! Spike trains and the windowing/binning primitives every measure builds on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};

/// Sorted event times of one station on a closed observation interval.
///
/// Duplicate times are legal: two micro-earthquakes can share a timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain<T = f64> {
    station_id: String,
    start: T,
    end: T,
    times: Vec<T>,
}

impl<T: Scalar> SpikeTrain<T> {
    /// Builds a train from unsorted times. Times outside `[start, end]` are
    /// rejected.
    pub fn new(station_id: impl Into<String>, start: T, end: T, mut times: Vec<T>) -> Result<Self> {
        if !(start <= end) {
            return Err(Error::InvalidInput(format!(
                "interval start {start} after end {end}"
            )));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= start && **t <= end)) {
            return Err(Error::InvalidInput(format!(
                "spike time {t} outside interval [{start}, {end}]"
            )));
        }
        times.sort_by(total_cmp);
        Ok(Self { station_id: station_id.into(), start, end, times })
    }

    /// Builds a train keeping only the times that fall inside the interval.
    pub fn clipped(station_id: impl Into<String>, start: T, end: T, times: Vec<T>) -> Result<Self> {
        let kept = times.into_iter().filter(|t| *t >= start && *t <= end).collect();
        Self::new(station_id, start, end, kept)
    }

    pub fn empty(station_id: impl Into<String>, start: T, end: T) -> Result<Self> {
        Self::new(station_id, start, end, Vec::new())
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.end
    }

    /// Observation period `end - start`.
    pub fn duration(&self) -> T {
        self.end - self.start
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spikes inside the closed span `[start, start + length]`.
    pub fn window_slice(&self, start: T, length: T) -> &[T] {
        window_slice(&self.times, start, start + length)
    }

    /// Sub-train on `[start, start + length]` with the spikes inside it.
    pub fn window(&self, start: T, length: T) -> Result<Self> {
        if !(length > T::zero()) {
            return Err(Error::InvalidInput(format!("window length must be positive, got {length}")));
        }
        Ok(Self {
            station_id: self.station_id.clone(),
            start,
            end: start + length,
            times: self.window_slice(start, length).to_vec(),
        })
    }

    /// Counts per bin of width `bin_width` starting at the interval start.
    /// Bins are half-open except the last, which is closed on the right.
    pub fn bin_counts(&self, bin_width: T) -> Result<BinnedCounts<T>> {
        if !(bin_width > T::zero()) {
            return Err(Error::InvalidInput(format!("bin width must be positive, got {bin_width}")));
        }
        let nbins = ((self.duration() / bin_width).ceil().to_usize().unwrap_or(0)).max(1);
        let mut counts = vec![0u64; nbins];
        for &t in &self.times {
            let k = ((t - self.start) / bin_width).floor().to_usize().unwrap_or(0);
            counts[k.min(nbins - 1)] += 1;
        }
        Ok(BinnedCounts { bin_width, origin: self.start, counts })
    }

    /// Same train with every time shifted by `offset`.
    pub fn shifted(&self, offset: T) -> Self {
        Self {
            station_id: self.station_id.clone(),
            start: self.start + offset,
            end: self.end + offset,
            times: self.times.iter().map(|&t| t + offset).collect(),
        }
    }
}

/// Sub-slice of sorted `times` inside the closed span `[lo, hi]`.
pub fn window_slice<T: Scalar>(times: &[T], lo: T, hi: T) -> &[T] {
    let first = times.partition_point(|&t| t < lo);
    let last = times.partition_point(|&t| t <= hi);
    &times[first..last.max(first)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCounts<T = f64> {
    pub bin_width: T,
    pub origin: T,
    pub counts: Vec<u64>,
}

impl<T: Scalar> BinnedCounts<T> {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}
