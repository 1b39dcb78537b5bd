//! Null-hypothesis machinery: causal spike-time dithering, correlogram-based
//! choice of the dithering window, quantile normalization of the surrogate
//! distance matrix, and the one-tailed acceptance band.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};
use crate::spiketrain::SpikeTrain;

/// Dithering window length, seconds, or chosen from the correlogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DitherWindow<T = f64> {
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams<T = f64> {
    pub count: usize,
    pub dither_window: DitherWindow<T>,
    pub seed: u64,
}

impl<T: Scalar> SurrogateParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidInput(format!("surrogate count must be >= 2, got {}", self.count)));
        }
        if let DitherWindow::Fixed(w) = self.dither_window {
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(Error::InvalidInput(format!("dither window must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

/// Independent, reproducible stream for surrogate `index` of `station`
/// (0 or 1). Surrogate `i` of either station can be regenerated alone.
pub fn surrogate_rng(seed: u64, index: usize, station: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 * 2 + station as u64);
    rng
}

/// Forward offsets drawn uniformly on `[0, window]`, one per spike in order.
pub fn dither_offsets<T: Scalar, R: rand::Rng + ?Sized>(n: usize, window: T, rng: &mut R) -> Vec<T> {
    if window == T::zero() {
        return vec![T::zero(); n];
    }
    let u = Uniform::new_inclusive(T::zero(), window).expect("valid dither window");
    (0..n).map(|_| u.sample(rng)).collect()
}

/// Causal uniform dithering: every spike moves forward by an independent
/// draw from `[0, window]`. The output interval extends to `end + window`.
pub fn dither<T: Scalar, R: rand::Rng + ?Sized>(train: &SpikeTrain<T>, window: T, rng: &mut R) -> Result<SpikeTrain<T>> {
    if !(window >= T::zero()) {
        return Err(Error::InvalidInput(format!("dither window must be >= 0, got {window}")));
    }
    let offsets = dither_offsets(train.len(), window, rng);
    let times = train.times().iter().zip(&offsets).map(|(&t, &u)| t + u).collect();
    SpikeTrain::new(train.station_id(), train.start(), train.end() + window, times)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram<T = f64> {
    /// Non-negative lags, multiples of `bin_width`, starting at 0.
    pub lags: Vec<T>,
    pub values: Vec<T>,
    pub bin_width: T,
}

/// Pearson correlation between the bin counts of `a` and those of `b`
/// delayed by `k` bins, for every `k·bin_width <= max_lag`, over the
/// intervals' overlap.
pub fn cross_correlogram<T: Scalar>(
    a: &SpikeTrain<T>,
    b: &SpikeTrain<T>,
    bin_width: T,
    max_lag: T,
) -> Result<Correlogram<T>> {
    if !(bin_width > T::zero()) {
        return Err(Error::InvalidInput(format!("bin width must be positive, got {bin_width}")));
    }
    let lo = a.start().max(b.start());
    let hi = a.end().min(b.end());
    if !(hi >= lo) {
        return Err(Error::InvalidInput("trains do not overlap".into()));
    }
    let x = a.window(lo, (hi - lo).max(T::min_positive_value()))?.bin_counts(bin_width)?;
    let y = b.window(lo, (hi - lo).max(T::min_positive_value()))?.bin_counts(bin_width)?;
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientBins(n));
    }
    let to_t = |c: &u64| T::from_u64(*c).unwrap();
    let xs: Vec<T> = x.counts.iter().map(to_t).collect();
    let ys: Vec<T> = y.counts.iter().map(to_t).collect();
    let max_k = ((max_lag / bin_width) + T::lit(1e-9)).floor().to_usize().unwrap_or(0).min(n - 2);
    let mut lags = Vec::with_capacity(max_k + 1);
    let mut values = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        lags.push(bin_width * T::from_usize(k).unwrap());
        values.push(pearson(&xs[..n - k], &ys[k..]));
    }
    Ok(Correlogram { lags, values, bin_width })
}

fn pearson<T: Scalar>(x: &[T], y: &[T]) -> T {
    let n = T::from_usize(x.len()).unwrap();
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom > T::zero() {
        (sxy / denom).max(-T::one()).min(T::one())
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DitherChoice<T = f64> {
    pub window: T,
    /// False when no interior local minimum exists and the largest lag was
    /// returned instead.
    pub local_minimum: bool,
}

/// Smallest positive lag that is a local minimum of the correlogram.
pub fn select_dither_window<T: Scalar>(cc: &Correlogram<T>) -> DitherChoice<T> {
    let v = &cc.values;
    for i in 1..v.len().saturating_sub(1) {
        if v[i] <= v[i - 1] && v[i] <= v[i + 1] {
            return DitherChoice { window: cc.lags[i], local_minimum: true };
        }
    }
    log::warn!("correlogram has no interior local minimum; using the largest lag");
    DitherChoice { window: cc.lags.last().copied().unwrap_or(T::zero()), local_minimum: false }
}

/// Quantile-normalized surrogate matrix, stored column per window position.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileNormalized<T = f64> {
    pub columns: Vec<Vec<Option<T>>>,
    /// False for columns with missing entries, which are left untouched.
    pub included: Vec<bool>,
}

/// Replaces the k-th order statistic of every complete column by the mean
/// k-th order statistic across the complete columns. Tied entries in a
/// column share the mean of the reference values over their ranks.
pub fn quantile_normalize<T: Scalar>(columns: &[Vec<Option<T>>]) -> Result<QuantileNormalized<T>> {
    let m = columns.first().map_or(0, |c| c.len());
    if m < 2 {
        return Err(Error::InvalidInput(format!("quantile normalization needs >= 2 rows, got {m}")));
    }
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidInput("ragged surrogate matrix".into()));
    }
    let included: Vec<bool> = columns.iter().map(|c| c.iter().all(|v| v.is_some())).collect();
    let mut out = columns.to_vec();
    let count = included.iter().filter(|&&i| i).count();
    if count == 0 {
        return Ok(QuantileNormalized { columns: out, included });
    }

    // orders[j] = row indices of column j sorted by value
    let mut orders: Vec<Option<Vec<usize>>> = Vec::with_capacity(columns.len());
    let mut reference = vec![T::zero(); m];
    for (col, &inc) in columns.iter().zip(&included) {
        if !inc {
            orders.push(None);
            continue;
        }
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&i, &j| total_cmp(&col[i].unwrap(), &col[j].unwrap()));
        for (k, &i) in idx.iter().enumerate() {
            reference[k] = reference[k] + col[i].unwrap();
        }
        orders.push(Some(idx));
    }
    let n = T::from_usize(count).unwrap();
    for r in &mut reference {
        *r = *r / n;
    }

    for (j, order) in orders.iter().enumerate() {
        let Some(idx) = order else { continue };
        let col = &columns[j];
        let mut k = 0;
        while k < m {
            let v = col[idx[k]].unwrap();
            let mut e = k + 1;
            while e < m && col[idx[e]].unwrap() == v {
                e += 1;
            }
            let value = if e - k == 1 {
                reference[k]
            } else {
                reference[k..e].iter().copied().sum::<T>() / T::from_usize(e - k).unwrap()
            };
            for &i in &idx[k..e] {
                out[j][i] = Some(value);
            }
            k = e;
        }
    }
    Ok(QuantileNormalized { columns: out, included })
}

/// Per-position one-tailed band: `lower` is the smallest surrogate value,
/// `upper` the `floor(confidence·M)`-th order statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBand<T = f64> {
    pub positions: Vec<T>,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
    pub confidence: T,
}

/// 1-based rank of the upper order statistic.
pub fn upper_rank<T: Scalar>(confidence: T, m: usize) -> usize {
    let k = (confidence * T::from_usize(m).unwrap() + T::lit(1e-9)).floor().to_usize().unwrap_or(1);
    k.clamp(1, m)
}

pub fn acceptance_band<T: Scalar>(columns: &[Vec<Option<T>>], positions: &[T], confidence: T) -> Result<AcceptanceBand<T>> {
    if !(confidence > T::zero() && confidence < T::one()) {
        return Err(Error::InvalidInput(format!("confidence must be in (0, 1), got {confidence}")));
    }
    if columns.len() != positions.len() {
        return Err(Error::InvalidInput("band positions and columns differ in length".into()));
    }
    let m = columns.first().map_or(0, |c| c.len());
    if columns.is_empty() {
        return Ok(AcceptanceBand { positions: vec![], lower: vec![], upper: vec![], confidence });
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!("acceptance band needs >= 2 surrogates, got {m}")));
    }
    let k = upper_rank(confidence, m);
    let mut lower = Vec::with_capacity(columns.len());
    let mut upper = Vec::with_capacity(columns.len());
    for col in columns {
        let vals: Option<Vec<T>> = col.iter().copied().collect();
        match vals {
            Some(mut v) => {
                v.sort_by(total_cmp);
                lower.push(Some(v[0]));
                upper.push(Some(v[k - 1]));
            }
            None => {
                lower.push(None);
                upper.push(None);
            }
        }
    }
    Ok(AcceptanceBand { positions: positions.to_vec(), lower, upper, confidence })
}
