//! Gaussian kernel-smoothed rate profiles with least-squares cross-validated
//! bandwidth.
//!
//! Diagnostic only: the smoother looks at future spikes, so it is not a
//! causal estimator and the detection pipeline never consumes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;
use crate::units::SECONDS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile<T = f64> {
    /// Grid times, seconds.
    pub grid: Vec<T>,
    /// Events per day at each grid point.
    pub values: Vec<T>,
    /// Kernel standard deviation, days.
    pub bandwidth: T,
}

impl<T: Scalar> RateProfile<T> {
    /// Trapezoidal integral of the profile over its grid, in events.
    pub fn integral(&self) -> T {
        let day = T::lit(SECONDS_PER_DAY);
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| (g[1] - g[0]) / day * (v[0] + v[1]) / T::lit(2.0))
            .sum()
    }
}

/// Unit-area Gaussian density with standard deviation `width` at `x`.
pub fn gauss<T: Scalar>(x: T, width: T) -> T {
    let z = x / width;
    (-(z * z) / T::lit(2.0)).exp() / (width * T::TAU().sqrt())
}

/// Evaluates `Σ_m gauss(t - t_m; bandwidth)` on an even grid from the train's
/// start to its end. Bandwidth in days, grid step in seconds.
pub fn estimate_rate<T: Scalar>(train: &SpikeTrain<T>, bandwidth: T, grid_step: T) -> Result<RateProfile<T>> {
    if !(bandwidth > T::zero()) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if !(grid_step > T::zero()) {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {grid_step}")));
    }
    let day = T::lit(SECONDS_PER_DAY);
    let n = (train.duration() / grid_step + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    let grid: Vec<T> = (0..n).map(|k| train.start() + grid_step * T::from_usize(k).unwrap()).collect();
    // Kernel mass beyond 10 sd is below f64 resolution of the sum.
    let reach = bandwidth * day * T::lit(10.0);
    let times = train.times();
    let values = grid
        .iter()
        .map(|&g| {
            let lo = times.partition_point(|&t| t < g - reach);
            let hi = times.partition_point(|&t| t <= g + reach);
            times[lo..hi].iter().map(|&t| gauss((g - t) / day, bandwidth)).sum()
        })
        .collect();
    Ok(RateProfile { grid, values, bandwidth })
}

/// Least-squares cross-validation cost
/// `Σ_{m,n} ψ_w(t_m - t_n) - 2 Σ_{m≠n} gauss(t_m - t_n; w)`, with `ψ_w` the
/// self-convolution of the kernel (a Gaussian of width `w·√2`). Times in
/// days.
pub fn lscv_cost<T: Scalar>(times_days: &[T], width: T) -> T {
    let wide = width * T::SQRT_2();
    let n = T::from_usize(times_days.len()).unwrap();
    let two = T::lit(2.0);
    // diagonal of the first sum
    let mut cost = n * gauss(T::zero(), wide);
    for (i, &x) in times_days.iter().enumerate() {
        for &y in &times_days[i + 1..] {
            let d = x - y;
            cost = cost + two * gauss(d, wide) - two * two * gauss(d, width);
        }
    }
    cost
}

/// Candidate minimizing the LSCV cost. Ties go to the smaller candidate.
pub fn optimize_bandwidth<T: Scalar>(train: &SpikeTrain<T>, candidates: &[T]) -> Result<T> {
    if train.len() < 2 {
        return Err(Error::BandwidthUndefined);
    }
    if candidates.is_empty() || candidates.iter().any(|c| !(*c > T::zero())) {
        return Err(Error::InvalidInput("bandwidth candidates must be non-empty and positive".into()));
    }
    let day = T::lit(SECONDS_PER_DAY);
    let times: Vec<T> = train.times().iter().map(|&t| t / day).collect();
    let mut best: Option<(T, T)> = None;
    for &w in candidates {
        let c = lscv_cost(&times, w);
        best = match best {
            Some((bw, bc)) if bc < c || (bc == c && bw <= w) => Some((bw, bc)),
            _ => Some((w, c)),
        };
    }
    Ok(best.unwrap().0)
}

/// `count` log-spaced bandwidths from `lo` to `hi` days inclusive.
pub fn log_spaced<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    let last = T::from_usize(count - 1).unwrap();
    (0..count)
        .map(|i| (l + (h - l) * T::from_usize(i).unwrap() / last).exp())
        .collect()
}

/// Default candidate grid: 50 log-spaced points spanning 0.05 to 30 days.
pub fn default_candidates<T: Scalar>() -> Vec<T> {
    log_spaced(T::lit(0.05), T::lit(30.0), 50)
}
