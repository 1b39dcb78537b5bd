//! Binless spike-train dissimilarities: the Victor-Purpura edit distance and
//! the Cauchy-Schwarz divergence built on the memoryless cross-intensity
//! (mCI) kernel.
//!
//! All spike times are seconds. `q` is stated per day and `tau` in hours, as
//! the measures are usually parameterized; conversion happens inside the
//! parameter types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spiketrain::SpikeTrain;
use crate::units::{SECONDS_PER_DAY, SECONDS_PER_HOUR};

/// Victor-Purpura cost per day of spike shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpParams<T = f64> {
    pub q_per_day: T,
}

impl<T: Scalar> VpParams<T> {
    pub fn new(q_per_day: T) -> Result<Self> {
        if !(q_per_day >= T::zero()) || !q_per_day.is_finite() {
            return Err(Error::InvalidInput(format!("q must be finite and >= 0, got {q_per_day}")));
        }
        Ok(Self { q_per_day })
    }

    pub fn q_per_second(&self) -> T {
        self.q_per_day / T::lit(SECONDS_PER_DAY)
    }
}

/// Width of the Laplacian kernel `exp(-|x - y| / tau)`, in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsParams<T = f64> {
    pub tau_hours: T,
}

impl<T: Scalar> CsParams<T> {
    pub fn new(tau_hours: T) -> Result<Self> {
        if !(tau_hours > T::zero()) || !tau_hours.is_finite() {
            return Err(Error::InvalidInput(format!("tau must be finite and > 0, got {tau_hours}")));
        }
        Ok(Self { tau_hours })
    }

    pub fn tau_seconds(&self) -> T {
        self.tau_hours * T::lit(SECONDS_PER_HOUR)
    }
}

/// Minimum cost of turning `a` into `b` with unit-cost insertions and
/// deletions and shifts costing `q·|Δt|`.
pub fn vp_distance<T: Scalar>(a: &SpikeTrain<T>, b: &SpikeTrain<T>, p: &VpParams<T>) -> T {
    vp_distance_times(a.times(), b.times(), p.q_per_second())
}

/// Victor-Purpura distance over sorted time slices, `q` per unit time.
///
/// Runs the classic O(Na·Nb) dynamic program keeping a single row over the
/// shorter train.
pub fn vp_distance_times<T: Scalar>(a: &[T], b: &[T], q: T) -> T {
    let (outer, inner) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if inner.is_empty() {
        return T::from_usize(outer.len()).unwrap();
    }
    let one = T::one();
    // row[n] = G[m][n] for the current m
    let mut row: Vec<T> = (0..=inner.len()).map(|n| T::from_usize(n).unwrap()).collect();
    for (m, &ta) in outer.iter().enumerate() {
        let mut diag = row[0];
        row[0] = T::from_usize(m + 1).unwrap();
        for (n, &tb) in inner.iter().enumerate() {
            let up = row[n + 1];
            let shift = diag + q * (ta - tb).abs();
            let best = (up + one).min(row[n] + one).min(shift);
            diag = up;
            row[n + 1] = best;
        }
    }
    row[inner.len()]
}

/// Raw double kernel sum `Σ_m Σ_n exp(-|a_m - b_n| / tau)` over sorted
/// slices, evaluated in O(Na + Nb) with two exponential recursions.
///
/// The result is bitwise symmetric in its arguments.
pub fn laplacian_sum<T: Scalar>(a: &[T], b: &[T], tau: T) -> T {
    let (a, b) = canonical(a, b);
    let mut total = T::zero();

    // Terms with b_n <= a_m.
    let mut acc = T::zero();
    let mut j = 0;
    let mut prev: Option<T> = None;
    for &ta in a {
        if let Some(p) = prev {
            acc = acc * (-(ta - p) / tau).exp();
        }
        while j < b.len() && b[j] <= ta {
            acc = acc + (-(ta - b[j]) / tau).exp();
            j += 1;
        }
        total = total + acc;
        prev = Some(ta);
    }

    // Terms with b_n > a_m.
    let mut acc = T::zero();
    let mut j = b.len();
    let mut prev: Option<T> = None;
    for &ta in a.iter().rev() {
        if let Some(p) = prev {
            acc = acc * (-(p - ta) / tau).exp();
        }
        while j > 0 && b[j - 1] > ta {
            acc = acc + (-(b[j - 1] - ta) / tau).exp();
            j -= 1;
        }
        total = total + acc;
        prev = Some(ta);
    }
    total
}

/// `ln Σ_m Σ_n exp(-|a_m - b_n| / tau)` by direct log-sum-exp, for kernel
/// sums that underflow.
fn log_laplacian_sum_direct<T: Scalar>(a: &[T], b: &[T], tau: T) -> T {
    let (a, b) = canonical(a, b);
    let mut peak = T::neg_infinity();
    for &x in a {
        for &y in b {
            peak = peak.max(-(x - y).abs() / tau);
        }
    }
    let mut s = T::zero();
    for &x in a {
        for &y in b {
            s = s + (-(x - y).abs() / tau - peak).exp();
        }
    }
    peak + s.ln()
}

fn log_laplacian_sum<T: Scalar>(a: &[T], b: &[T], tau: T) -> T {
    let s = laplacian_sum(a, b, tau);
    if s > T::min_positive_value() {
        s.ln()
    } else {
        log_laplacian_sum_direct(a, b, tau)
    }
}

fn canonical<'a, T: Scalar>(a: &'a [T], b: &'a [T]) -> (&'a [T], &'a [T]) {
    use std::cmp::Ordering;
    let order = a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    if order == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

/// Memoryless cross-intensity `(1 / (Na·Nb)) Σ_m Σ_n κ(t_m, t_n)` with the
/// unit-peak Laplacian kernel.
pub fn mci<T: Scalar>(a: &SpikeTrain<T>, b: &SpikeTrain<T>, p: &CsParams<T>) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrainMci);
    }
    let norm = T::from_usize(a.len() * b.len()).unwrap();
    Ok(laplacian_sum(a.times(), b.times(), p.tau_seconds()) / norm)
}

/// Cauchy-Schwarz divergence `-ln(I(a,b)² / (I(a,a)·I(b,b)))`.
pub fn cs_divergence<T: Scalar>(a: &SpikeTrain<T>, b: &SpikeTrain<T>, p: &CsParams<T>) -> Result<T> {
    cs_divergence_times(a.times(), b.times(), p.tau_seconds()).ok_or(Error::EmptyTrainCs)
}

/// Cauchy-Schwarz divergence over sorted slices, `tau` in the same unit as
/// the times. `None` when either slice is empty.
///
/// The mCI normalization cancels in the ratio, so raw kernel sums are used.
pub fn cs_divergence_times<T: Scalar>(a: &[T], b: &[T], tau: T) -> Option<T> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let cross = log_laplacian_sum(a, b, tau);
    let self_a = log_laplacian_sum(a, a, tau);
    let self_b = log_laplacian_sum(b, b, tau);
    let d = self_a + self_b - (cross + cross);
    Some(d.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::days;
    use proptest::prelude::*;

    fn train(times: &[f64]) -> SpikeTrain<f64> {
        let lo = times.iter().cloned().fold(0.0, f64::min);
        let hi = times.iter().cloned().fold(1.0, f64::max);
        SpikeTrain::new("S", lo, hi, times.to_vec()).unwrap()
    }

    fn direct_sum(a: &[f64], b: &[f64], tau: f64) -> f64 {
        a.iter().flat_map(|x| b.iter().map(move |y| (-(x - y).abs() / tau).exp())).sum()
    }

    #[test]
    fn vp_single_pair_caps_at_two() {
        let q = VpParams::new(100.0).unwrap();
        let t = 10_000.0;
        let near = vp_distance(&train(&[t]), &train(&[t + days::<f64>(0.005)]), &q);
        assert!((near - 0.5).abs() < 1e-12, "{near}");
        let far = vp_distance(&train(&[t]), &train(&[t + days::<f64>(1.0)]), &q);
        assert_eq!(far, 2.0);
    }

    #[test]
    fn vp_against_empty_is_count() {
        let q = VpParams::new(100.0).unwrap();
        let a = train(&[1.0, 2.0, 3.0]);
        let e = SpikeTrain::empty("S", 0.0, 5.0).unwrap();
        assert_eq!(vp_distance(&a, &e, &q), 3.0);
        assert_eq!(vp_distance(&e, &a, &q), 3.0);
        assert_eq!(vp_distance(&e, &e, &q), 0.0);
    }

    #[test]
    fn vp_rejects_negative_q() {
        assert!(VpParams::new(-1.0).is_err());
        assert!(VpParams::new(f64::NAN).is_err());
        assert!(CsParams::new(0.0).is_err());
    }

    #[test]
    fn mci_closed_forms() {
        let p = CsParams::new(2.5).unwrap();
        let tau = p.tau_seconds();
        assert_eq!(mci(&train(&[7.0]), &train(&[7.0]), &p).unwrap(), 1.0);
        let v = mci(&train(&[0.0]), &train(&[tau]), &p).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(mci(&train(&[0.0, 0.0]), &train(&[0.0]), &p).unwrap(), 1.0);
        let e = SpikeTrain::empty("S", 0.0, 1.0).unwrap();
        assert!(matches!(mci(&e, &train(&[0.0]), &p), Err(Error::EmptyTrainMci)));
    }

    #[test]
    fn cs_single_spike_pair() {
        let p = CsParams::new(2.5).unwrap();
        let tau = p.tau_seconds();
        for delta in [0.0, 1.0, 900.0, tau, 20.0 * tau] {
            let d = cs_divergence(&train(&[0.0]), &train(&[delta]), &p).unwrap();
            assert!((d - 2.0 * delta / tau).abs() < 1e-9, "{delta}: {d}");
        }
    }

    #[test]
    fn cs_survives_kernel_underflow() {
        let p = CsParams::new(1.0).unwrap();
        let delta = 5000.0 * p.tau_seconds();
        let d = cs_divergence(&train(&[0.0, 1.0]), &train(&[delta]), &p).unwrap();
        assert!(d.is_finite());
        // exact: -ln((e^{-Δ/τ} + e^{-(Δ-1)/τ})² / ((2 + 2e^{-1/τ}) · 1))
        let tau = p.tau_seconds();
        let r = 1.0f64 / tau;
        let expected = 2.0 * delta / tau - 2.0 * (1.0 + r.exp()).ln() + (2.0 + 2.0 * (-r).exp()).ln();
        assert!((d - expected).abs() < 1e-6 * expected, "{d} vs {expected}");
    }

    #[test]
    fn cs_empty_is_error() {
        let p = CsParams::new(2.5).unwrap();
        let e = SpikeTrain::empty("S", 0.0, 1.0).unwrap();
        assert!(matches!(cs_divergence(&e, &train(&[0.0]), &p), Err(Error::EmptyTrainCs)));
        assert!(cs_divergence_times::<f64>(&[], &[], 1.0).is_none());
    }

    #[test]
    fn single_precision_measures() {
        let a: Vec<f32> = vec![0.0, 3600.0, 7200.0];
        let b: Vec<f32> = vec![100.0, 7300.0];
        let d = vp_distance_times(&a, &b, 100.0 / 86_400.0);
        let d64 = vp_distance_times(&[0.0, 3600.0, 7200.0], &[100.0, 7300.0], 100.0 / 86_400.0);
        assert!((d as f64 - d64).abs() < 1e-5);
        let c = cs_divergence_times(&a, &b, 9000.0).unwrap();
        let c64 = cs_divergence_times(&[0.0, 3600.0, 7200.0], &[100.0, 7300.0], 9000.0f64).unwrap();
        assert!((c as f64 - c64).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn fast_kernel_sum_matches_double_sum(
            mut a in proptest::collection::vec(0.0f64..200_000.0, 0..30),
            mut b in proptest::collection::vec(0.0f64..200_000.0, 0..30),
            tau in 100.0f64..50_000.0,
        ) {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let fast = laplacian_sum(&a, &b, tau);
            let slow = direct_sum(&a, &b, tau);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{} vs {}", fast, slow);
        }

        #[test]
        fn measures_are_translation_invariant(
            a in proptest::collection::vec(0.0f64..100_000.0, 1..10),
            b in proptest::collection::vec(0.0f64..100_000.0, 1..10),
            offset in -50_000.0f64..50_000.0,
        ) {
            let (ta, tb) = (train(&a), train(&b));
            let (sa, sb) = (ta.shifted(offset), tb.shifted(offset));
            let q = VpParams::new(100.0).unwrap();
            let p = CsParams::new(2.5).unwrap();
            let dv = vp_distance(&ta, &tb, &q) - vp_distance(&sa, &sb, &q);
            prop_assert!(dv.abs() < 1e-9);
            let dc = cs_divergence(&ta, &tb, &p).unwrap() - cs_divergence(&sa, &sb, &p).unwrap();
            prop_assert!(dc.abs() < 1e-9);
        }
    }

    #[test]
    fn cs_monotone_in_tau_for_rate_difference() {
        // Same span, one train twice as dense: only the rate differs.
        let a: Vec<f64> = (0..20).map(|i| i as f64 * 8640.0).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64 * 4320.0).collect();
        let (ta, tb) = (train(&a), train(&b));
        let grid = [0.5, 1.0, 2.5, 5.0, 10.0, 24.0, 48.0];
        let vals: Vec<f64> = grid
            .iter()
            .map(|&t| cs_divergence(&ta, &tb, &CsParams::new(t).unwrap()).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{vals:?}");
        }
    }
}
