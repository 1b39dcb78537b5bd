//! End-to-end detection: sliding-window dissimilarity profile, surrogate
//! ensemble, acceptance band and anomaly extraction.
//!
//! Positions mark window starts. Surrogate profiles are computed per
//! surrogate index in parallel; each index owns its random streams, so the
//! result does not depend on how many workers run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{cs_divergence_times, vp_distance_times, CsParams, VpParams};
use crate::scalar::Scalar;
use crate::spiketrain::{window_slice, SpikeTrain};
use crate::surrogate::{
    acceptance_band, cross_correlogram, dither, quantile_normalize, select_dither_window, surrogate_rng,
    AcceptanceBand, Correlogram, DitherChoice, DitherWindow, SurrogateParams,
};
use crate::units::{days, hours};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Measure<T = f64> {
    Vp(VpParams<T>),
    Cs(CsParams<T>),
}

impl<T: Scalar> Measure<T> {
    pub fn vp(q_per_day: T) -> Result<Self> {
        Ok(Measure::Vp(VpParams::new(q_per_day)?))
    }

    pub fn cs(tau_hours: T) -> Result<Self> {
        Ok(Measure::Cs(CsParams::new(tau_hours)?))
    }

    /// Dissimilarity of two sorted time slices; `None` where undefined.
    pub fn evaluate(&self, a: &[T], b: &[T]) -> Option<T> {
        match self {
            Measure::Vp(p) => Some(vp_distance_times(a, b, p.q_per_second())),
            Measure::Cs(p) => cs_divergence_times(a, b, p.tau_seconds()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Measure::Vp(_) => "vp",
            Measure::Cs(_) => "cs",
        }
    }

    /// The free parameter in its interface unit (q per day, tau in hours).
    pub fn parameter(&self) -> T {
        match self {
            Measure::Vp(p) => p.q_per_day,
            Measure::Cs(p) => p.tau_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityProfile<T = f64> {
    pub measure: Measure<T>,
    pub window_length: T,
    pub step: T,
    pub positions: Vec<T>,
    pub values: Vec<Option<T>>,
}

/// Window starts from `start` in steps of `step` such that each window of
/// `window_length` ends at or before `end`.
pub fn window_positions<T: Scalar>(start: T, end: T, window_length: T, step: T) -> Vec<T> {
    let span = end - start - window_length;
    if span < T::zero() {
        return Vec::new();
    }
    // Tolerance absorbs rounding when the last window ends exactly at `end`.
    let n = (span / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    (0..n).map(|k| start + step * T::from_usize(k).unwrap()).collect()
}

/// Measure values over closed windows `[l, l + window_length]`.
pub fn profile_values<T: Scalar>(a: &[T], b: &[T], measure: &Measure<T>, positions: &[T], window_length: T) -> Vec<Option<T>> {
    positions
        .iter()
        .map(|&l| {
            let wa = window_slice(a, l, l + window_length);
            let wb = window_slice(b, l, l + window_length);
            measure.evaluate(wa, wb)
        })
        .collect()
}

fn check_window<T: Scalar>(window_length: T, step: T) -> Result<()> {
    if !(window_length > T::zero()) || !(step > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "window length and step must be positive, got {window_length} and {step}"
        )));
    }
    Ok(())
}

/// Common analysis interval of two trains.
pub fn common_interval<T: Scalar>(a: &SpikeTrain<T>, b: &SpikeTrain<T>) -> Result<(T, T)> {
    let lo = a.start().max(b.start());
    let hi = a.end().min(b.end());
    if !(hi >= lo) {
        return Err(Error::InvalidInput("trains share no common interval".into()));
    }
    Ok((lo, hi))
}

pub fn sliding_profile<T: Scalar>(
    a: &SpikeTrain<T>,
    b: &SpikeTrain<T>,
    measure: &Measure<T>,
    window_length: T,
    step: T,
) -> Result<DissimilarityProfile<T>> {
    check_window(window_length, step)?;
    let (lo, hi) = common_interval(a, b)?;
    let positions = window_positions(lo, hi, window_length, step);
    let values = profile_values(a.times(), b.times(), measure, &positions, window_length);
    Ok(DissimilarityProfile { measure: *measure, window_length, step, positions, values })
}

/// A maximal run of window positions whose value exceeds the upper band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly<T = f64> {
    pub label: String,
    /// Start of the first exceeding window, seconds.
    pub onset: T,
    /// Start of the last exceeding window, seconds.
    pub offset: T,
    pub peak_value: T,
    /// Peak value minus the upper band at the peak position.
    pub peak_excess: T,
    pub window_length: T,
}

impl<T: Scalar> Anomaly<T> {
    /// Instant the onset is causally known: the end of its window.
    pub fn warning_onset(&self) -> T {
        self.onset + self.window_length
    }

    pub fn warning_offset(&self) -> T {
        self.offset + self.window_length
    }

    /// Time span of all windows in the run.
    pub fn coverage(&self) -> (T, T) {
        (self.onset, self.offset + self.window_length)
    }
}

/// Runs of consecutive positions with `value > upper`, labeled A1, A2, ...
/// Missing values or band entries split runs.
pub fn extract_anomalies<T: Scalar>(profile: &DissimilarityProfile<T>, band: &AcceptanceBand<T>) -> Vec<Anomaly<T>> {
    let mut out = Vec::new();
    let mut run: Option<(usize, usize, usize)> = None; // (first, last, peak)
    let excess = |i: usize| -> Option<T> {
        match (profile.values[i], band.upper.get(i).copied().flatten()) {
            (Some(v), Some(u)) if v > u => Some(v - u),
            _ => None,
        }
    };
    let close = |run: &mut Option<(usize, usize, usize)>, out: &mut Vec<Anomaly<T>>| {
        if let Some((first, last, peak)) = run.take() {
            let peak_value = profile.values[peak].unwrap();
            out.push(Anomaly {
                label: format!("A{}", out.len() + 1),
                onset: profile.positions[first],
                offset: profile.positions[last],
                peak_value,
                peak_excess: peak_value - band.upper[peak].unwrap(),
                window_length: profile.window_length,
            });
        }
    };
    for i in 0..profile.positions.len() {
        if excess(i).is_some() {
            run = Some(match run {
                Some((first, _, peak)) => {
                    let better = profile.values[i].unwrap() > profile.values[peak].unwrap();
                    (first, i, if better { i } else { peak })
                }
                None => (i, i, i),
            });
        } else {
            close(&mut run, &mut out);
        }
    }
    close(&mut run, &mut out);
    out
}

/// Checks every anomaly against the profile and band: each covered position
/// must exceed the band, labels must be dense and chronological.
pub fn validate_anomalies<T: Scalar>(
    profile: &DissimilarityProfile<T>,
    band: &AcceptanceBand<T>,
    anomalies: &[Anomaly<T>],
) -> Result<()> {
    for (k, a) in anomalies.iter().enumerate() {
        if a.label != format!("A{}", k + 1) {
            return Err(Error::InvalidInput(format!("anomaly label {} out of sequence", a.label)));
        }
        if k > 0 && !(anomalies[k - 1].onset < a.onset) {
            return Err(Error::InvalidInput(format!("anomaly {} not chronological", a.label)));
        }
        if !(a.onset <= a.offset) {
            return Err(Error::InvalidInput(format!("anomaly {} ends before it starts", a.label)));
        }
        for (i, &l) in profile.positions.iter().enumerate() {
            if l < a.onset || l > a.offset {
                continue;
            }
            match (profile.values[i], band.upper[i]) {
                (Some(v), Some(u)) if v > u => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "anomaly {} covers a position that does not exceed the band",
                        a.label
                    )))
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig<T = f64> {
    pub measure: Measure<T>,
    /// Seconds.
    pub window_length: T,
    /// Seconds.
    pub step: T,
    pub surrogates: SurrogateParams<T>,
    pub confidence: T,
    /// Correlogram bin width, seconds.
    pub cc_bin_width: T,
    /// Largest correlogram lag, seconds.
    pub cc_max_lag: T,
    /// Quantile-normalize the surrogate matrix before banding.
    pub normalize: bool,
}

impl<T: Scalar> Default for DetectConfig<T> {
    fn default() -> Self {
        Self {
            measure: Measure::Cs(CsParams { tau_hours: T::lit(2.5) }),
            window_length: days(2.0),
            step: hours(1.0),
            surrogates: SurrogateParams { count: 1000, dither_window: DitherWindow::Auto, seed: 0 },
            confidence: T::lit(0.9),
            cc_bin_width: days(2.0),
            cc_max_lag: days(30.0),
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection<T = f64> {
    pub profile: DissimilarityProfile<T>,
    pub band: AcceptanceBand<T>,
    pub anomalies: Vec<Anomaly<T>>,
    /// Correlogram of the original trains, when enough bins exist.
    pub correlogram: Option<Correlogram<T>>,
    pub dither: DitherChoice<T>,
}

/// Surrogate distance matrix, one column per window position, one row per
/// surrogate pair.
pub fn surrogate_columns<T: Scalar>(
    a: &SpikeTrain<T>,
    b: &SpikeTrain<T>,
    measure: &Measure<T>,
    positions: &[T],
    window_length: T,
    dither_window: T,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Option<T>>>> {
    let rows: Vec<Vec<Option<T>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let da = dither(a, dither_window, &mut surrogate_rng(seed, i, 0))?;
            let db = dither(b, dither_window, &mut surrogate_rng(seed, i, 1))?;
            Ok(profile_values(da.times(), db.times(), measure, positions, window_length))
        })
        .collect::<Result<_>>()?;
    Ok((0..positions.len()).map(|l| rows.iter().map(|r| r[l]).collect()).collect())
}

/// Full detection on two trains sharing an analysis interval.
pub fn detect<T: Scalar>(a: &SpikeTrain<T>, b: &SpikeTrain<T>, config: &DetectConfig<T>) -> Result<Detection<T>> {
    check_window(config.window_length, config.step)?;
    config.surrogates.validate()?;
    if config.surrogates.count < 10 {
        return Err(Error::InvalidInput(format!(
            "detection needs at least 10 surrogates, got {}",
            config.surrogates.count
        )));
    }
    let (lo, hi) = common_interval(a, b)?;
    let (ca, cb) = (a.window(lo, (hi - lo).max(T::min_positive_value()))?, b.window(lo, (hi - lo).max(T::min_positive_value()))?);

    let correlogram = match cross_correlogram(&ca, &cb, config.cc_bin_width, config.cc_max_lag) {
        Ok(cc) => Some(cc),
        Err(Error::InsufficientBins(_)) => None,
        Err(e) => return Err(e),
    };
    let dither_choice = match config.surrogates.dither_window {
        DitherWindow::Fixed(w) => DitherChoice { window: w, local_minimum: true },
        DitherWindow::Auto => match &correlogram {
            Some(cc) if cc.values.len() >= 3 => select_dither_window(cc),
            _ => {
                return Err(Error::InvalidInput(
                    "automatic dither window needs a correlogram with at least 3 lags".into(),
                ))
            }
        },
    };

    let profile = DissimilarityProfile {
        measure: config.measure,
        window_length: config.window_length,
        step: config.step,
        positions: window_positions(lo, hi, config.window_length, config.step),
        values: Vec::new(),
    };
    let values = profile_values(ca.times(), cb.times(), &config.measure, &profile.positions, config.window_length);
    let profile = DissimilarityProfile { values, ..profile };

    let columns = surrogate_columns(
        &ca,
        &cb,
        &config.measure,
        &profile.positions,
        config.window_length,
        dither_choice.window,
        config.surrogates.count,
        config.surrogates.seed,
    )?;
    let columns = if config.normalize { quantile_normalize(&columns)?.columns } else { columns };
    let band = acceptance_band(&columns, &profile.positions, config.confidence)?;
    let anomalies = extract_anomalies(&profile, &band);
    Ok(Detection { profile, band, anomalies, correlogram, dither: dither_choice })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::SECONDS_PER_DAY;

    fn train(times: Vec<f64>, end: f64) -> SpikeTrain<f64> {
        SpikeTrain::new("S", 0.0, end, times).unwrap()
    }

    #[test]
    fn positions_stop_at_interval_end() {
        let p = window_positions(0.0, 10.0, 4.0, 2.0);
        assert_eq!(p, vec![0.0, 2.0, 4.0, 6.0]);
        assert!(window_positions(0.0, 3.0, 4.0, 1.0).is_empty());
        let d: f64 = days(60.0);
        let p = window_positions(0.0, d, days(2.0), hours(1.0));
        assert_eq!(p.len(), 58 * 24 + 1);
    }

    #[test]
    fn identical_trains_give_zero_vp_profile() {
        let t = train((0..50).map(|i| i as f64 * 7000.0).collect(), 5.0 * SECONDS_PER_DAY);
        let prof = sliding_profile(&t, &t, &Measure::vp(100.0).unwrap(), days(2.0), hours(1.0)).unwrap();
        assert!(prof.values.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn vp_against_empty_station_declines() {
        let d = SECONDS_PER_DAY;
        let a = train((0..10).map(|i| 0.1 * d + i as f64 * 0.19 * d).collect(), 6.0 * d);
        let b = train(vec![], 6.0 * d);
        let prof = sliding_profile(&a, &b, &Measure::vp(100.0).unwrap(), days(2.0), hours(1.0)).unwrap();
        assert_eq!(prof.values[0], Some(10.0));
        let vals: Vec<f64> = prof.values.iter().map(|v| v.unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*vals.last().unwrap(), 0.0);
    }

    #[test]
    fn cs_profile_missing_for_empty_windows() {
        let d = SECONDS_PER_DAY;
        let a = train(vec![0.5 * d, 5.5 * d], 6.0 * d);
        let prof = sliding_profile(&a, &a, &Measure::cs(2.5).unwrap(), days(1.0), days(1.0)).unwrap();
        assert_eq!(prof.values, vec![Some(0.0), None, None, None, None, Some(0.0)]);
    }

    fn band_of(upper: Vec<Option<f64>>) -> AcceptanceBand<f64> {
        let n = upper.len();
        AcceptanceBand { positions: (0..n).map(|i| i as f64).collect(), lower: upper.clone(), upper, confidence: 0.9 }
    }

    #[test]
    fn anomalies_are_maximal_runs() {
        let profile = DissimilarityProfile {
            measure: Measure::vp(1.0).unwrap(),
            window_length: 2.0,
            step: 1.0,
            positions: (0..8).map(|i| i as f64).collect(),
            values: vec![Some(5.0), Some(1.0), Some(3.0), Some(4.0), None, Some(6.0), Some(2.0), Some(9.0)],
        };
        let band = band_of(vec![Some(2.0); 8]);
        let an = extract_anomalies(&profile, &band);
        let spans: Vec<(String, f64, f64, f64)> =
            an.iter().map(|a| (a.label.clone(), a.onset, a.offset, a.peak_excess)).collect();
        assert_eq!(
            spans,
            vec![
                ("A1".into(), 0.0, 0.0, 3.0),
                ("A2".into(), 2.0, 3.0, 2.0),
                ("A3".into(), 5.0, 5.0, 4.0),
                ("A4".into(), 7.0, 7.0, 7.0),
            ]
        );
        validate_anomalies(&profile, &band, &an).unwrap();
        assert_eq!(an[1].warning_onset(), 4.0);
        let mut bad = an.clone();
        bad[0].offset = 1.0;
        assert!(validate_anomalies(&profile, &band, &bad).is_err());
    }

    #[test]
    fn zero_dither_on_identical_trains_flags_nothing() {
        let d = SECONDS_PER_DAY;
        let t = train((0..80).map(|i| (i as f64 * 0.37 * d) % (10.0 * d)).collect(), 10.0 * d);
        let cfg = DetectConfig {
            measure: Measure::vp(100.0).unwrap(),
            surrogates: SurrogateParams { count: 20, dither_window: DitherWindow::Fixed(0.0), seed: 3 },
            ..DetectConfig::default()
        };
        let det = detect(&t, &t, &cfg).unwrap();
        assert!(det.anomalies.is_empty());
        assert!(det.profile.values.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn detect_requires_ten_surrogates() {
        let t = train(vec![1.0], 10.0 * SECONDS_PER_DAY);
        let cfg = DetectConfig::<f64> {
            surrogates: SurrogateParams { count: 5, dither_window: DitherWindow::Fixed(0.0), seed: 0 },
            ..DetectConfig::default()
        };
        assert!(detect(&t, &t, &cfg).is_err());
    }
}
