//! Seeded synthetic station pairs: inhomogeneous Poisson trains by thinning,
//! and common-input coupled pairs with injected episodes.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};
use crate::spiketrain::SpikeTrain;
use crate::units::SECONDS_PER_DAY;

fn open_unit<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    // (0, 1]
    T::one() - Uniform::new(T::zero(), T::one()).unwrap().sample(rng)
}

/// Homogeneous Poisson arrivals on `[start, end]` at `rate_per_day`.
pub fn homogeneous<T: Scalar, R: Rng + ?Sized>(rate_per_day: T, start: T, end: T, rng: &mut R) -> Vec<T> {
    let mut out = Vec::new();
    if !(rate_per_day > T::zero()) {
        return out;
    }
    let rate = rate_per_day / T::lit(SECONDS_PER_DAY);
    let mut t = start;
    loop {
        t = t - open_unit::<T, R>(rng).ln() / rate;
        if t > end {
            return out;
        }
        out.push(t);
    }
}

/// Inhomogeneous Poisson train by thinning: candidates at `max_rate`
/// (events/day) are kept with probability `rate_fn(t) / max_rate`.
pub fn gen_poisson_with<T, F, R>(
    station_id: &str,
    rate_fn: F,
    max_rate: T,
    start: T,
    end: T,
    rng: &mut R,
) -> Result<SpikeTrain<T>>
where
    T: Scalar,
    F: Fn(T) -> T,
    R: Rng + ?Sized,
{
    if !max_rate.is_finite() || max_rate < T::zero() {
        return Err(Error::InvalidInput(format!("maximum rate must be finite and >= 0, got {max_rate}")));
    }
    let candidates = homogeneous(max_rate, start, end, rng);
    let coin = Uniform::new(T::zero(), T::one()).unwrap();
    let mut kept = Vec::with_capacity(candidates.len());
    for t in candidates {
        let r = rate_fn(t);
        if !r.is_finite() || r < T::zero() {
            return Err(Error::InvalidInput(format!("rate at t={t} is {r}; must be finite and >= 0")));
        }
        if r > max_rate * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidInput(format!("rate {r} at t={t} exceeds declared maximum {max_rate}")));
        }
        if coin.sample(rng) * max_rate < r {
            kept.push(t);
        }
    }
    SpikeTrain::new(station_id, start, end, kept)
}

pub fn gen_poisson<T: Scalar, F: Fn(T) -> T>(
    station_id: &str,
    rate_fn: F,
    max_rate: T,
    start: T,
    end: T,
    seed: u64,
) -> Result<SpikeTrain<T>> {
    gen_poisson_with(station_id, rate_fn, max_rate, start, end, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpisodeMode<T = f64> {
    /// Shared events are removed. Station A is refilled at the base rate,
    /// station B at `rate_factor` times the base rate, its events arriving
    /// in bursts of `burst_size` spikes spread uniformly over
    /// `±burst_spread` seconds around each burst center.
    Decouple { rate_factor: T, burst_size: usize, burst_spread: T },
    /// Coupling kept; station B's rate scaled by `factor`.
    RateShift { factor: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode<T = f64> {
    pub start: T,
    pub end: T,
    #[serde(flatten)]
    pub mode: EpisodeMode<T>,
}

impl<T: Scalar> Episode<T> {
    /// Plain decoupling: coincidences removed, rates unchanged.
    pub fn decouple(start: T, end: T) -> Self {
        Self { start, end, mode: EpisodeMode::Decouple { rate_factor: T::one(), burst_size: 1, burst_spread: T::zero() } }
    }

    fn contains(&self, t: T) -> bool {
        t >= self.start && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPairConfig<T = f64> {
    pub station_a: String,
    pub station_b: String,
    pub start: T,
    pub end: T,
    /// Events per day at each station.
    pub base_rate: T,
    /// Fraction of mother events seen by both stations.
    pub coincidence_fraction: T,
    /// Each station observes a shared event displaced uniformly within
    /// `±jitter` seconds.
    pub jitter: T,
    pub episodes: Vec<Episode<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T = f64> {
    pub seed: u64,
    pub base_rate: T,
    pub coincidence_fraction: T,
    pub jitter: T,
    pub episodes: Vec<Episode<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair<T = f64> {
    pub a: SpikeTrain<T>,
    pub b: SpikeTrain<T>,
    pub truth: GroundTruth<T>,
}

/// Sorts episodes and rejects overlapping or malformed ones.
pub fn validate_episodes<T: Scalar>(episodes: &[Episode<T>]) -> Result<Vec<Episode<T>>> {
    let mut eps = episodes.to_vec();
    for e in &eps {
        if !(e.start < e.end) {
            return Err(Error::InvalidInput(format!("episode [{}, {}] is empty", e.start, e.end)));
        }
        match e.mode {
            EpisodeMode::Decouple { rate_factor, burst_size, burst_spread } => {
                if !(rate_factor >= T::zero()) || burst_size == 0 || !(burst_spread >= T::zero()) {
                    return Err(Error::InvalidInput("invalid decouple episode parameters".into()));
                }
            }
            EpisodeMode::RateShift { factor } => {
                if !(factor >= T::zero()) {
                    return Err(Error::InvalidInput(format!("rate factor must be >= 0, got {factor}")));
                }
            }
        }
    }
    eps.sort_by(|x, y| total_cmp(&x.start, &y.start));
    for w in eps.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::OverlappingEpisodes(
                w[0].start.as_f64(),
                w[0].end.as_f64(),
                w[1].start.as_f64(),
                w[1].end.as_f64(),
            ));
        }
    }
    Ok(eps)
}

/// Mother-daughter coupled pair. A mother Poisson process at
/// `2·base_rate / (1 + f)` feeds both stations: each mother event is shared
/// with probability `f` (each station jittering it independently), otherwise
/// it goes to one station chosen at random, so each station runs at
/// `base_rate`.
pub fn gen_coupled_pair<T: Scalar>(config: &CoupledPairConfig<T>, seed: u64) -> Result<CoupledPair<T>> {
    let f = config.coincidence_fraction;
    if !(f >= T::zero() && f <= T::one()) {
        return Err(Error::InvalidInput(format!("coincidence fraction must be in [0, 1], got {f}")));
    }
    if !(config.base_rate >= T::zero()) || !config.base_rate.is_finite() {
        return Err(Error::InvalidInput(format!("base rate must be finite and >= 0, got {}", config.base_rate)));
    }
    if !(config.jitter >= T::zero()) || !(config.start <= config.end) {
        return Err(Error::InvalidInput("jitter must be >= 0 and start <= end".into()));
    }
    let episodes = validate_episodes(&config.episodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coin = Uniform::new(T::zero(), T::one()).unwrap();
    let jitter = |rng: &mut ChaCha8Rng, t: T, j: T| -> T {
        if j > T::zero() {
            t + Uniform::new_inclusive(-j, j).unwrap().sample(rng)
        } else {
            t
        }
    };
    let episode_at = |t: T| episodes.iter().find(|e| e.contains(t));

    let two = T::lit(2.0);
    let mother_rate = two * config.base_rate / (T::one() + f);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in homogeneous(mother_rate, config.start, config.end, &mut rng) {
        let ep = episode_at(t);
        if matches!(ep.map(|e| e.mode), Some(EpisodeMode::Decouple { .. })) {
            continue;
        }
        let keep_b = match ep.map(|e| e.mode) {
            Some(EpisodeMode::RateShift { factor }) if factor < T::one() => coin.sample(&mut rng) < factor,
            _ => true,
        };
        if coin.sample(&mut rng) < f {
            a.push(jitter(&mut rng, t, config.jitter));
            let tb = jitter(&mut rng, t, config.jitter);
            if keep_b {
                b.push(tb);
            }
        } else if coin.sample(&mut rng) < T::lit(0.5) {
            a.push(jitter(&mut rng, t, config.jitter));
        } else {
            let tb = jitter(&mut rng, t, config.jitter);
            if keep_b {
                b.push(tb);
            }
        }
    }

    for e in &episodes {
        match e.mode {
            EpisodeMode::Decouple { rate_factor, burst_size, burst_spread } => {
                a.extend(homogeneous(config.base_rate, e.start, e.end, &mut rng));
                let burst_rate = config.base_rate * rate_factor / T::from_usize(burst_size).unwrap();
                for c in homogeneous(burst_rate, e.start, e.end, &mut rng) {
                    for _ in 0..burst_size {
                        b.push(jitter(&mut rng, c, burst_spread));
                    }
                }
            }
            EpisodeMode::RateShift { factor } => {
                if factor > T::one() {
                    b.extend(homogeneous(config.base_rate * (factor - T::one()), e.start, e.end, &mut rng));
                }
            }
        }
    }

    let a = SpikeTrain::clipped(config.station_a.clone(), config.start, config.end, a)?;
    let b = SpikeTrain::clipped(config.station_b.clone(), config.start, config.end, b)?;
    let truth = GroundTruth {
        seed,
        base_rate: config.base_rate,
        coincidence_fraction: f,
        jitter: config.jitter,
        episodes,
    };
    Ok(CoupledPair { a, b, truth })
}
