//! Seed-deterministic random streams and the distribution families used by
//! the scenario descriptors.
//!
//! Every stream is derived from a `(base_seed, config_index, replicate_index)`
//! triple, so a whole campaign is a pure function of its base seed. A second
//! stream family that ignores the configuration index carries the patient
//! population draws, which is what makes common random numbers across
//! configurations work.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Error;

const TWO_POW_NEG_53: f64 = 1.0 / 9007199254740992.0;
const DOMAIN_DYNAMICS: u64 = 0x01;
const DOMAIN_POPULATION: u64 = 0x02;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner deterministic random stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    draws: u64,
}

impl RandomSource {
    /// Builds the stream used for in-day dynamics (batch sizes, courier
    /// delays). Distinct triples yield independent streams.
    pub fn make_stream(base_seed: u64, config_index: u64, replicate_index: u64) -> Self {
        Self::derive(DOMAIN_DYNAMICS, base_seed, config_index, replicate_index)
    }

    /// Builds the stream that samples the patient population for one
    /// replicate. It deliberately ignores the configuration index so that
    /// replicate `i` of every configuration sees the same underlying draws.
    pub fn population_stream(base_seed: u64, replicate_index: u64) -> Self {
        Self::derive(DOMAIN_POPULATION, base_seed, 0, replicate_index)
    }

    fn derive(domain: u64, base_seed: u64, config_index: u64, replicate_index: u64) -> Self {
        let mut state = splitmix64(base_seed ^ 0x243F_6A88_85A3_08D3);
        for v in [domain, config_index, replicate_index] {
            state = splitmix64(state ^ splitmix64(v.wrapping_add(0xA5A5_A5A5_A5A5_A5A5)));
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RandomSource {
            rng: ChaCha8Rng::from_seed(seed),
            draws: 0,
        }
    }

    /// Number of values consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }
}

/// One of the distribution families appearing in the model descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal { mu: f64, sigma: f64 },
    UniformReal { a: f64, b: f64 },
    UniformInt { a: i64, b: i64 },
    Categorical { weights: Vec<f64> },
    Constant { v: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            DistributionSpec::Normal { sigma, .. } => {
                if !(*sigma >= 0.0) {
                    return Err(Error::validation("sigma", "must be >= 0"));
                }
            }
            DistributionSpec::UniformReal { a, b } => {
                if !(b >= a) {
                    return Err(Error::validation("uniform_real", "requires a <= b"));
                }
            }
            DistributionSpec::UniformInt { a, b } => {
                if b < a {
                    return Err(Error::validation("uniform_int", "requires a <= b"));
                }
            }
            DistributionSpec::Categorical { weights } => {
                if weights.is_empty() {
                    return Err(Error::validation("weights", "must be non-empty"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::validation("weights", "must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(
                        "weights",
                        format!("must sum to 1 (got {total})"),
                    ));
                }
            }
            DistributionSpec::Constant { .. } => {}
        }
        Ok(())
    }
}

/// Draws one value from the named family. `uniform_int` is inclusive of both
/// bounds; `categorical` returns the selected index as a real.
pub fn sample(spec: &DistributionSpec, src: &mut RandomSource) -> Result<f64, Error> {
    spec.validate()?;
    Ok(match spec {
        DistributionSpec::Normal { mu, sigma } => {
            // Box-Muller: always consumes exactly two draws, which keeps
            // parallel streams aligned across configurations.
            let u1 = src.next_f64().max(f64::MIN_POSITIVE);
            let u2 = src.next_f64();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            mu + sigma * z
        }
        DistributionSpec::UniformReal { a, b } => a + src.next_f64() * (b - a),
        DistributionSpec::UniformInt { a, b } => {
            let span = (b - a + 1) as f64;
            let v = *a + (src.next_f64() * span).floor() as i64;
            v.min(*b) as f64
        }
        DistributionSpec::Categorical { weights } => categorical_index(weights, src) as f64,
        DistributionSpec::Constant { v } => *v,
    })
}

/// Selects an index with the given weights. Weights are assumed valid.
pub fn categorical_index(weights: &[f64], src: &mut RandomSource) -> usize {
    let u = src.next_f64();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Number of patients for the day: round-to-nearest of a normal draw,
/// clamped below at 1.
pub fn sample_patient_count(mu: f64, sigma: f64, src: &mut RandomSource) -> u32 {
    let spec = DistributionSpec::Normal { mu, sigma };
    let v = sample(&spec, src).expect("normal spec with sigma >= 0 is valid");
    v.round().max(1.0) as u32
}

/// An arrival window, as seconds offset from day open, with its occurrence
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalWindow {
    pub start_offset: u64,
    pub end_offset: u64,
    pub probability: f64,
}

impl ArrivalWindow {
    pub fn validate(windows: &[ArrivalWindow]) -> Result<(), Error> {
        if windows.is_empty() {
            return Err(Error::validation("arrival_windows", "must be non-empty"));
        }
        for w in windows {
            if w.start_offset >= w.end_offset {
                return Err(Error::validation(
                    "arrival_windows",
                    "window start must precede its end",
                ));
            }
            if !(0.0..=1.0).contains(&w.probability) {
                return Err(Error::validation(
                    "arrival_windows",
                    "probability must lie in [0, 1]",
                ));
            }
        }
        let total: f64 = windows.iter().map(|w| w.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "arrival_windows",
                format!("probabilities must sum to 1 (got {total})"),
            ));
        }
        Ok(())
    }
}

/// Draws an arrival time: a window chosen by its probability, then a whole
/// minute uniform within the window's first hour, returned as seconds from
/// day open.
pub fn sample_arrival(windows: &[ArrivalWindow], src: &mut RandomSource) -> u64 {
    let weights: Vec<f64> = windows.iter().map(|w| w.probability).collect();
    let idx = categorical_index(&weights, src);
    let w = &windows[idx];
    // The whole-minute offset within the window is drawn from U[0, 59]
    // regardless of the window's length (capped to the window when it is
    // shorter than an hour), so windows longer than an hour front-load
    // their arrivals into the first 60 minutes.
    let minutes = ((w.end_offset - w.start_offset) / 60).min(60);
    let m = ((src.next_f64() * minutes as f64).floor() as u64).min(minutes - 1);
    w.start_offset + m * 60
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_triple_gives_identical_sequences() {
        let mut a = RandomSource::make_stream(42, 0, 0);
        let mut b = RandomSource::make_stream(42, 0, 0);
        for _ in 0..1000 {
            assert_eq!(a.next_f64().to_bits(), b.next_f64().to_bits());
        }
        assert_eq!(a.draws(), 1000);
    }

    #[test]
    fn distinct_triples_give_distinct_sequences() {
        let mut a = RandomSource::make_stream(42, 0, 0);
        let mut b = RandomSource::make_stream(42, 0, 1);
        let mut c = RandomSource::make_stream(42, 1, 0);
        let mut differs_ab = false;
        let mut differs_ac = false;
        for _ in 0..1000 {
            let x = a.next_f64();
            differs_ab |= x != b.next_f64();
            differs_ac |= x != c.next_f64();
        }
        assert!(differs_ab);
        assert!(differs_ac);
    }

    #[test]
    fn uniform_mean_converges() {
        let mut src = RandomSource::make_stream(7, 3, 5);
        let spec = DistributionSpec::UniformReal { a: 0.0, b: 1.0 };
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample(&spec, &mut src).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn degenerate_samples() {
        let mut src = RandomSource::make_stream(1, 0, 0);
        let n = sample(&DistributionSpec::Normal { mu: 28.07, sigma: 0.0 }, &mut src).unwrap();
        assert_eq!(n, 28.07);
        let c = sample(
            &DistributionSpec::Categorical { weights: vec![1.0, 0.0, 0.0] },
            &mut src,
        )
        .unwrap();
        assert_eq!(c, 0.0);
        let u = sample(&DistributionSpec::UniformInt { a: 3, b: 3 }, &mut src).unwrap();
        assert_eq!(u, 3.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut src = RandomSource::make_stream(1, 0, 0);
        assert!(sample(&DistributionSpec::UniformReal { a: 2.0, b: 1.0 }, &mut src).is_err());
        assert!(sample(&DistributionSpec::Categorical { weights: vec![] }, &mut src).is_err());
        assert!(
            sample(&DistributionSpec::Categorical { weights: vec![0.4, 0.4] }, &mut src).is_err()
        );
        assert!(sample(&DistributionSpec::Normal { mu: 0.0, sigma: -1.0 }, &mut src).is_err());
    }

    #[test]
    fn patient_count_rules() {
        let mut src = RandomSource::make_stream(1, 0, 0);
        assert_eq!(sample_patient_count(28.07, 0.0, &mut src), 28);
        assert_eq!(sample_patient_count(0.2, 0.0, &mut src), 1);
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| sample_patient_count(28.07, 3.94, &mut src) as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 28.07).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn patient_count_is_at_least_one() {
        let mut src = RandomSource::make_stream(9, 0, 0);
        for _ in 0..100_000 {
            assert!(sample_patient_count(2.0, 5.0, &mut src) >= 1);
        }
    }

    #[test]
    fn arrival_single_window_stays_on_whole_minutes() {
        let windows = vec![ArrivalWindow {
            start_offset: 1800,
            end_offset: 5400,
            probability: 1.0,
        }];
        let mut src = RandomSource::make_stream(3, 0, 0);
        for _ in 0..10_000 {
            let t = sample_arrival(&windows, &mut src);
            assert!((1800..5400).contains(&t));
            assert_eq!(t % 60, 0);
        }
    }

    #[test]
    fn arrival_window_frequencies_match_probabilities() {
        // Status-quo windows; checks the first window's empirical frequency.
        let windows = crate::scenario::table2_arrival_windows();
        let mut src = RandomSource::make_stream(11, 0, 0);
        let n = 1_000_000;
        let mut first = 0u32;
        for _ in 0..n {
            let t = sample_arrival(&windows, &mut src);
            if t < 5400 {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.5658).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn categorical_frequencies_converge() {
        let weights = [0.7138, 0.2034, 0.0828];
        let mut src = RandomSource::make_stream(5, 0, 0);
        let n = 1_000_000usize;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            counts[categorical_index(&weights, &mut src)] += 1;
        }
        for (w, c) in weights.iter().zip(&counts) {
            let freq = *c as f64 / n as f64;
            let se = (w * (1.0 - w) / n as f64).sqrt();
            assert!((freq - w).abs() < 3.0 * se, "freq {freq} vs weight {w}");
        }
    }

    proptest! {
        #[test]
        fn uniform_samples_stay_in_bounds(a in -1000i64..1000, span in 0i64..500, seed in 0u64..1000) {
            let b = a + span;
            let mut src = RandomSource::make_stream(seed, 0, 0);
            let spec = DistributionSpec::UniformInt { a, b };
            for _ in 0..200 {
                let v = sample(&spec, &mut src).unwrap() as i64;
                prop_assert!(v >= a && v <= b);
            }
            let real = DistributionSpec::UniformReal { a: a as f64, b: b as f64 };
            for _ in 0..200 {
                let v = sample(&real, &mut src).unwrap();
                prop_assert!(v >= a as f64 && v <= b as f64);
            }
        }
    }
}
