//! Deterministic synthetic market data with a planted directional signal.
//!
//! Real index data needs years of history before a directional model can
//! be evaluated, and its predictability is unknown — useless for testing
//! whether the pipeline *can* learn. This module fabricates a series
//! whose next-day movement is knowable by construction: a hidden ±1
//! regime flips with small probability each day, one designated feature
//! column exposes the current regime (plus a little noise), and the next
//! day's movement copies the regime at a configurable fidelity. A model
//! that reads the designated column can reach `fidelity` directional
//! accuracy one step ahead; nothing can do better. Classes stay balanced
//! because the regime chain is symmetric.
//!
//! All draws come from a [`ChaCha8Rng`] seeded from the config, so the
//! same config always yields the same dataset.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Tensor;
use crate::deploy::DeploymentData;
use crate::marketdata::{make_windows, MarketDataError, TargetReturn, TrainingWindow};
use crate::training::{TrainingError, TrainingSet};

/// Column index of the feature that exposes the hidden regime.
pub const SIGNAL_COLUMN: usize = 0;

/// Smallest and largest per-day return magnitude the generator draws;
/// strictly positive so a return's sign always equals its movement.
pub const MAGNITUDE_RANGE: (f64, f64) = (0.005, 0.02);

/// Parameters of the planted-signal generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedSignalConfig {
    /// Trading days in the emitted dataset.
    pub steps: usize,
    /// Feature columns; all but [`SIGNAL_COLUMN`] are pure noise.
    pub feature_dim: usize,
    /// Probability that a day's movement copies the previous day's
    /// regime (the rest of the time it is inverted). 0.5 is pure noise,
    /// 1.0 a perfectly predictable series.
    pub fidelity: f64,
    /// Per-day probability that the hidden regime flips sign. Small
    /// values make the regime persistent, so the signal stays readable
    /// several days ahead.
    pub flip_prob: f64,
    /// RNG seed; everything else follows deterministically.
    pub seed: u64,
}

impl Default for PlantedSignalConfig {
    fn default() -> Self {
        PlantedSignalConfig {
            steps: 2000,
            feature_dim: 5,
            fidelity: 0.8,
            flip_prob: 0.1,
            seed: 7,
        }
    }
}

impl PlantedSignalConfig {
    fn validate(&self) -> Result<(), MarketDataError> {
        if self.steps < 2 {
            return Err(MarketDataError::BadConfig(format!(
                "steps must be at least 2, got {}",
                self.steps
            )));
        }
        if self.feature_dim == 0 {
            return Err(MarketDataError::BadConfig(
                "feature_dim must be positive".into(),
            ));
        }
        if !(0.5..=1.0).contains(&self.fidelity) {
            return Err(MarketDataError::BadConfig(format!(
                "fidelity must lie in [0.5, 1], got {}",
                self.fidelity
            )));
        }
        if !(0.0..1.0).contains(&self.flip_prob) {
            return Err(MarketDataError::BadConfig(format!(
                "flip_prob must lie in [0, 1), got {}",
                self.flip_prob
            )));
        }
        Ok(())
    }
}

/// A generated dataset: feature rows, same-day returns, dates, and the
/// hidden regime, all aligned index-for-index.
#[derive(Clone, Debug)]
pub struct PlantedSignal {
    features: Tensor,
    targets: Vec<TargetReturn>,
    dates: Vec<NaiveDate>,
    regimes: Vec<i8>,
}

/// Generates a planted-signal dataset from the config.
///
/// Day `t`'s movement is drawn from day `t-1`'s regime: equal to it with
/// probability `fidelity`, inverted otherwise. The return magnitude is
/// uniform in [`MAGNITUDE_RANGE`]. The designated feature column holds
/// the *current* regime plus Gaussian noise small enough to never change
/// its sign in practice, so `sign(features[t][SIGNAL_COLUMN])` predicts
/// day `t+1`'s movement with exactly the configured fidelity.
pub fn planted_signal(config: &PlantedSignalConfig) -> Result<PlantedSignal, MarketDataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps = config.steps;
    let p = config.feature_dim;

    // Regime chain over one extra leading day: the first emitted day's
    // movement needs a predecessor regime.
    let mut chain = Vec::with_capacity(steps + 1);
    let mut regime: i8 = if rng.random::<bool>() { 1 } else { -1 };
    for _ in 0..=steps {
        chain.push(regime);
        if rng.random::<f64>() < config.flip_prob {
            regime = -regime;
        }
    }

    let mut cells = Vec::with_capacity(steps * p);
    let mut targets = Vec::with_capacity(steps);
    let mut dates = Vec::with_capacity(steps);
    let mut regimes = Vec::with_capacity(steps);
    let start = NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid fixed start date");
    for t in 0..steps {
        let today = chain[t + 1];
        let yesterday = chain[t];
        let movement = if rng.random::<f64>() < config.fidelity {
            yesterday
        } else {
            -yesterday
        };
        let magnitude = rng.random_range(MAGNITUDE_RANGE.0..MAGNITUDE_RANGE.1);
        targets.push(TargetReturn::new(f64::from(movement) * magnitude));
        for c in 0..p {
            let noise: f64 = rng.sample(StandardNormal);
            cells.push(if c == SIGNAL_COLUMN {
                f64::from(today) + 0.1 * noise
            } else {
                noise
            });
        }
        dates.push(start + chrono::Days::new(t as u64));
        regimes.push(today);
    }
    let features = Tensor::from_vec(steps, p, cells).expect("cell count matches steps * columns");
    Ok(PlantedSignal {
        features,
        targets,
        dates,
        regimes,
    })
}

impl PlantedSignal {
    /// Number of trading days.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Day-level feature matrix, `steps × feature_dim`.
    pub fn features(&self) -> &Tensor {
        &self.features
    }

    /// Same-day returns, aligned with [`PlantedSignal::features`].
    pub fn targets(&self) -> &[TargetReturn] {
        &self.targets
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// The hidden regime each day — the value the designated feature
    /// column exposes, and the driver of the *next* day's movement.
    pub fn regimes(&self) -> &[i8] {
        &self.regimes
    }

    /// Realized movement (±1) of each day.
    pub fn movements(&self) -> Vec<i8> {
        self.targets.iter().map(|t| t.movement).collect()
    }

    /// Fraction of days whose movement is up — class balance at a glance.
    pub fn up_fraction(&self) -> f64 {
        let ups = self.targets.iter().filter(|t| t.movement > 0).count();
        ups as f64 / self.targets.len() as f64
    }

    /// Stride-1 training windows of `w` history days and `q` targets.
    pub fn windows(&self, w: usize, q: usize) -> Result<Vec<TrainingWindow>, MarketDataError> {
        make_windows(&self.dates, &self.targets, w, q)
    }

    /// The whole series as one [`TrainingSet`] (no chronological split —
    /// callers that need held-out evaluation should partition the
    /// windows themselves).
    pub fn training_set(&self, w: usize, q: usize) -> Result<TrainingSet, TrainingError> {
        let windows = self
            .windows(w, q)
            .map_err(|e| TrainingError::Data(e.to_string()))?;
        TrainingSet::new(self.features.clone(), None, windows)
    }

    /// The whole series packaged for rolling deployment.
    pub fn deployment_data(&self) -> DeploymentData {
        DeploymentData::new(self.features.clone(), None, self.dates.clone())
            .expect("generated data is aligned and chronologically ordered")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_config_reproduces_the_dataset() {
        let config = PlantedSignalConfig::default();
        let a = planted_signal(&config).unwrap();
        let b = planted_signal(&config).unwrap();
        assert_eq!(a.targets, b.targets);
        assert_eq!(a.regimes, b.regimes);
        for t in 0..a.len() {
            for c in 0..config.feature_dim {
                assert_eq!(a.features.get(t, c), b.features.get(t, c));
            }
        }
        let c = planted_signal(&PlantedSignalConfig {
            seed: 8,
            ..config
        })
        .unwrap();
        assert_ne!(a.targets, c.targets, "a different seed must change the data");
    }

    #[test]
    fn movement_copies_the_previous_regime_at_the_configured_fidelity() {
        let data = planted_signal(&PlantedSignalConfig::default()).unwrap();
        let movements = data.movements();
        let hits = (1..data.len())
            .filter(|&t| movements[t] == data.regimes()[t - 1])
            .count();
        let rate = hits as f64 / (data.len() - 1) as f64;
        assert!(
            (0.75..=0.85).contains(&rate),
            "empirical fidelity {rate} strays from 0.8"
        );
    }

    #[test]
    fn classes_are_roughly_balanced() {
        let frac = planted_signal(&PlantedSignalConfig::default())
            .unwrap()
            .up_fraction();
        assert!((0.4..=0.6).contains(&frac), "up fraction {frac}");
    }

    #[test]
    fn the_signal_column_sign_always_matches_the_regime() {
        let data = planted_signal(&PlantedSignalConfig::default()).unwrap();
        for t in 0..data.len() {
            let sign: i8 = if data.features().get(t, SIGNAL_COLUMN) > 0.0 {
                1
            } else {
                -1
            };
            assert_eq!(sign, data.regimes()[t], "day {t}");
        }
    }

    #[test]
    fn regime_flips_at_roughly_the_configured_rate() {
        let data = planted_signal(&PlantedSignalConfig::default()).unwrap();
        let flips = (1..data.len())
            .filter(|&t| data.regimes()[t] != data.regimes()[t - 1])
            .count();
        let rate = flips as f64 / (data.len() - 1) as f64;
        assert!((0.07..=0.13).contains(&rate), "flip rate {rate}");
    }

    #[test]
    fn returns_have_the_promised_magnitudes_and_signs() {
        let data = planted_signal(&PlantedSignalConfig::default()).unwrap();
        for (t, target) in data.targets().iter().enumerate() {
            let mag = target.value.abs();
            assert!(
                (MAGNITUDE_RANGE.0..MAGNITUDE_RANGE.1).contains(&mag),
                "day {t}: magnitude {mag}"
            );
            assert_eq!(
                target.movement,
                if target.value > 0.0 { 1 } else { -1 },
                "day {t}"
            );
        }
    }

    #[test]
    fn dates_are_consecutive_and_increasing() {
        let data = planted_signal(&PlantedSignalConfig {
            steps: 50,
            ..PlantedSignalConfig::default()
        })
        .unwrap();
        assert_eq!(data.len(), 50);
        for pair in data.dates().windows(2) {
            assert_eq!(pair[1] - pair[0], chrono::Duration::days(1));
        }
    }

    #[test]
    fn training_set_has_the_requested_window_shape() {
        let data = planted_signal(&PlantedSignalConfig {
            steps: 100,
            ..PlantedSignalConfig::default()
        })
        .unwrap();
        let set = data.training_set(10, 5).unwrap();
        assert_eq!(set.window(), 10);
        assert_eq!(set.horizon(), 5);
        assert_eq!(set.feature_dim(), 5);
        assert_eq!(set.window_count(), 100 - 10 - 5 + 1);
    }

    #[test]
    fn deployment_data_covers_every_day() {
        let data = planted_signal(&PlantedSignalConfig {
            steps: 60,
            ..PlantedSignalConfig::default()
        })
        .unwrap();
        let deploy = data.deployment_data();
        assert_eq!(deploy.len(), 60);
        assert_eq!(deploy.dates(), data.dates());
    }

    #[test]
    fn bad_configs_are_rejected_with_the_offending_field() {
        let cases: [(PlantedSignalConfig, &str); 4] = [
            (
                PlantedSignalConfig {
                    steps: 1,
                    ..PlantedSignalConfig::default()
                },
                "steps",
            ),
            (
                PlantedSignalConfig {
                    feature_dim: 0,
                    ..PlantedSignalConfig::default()
                },
                "feature_dim",
            ),
            (
                PlantedSignalConfig {
                    fidelity: 0.3,
                    ..PlantedSignalConfig::default()
                },
                "fidelity",
            ),
            (
                PlantedSignalConfig {
                    flip_prob: 1.0,
                    ..PlantedSignalConfig::default()
                },
                "flip_prob",
            ),
        ];
        for (config, field) in cases {
            let err = planted_signal(&config).unwrap_err();
            assert!(err.to_string().contains(field), "{field}: got {err}");
        }
    }
}
