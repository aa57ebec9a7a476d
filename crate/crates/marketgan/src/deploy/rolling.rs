//! The rolling multi-round prediction strategy.
//!
//! To predict day `t'`, round `j` (for `j = 1..=q`) feeds the generator
//! the `w` feature rows ending `j` days before `t'` and takes position
//! `j` of the generated sequence — the element that lands on `t'`. The
//! `q` extracted values are averaged into the day's return estimate; its
//! sign (ties down) is the movement call. Averaging across rounds smooths
//! single-window noise without ever touching rows at or after `t'`.

use std::ops::Range;

use chrono::NaiveDate;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Phase, Tensor};
use crate::marketdata::movement_sign;
use crate::networks::{generator_forward, GeneratorInputs, Mount, NoiseSpec};
use crate::training::Checkpoint;

use super::{DeployError, DeploymentData};

/// Anything that can turn a `window()`-row history block into a
/// `horizon()`-long return sequence. Implemented by
/// [`CheckpointGenerator`] for trained models and by hand-rolled stubs
/// in tests, where the rolling index arithmetic is checked against
/// brute-force enumeration.
pub trait SequenceGenerator {
    /// History rows each round consumes.
    fn window(&self) -> usize;

    /// Length of each generated sequence, which is also the number of
    /// rolling rounds.
    fn horizon(&self) -> usize;

    /// Generates one sequence from the feature rows in `history`
    /// (end-exclusive). Must return exactly `horizon()` values.
    fn generate(
        &mut self,
        data: &DeploymentData,
        history: Range<usize>,
    ) -> Result<Vec<f64>, DeployError>;
}

/// One day's rolling prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub target_date: NaiveDate,
    /// Position-`j` output of round `j`, for `j = 1..=q`.
    pub round_returns: Vec<f64>,
    /// Arithmetic mean of `round_returns`.
    pub mean_return: f64,
    /// Sign of the mean: +1 up, -1 down (an exact zero counts as down).
    pub movement: i8,
}

/// One row of a prediction file: either a prediction or an explicit
/// failure, so a requested date range never has silent holes.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub date: NaiveDate,
    /// `None` when this date could not be predicted; `status` says why.
    pub prediction: Option<PredictionRecord>,
    /// `"ok"` or the reason the date failed.
    pub status: String,
}

impl PredictionRow {
    fn ok(prediction: PredictionRecord) -> Self {
        PredictionRow {
            date: prediction.target_date,
            prediction: Some(prediction),
            status: "ok".into(),
        }
    }
}

/// Predicts row `target` of `data` (or `target == data.len()` for the
/// day after the data ends) by averaging the `q` rolling rounds.
///
/// Every round reads rows strictly before `target`, so the prediction
/// cannot look ahead. Fails when fewer than `w + q - 1` rows precede the
/// target, naming the earliest date the data covers.
pub fn rolling_predict(
    generator: &mut dyn SequenceGenerator,
    data: &DeploymentData,
    target: usize,
) -> Result<PredictionRecord, DeployError> {
    let w = generator.window();
    let q = generator.horizon();
    if w == 0 || q == 0 {
        return Err(DeployError::Data(format!(
            "generator reports a degenerate shape (window {w}, horizon {q})"
        )));
    }
    if target > data.len() {
        return Err(DeployError::Data(format!(
            "target row {target} is out of range: the data has {} days, so {} \
             (the next day) is the furthest predictable row",
            data.len(),
            data.len()
        )));
    }
    // Round q reaches back to row target - w - q + 1.
    if target + 1 < w + q {
        return Err(DeployError::History {
            target: data.target_date(target),
            needed: w + q - 1,
            earliest: data.dates()[0],
        });
    }

    let mut round_returns = Vec::with_capacity(q);
    for j in 1..=q {
        let history = (target + 1 - w - j)..(target + 1 - j);
        let sequence = generator.generate(data, history)?;
        if sequence.len() != q {
            return Err(DeployError::Data(format!(
                "generator produced {} values where the horizon is {q}",
                sequence.len()
            )));
        }
        round_returns.push(sequence[j - 1]);
    }
    let mean_return = round_returns.iter().sum::<f64>() / q as f64;
    Ok(PredictionRecord {
        target_date: data.target_date(target),
        round_returns,
        mean_return,
        movement: movement_sign(mean_return),
    })
}

/// Runs [`rolling_predict`] for every trading day of `data` within
/// `[from, to]`, in order. Days without enough history become explicit
/// error rows; any other failure aborts the range.
pub fn rolling_predict_range(
    generator: &mut dyn SequenceGenerator,
    data: &DeploymentData,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<Vec<PredictionRow>, DeployError> {
    if from > to {
        return Err(DeployError::Data(format!(
            "date range starts at {from} but ends earlier, at {to}"
        )));
    }
    let mut rows = Vec::new();
    for (t, date) in data.dates().iter().enumerate() {
        if *date < from || *date > to {
            continue;
        }
        match rolling_predict(generator, data, t) {
            Ok(p) => rows.push(PredictionRow::ok(p)),
            Err(e @ DeployError::History { .. }) => rows.push(PredictionRow {
                date: *date,
                prediction: None,
                status: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(DeployError::Data(format!(
            "no trading days between {from} and {to}"
        )));
    }
    Ok(rows)
}

/// How deployment fills the generator's noise input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// The distribution mean (all zeros): fully deterministic output.
    Zero,
    /// Average each round over this many sampled noise draws.
    MonteCarlo { draws: usize },
}

/// A trained model as a [`SequenceGenerator`]: batch-1 forward passes
/// with norm layers in eval mode, noise handled per [`NoiseMode`].
///
/// Monte-Carlo draws come from the checkpoint's stored RNG state, so
/// repeated deployments of the same file produce identical predictions.
pub struct CheckpointGenerator<'a> {
    checkpoint: &'a Checkpoint,
    state: crate::networks::GeneratorState,
    noise: NoiseSpec,
    mode: NoiseMode,
    rng: ChaCha8Rng,
}

impl std::fmt::Debug for CheckpointGenerator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckpointGenerator")
            .field("window", &self.checkpoint.config.window)
            .field("horizon", &self.checkpoint.config.horizon)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl<'a> CheckpointGenerator<'a> {
    pub fn new(checkpoint: &'a Checkpoint, mode: NoiseMode) -> Result<Self, DeployError> {
        if let NoiseMode::MonteCarlo { draws: 0 } = mode {
            return Err(DeployError::Data(
                "monte-carlo averaging needs at least one draw".into(),
            ));
        }
        Ok(CheckpointGenerator {
            checkpoint,
            state: checkpoint.generator_state.clone(),
            noise: checkpoint.config.noise_spec()?,
            mode,
            rng: checkpoint.rng.restore(),
        })
    }
}

impl SequenceGenerator for CheckpointGenerator<'_> {
    fn window(&self) -> usize {
        self.checkpoint.config.window
    }

    fn horizon(&self) -> usize {
        self.checkpoint.config.horizon
    }

    fn generate(
        &mut self,
        data: &DeploymentData,
        history: Range<usize>,
    ) -> Result<Vec<f64>, DeployError> {
        let config = &self.checkpoint.config;
        let w = config.window;
        if history.end - history.start != w || history.end > data.len() {
            return Err(DeployError::Data(format!(
                "history rows {}..{} do not form a {w}-day window inside {} days of data",
                history.start,
                history.end,
                data.len()
            )));
        }
        let p = data.features().cols();
        if p != self.checkpoint.feature_dim {
            return Err(DeployError::Data(format!(
                "data has {p} features per day but the model was trained on {}",
                self.checkpoint.feature_dim
            )));
        }
        let feature_data = data.features().data();
        let features: Vec<Tensor> = history
            .clone()
            .map(|r| Tensor::from_vec(1, p, feature_data[r * p..(r + 1) * p].to_vec()))
            .collect::<Result<_, _>>()?;
        let news = if config.use_news {
            let news = data.news().ok_or_else(|| {
                DeployError::Data(
                    "the model uses news but the deployment data has no news tensor".into(),
                )
            })?;
            let d = news.cols();
            let want = config.headline_slots * config.embedding_dim;
            if d != want {
                return Err(DeployError::Data(format!(
                    "news tensor has {d} columns but the model expects {want}"
                )));
            }
            let mut rows = Vec::with_capacity(w * d);
            for r in history.clone() {
                rows.extend_from_slice(&news.data()[r * d..(r + 1) * d]);
            }
            Some(Tensor::from_vec(w, d, rows)?)
        } else {
            None
        };

        let draws = match self.mode {
            NoiseMode::Zero => 1,
            NoiseMode::MonteCarlo { draws } => draws,
        };
        let mut mean = vec![0.0; config.horizon];
        for _ in 0..draws {
            let mut graph = Graph::new();
            let z = match self.mode {
                NoiseMode::Zero => self.noise.zeros(1, w),
                NoiseMode::MonteCarlo { .. } => self.noise.sample(1, w, &mut self.rng),
            };
            let inputs = GeneratorInputs {
                noise: z.into_iter().map(|t| graph.constant(t)).collect(),
                features: features.iter().map(|t| graph.constant(t.clone())).collect(),
                news: news.as_ref().map(|t| graph.constant(t.clone())),
            };
            let out = generator_forward(
                &mut graph,
                Mount::frozen(&self.checkpoint.generator_set),
                &self.checkpoint.generator,
                &mut self.state,
                &inputs,
                Phase::Eval,
            )?;
            for (m, v) in mean.iter_mut().zip(graph.value(out).data()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= draws as f64;
        }
        Ok(mean)
    }
}
