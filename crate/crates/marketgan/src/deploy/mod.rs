//! Rolling deployment and evaluation.
//!
//! A trained generator predicts day `t'` by running `q` overlapping
//! generation rounds — round `j` generates from the window ending `j`
//! days before `t'` and contributes the element that lands on `t'` —
//! and averaging the `q` contributions ([`rolling_predict`]). Every
//! round sees only rows strictly before the target day, so predictions
//! never look ahead.
//!
//! [`metrics`] scores movement predictions against realized movements
//! (accuracy, positive-class F1, Matthews correlation), and
//! [`naive_baseline`] supplies the persistence reference the metrics
//! report includes alongside the model.

mod metrics;
mod report;
mod rolling;

pub use metrics::{metrics, naive_baseline, EvalReport};
pub use report::{read_predictions, write_metrics_report, write_predictions};
pub use rolling::{
    rolling_predict, rolling_predict_range, CheckpointGenerator, NoiseMode, PredictionRecord,
    PredictionRow, SequenceGenerator,
};

use chrono::NaiveDate;

use crate::autodiff::{AutodiffError, Tensor};
use crate::networks::NetworkError;

/// Errors from deployment and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum DeployError {
    /// The deployment data is malformed or inconsistent.
    #[error("invalid deployment data: {0}")]
    Data(String),

    /// Not enough rows before the target day for every rolling round.
    #[error(
        "predicting {target} needs the {needed} trading days before it, \
         but the data starts at {earliest}"
    )]
    History {
        target: NaiveDate,
        needed: usize,
        earliest: NaiveDate,
    },

    /// Predictions and truths cannot be scored together.
    #[error("invalid evaluation input: {0}")]
    Eval(String),

    /// A prediction CSV does not have the expected structure.
    #[error("prediction file: {0}")]
    PredictionFormat(String),

    /// The checkpoint being deployed is unusable.
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] crate::training::TrainingError),

    #[error(transparent)]
    Network(#[from] NetworkError),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-day model inputs covering the deployment period: one feature row
/// (and optionally one news-embedding row) per trading day, with the
/// matching dates.
pub struct DeploymentData {
    features: Tensor,
    news: Option<Tensor>,
    dates: Vec<NaiveDate>,
}

impl DeploymentData {
    pub fn new(
        features: Tensor,
        news: Option<Tensor>,
        dates: Vec<NaiveDate>,
    ) -> Result<Self, DeployError> {
        if dates.is_empty() {
            return Err(DeployError::Data("no trading days".into()));
        }
        if features.rows() != dates.len() {
            return Err(DeployError::Data(format!(
                "feature tensor covers {} days but {} dates were given",
                features.rows(),
                dates.len()
            )));
        }
        if let Some(news) = &news {
            if news.rows() != dates.len() {
                return Err(DeployError::Data(format!(
                    "news tensor covers {} days but {} dates were given",
                    news.rows(),
                    dates.len()
                )));
            }
        }
        if !dates.windows(2).all(|p| p[0] < p[1]) {
            return Err(DeployError::Data(
                "dates must be strictly increasing".into(),
            ));
        }
        Ok(DeploymentData {
            features,
            news,
            dates,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty data
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn news(&self) -> Option<&Tensor> {
        self.news.as_ref()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Date a prediction for row `target` refers to. `target == len()`
    /// means the day after the data ends and maps to the next calendar
    /// day — a placeholder, since the following *trading* day is not
    /// knowable from prices alone.
    pub fn target_date(&self, target: usize) -> NaiveDate {
        if target < self.dates.len() {
            self.dates[target]
        } else {
            self.dates[self.dates.len() - 1] + chrono::Days::new(1)
        }
    }
}
