use crate::autodiff::Tensor;
use crate::marketdata::{FeatureMatrix, TrainingWindow, FEATURE_NAMES};

use super::TrainingError;

/// A windowed dataset in tensor form, ready for batching.
///
/// `features` (and `news`, when present) are day-level matrices aligned
/// index-for-index with the day axis the windows were built over; each
/// [`TrainingWindow`] points into that axis. All windows must share one
/// history length and one target length.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    features: Tensor,
    news: Option<Tensor>,
    windows: Vec<TrainingWindow>,
    window: usize,
    horizon: usize,
}

impl TrainingSet {
    /// Validates alignment and window uniformity.
    pub fn new(
        features: Tensor,
        news: Option<Tensor>,
        windows: Vec<TrainingWindow>,
    ) -> Result<Self, TrainingError> {
        if windows.is_empty() {
            return Err(TrainingError::Data("no training windows".into()));
        }
        if features.cols() == 0 {
            return Err(TrainingError::Data("feature matrix has no columns".into()));
        }
        let days = features.rows();
        if let Some(n) = &news {
            if n.rows() != days {
                return Err(TrainingError::Data(format!(
                    "news tensor covers {} days but features cover {days}",
                    n.rows()
                )));
            }
            if n.cols() == 0 {
                return Err(TrainingError::Data("news tensor has no columns".into()));
            }
        }
        let window = windows[0].history.len();
        let horizon = windows[0].target.len();
        if window == 0 || horizon == 0 {
            return Err(TrainingError::Data(
                "windows must have nonempty history and target".into(),
            ));
        }
        for w in &windows {
            if w.history.len() != window || w.target.len() != horizon {
                return Err(TrainingError::Data(format!(
                    "windows disagree on shape: expected {window} history / {horizon} target \
                     rows, found {} / {} at anchor {}",
                    w.history.len(),
                    w.target.len(),
                    w.anchor_date
                )));
            }
            if w.history.end > days {
                return Err(TrainingError::Data(format!(
                    "window at anchor {} reaches row {} but the data has {days} days",
                    w.anchor_date,
                    w.history.end
                )));
            }
        }
        Ok(TrainingSet {
            features,
            news,
            windows,
            window,
            horizon,
        })
    }

    /// History steps per window (`w`).
    pub fn window(&self) -> usize {
        self.window
    }

    /// Target steps per window (`q`).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn news_dim(&self) -> Option<usize> {
        self.news.as_ref().map(Tensor::cols)
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    pub fn windows(&self) -> &[TrainingWindow] {
        &self.windows
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn news(&self) -> Option<&Tensor> {
        self.news.as_ref()
    }

    /// Realized future returns for the picked windows, `B×q`.
    ///
    /// `picks` index into [`TrainingSet::windows`]; out-of-range picks
    /// panic, as do the other batch builders.
    pub fn real_batch(&self, picks: &[usize]) -> Tensor {
        let mut out = Tensor::zeros(picks.len(), self.horizon);
        for (b, &w) in picks.iter().enumerate() {
            for (j, target) in self.windows[w].target.iter().enumerate() {
                out.set(b, j, target.value);
            }
        }
        out
    }

    /// Realized future movements (±1) for the picked windows, `B×q`.
    pub fn movement_batch(&self, picks: &[usize]) -> Tensor {
        let mut out = Tensor::zeros(picks.len(), self.horizon);
        for (b, &w) in picks.iter().enumerate() {
            for (j, target) in self.windows[w].target.iter().enumerate() {
                out.set(b, j, f64::from(target.movement));
            }
        }
        out
    }

    /// History features for the picked windows as `w` step matrices of
    /// `B×p`: step `t` holds each window's `t`-th history day.
    pub fn feature_steps(&self, picks: &[usize]) -> Vec<Tensor> {
        let p = self.feature_dim();
        let mut steps = Vec::with_capacity(self.window);
        for t in 0..self.window {
            let mut step = Tensor::zeros(picks.len(), p);
            for (b, &w) in picks.iter().enumerate() {
                let day = self.windows[w].history.start + t;
                for c in 0..p {
                    step.set(b, c, self.features.get(day, c));
                }
            }
            steps.push(step);
        }
        steps
    }

    /// Pooled news rows for the picked windows, `(B·w)×d`, step-major
    /// (rows `t·B .. (t+1)·B` belong to history step `t`) — the layout
    /// the generator's news input expects. `None` when the set carries
    /// no news.
    pub fn news_steps(&self, picks: &[usize]) -> Option<Tensor> {
        let news = self.news.as_ref()?;
        let d = news.cols();
        let mut out = Tensor::zeros(picks.len() * self.window, d);
        for t in 0..self.window {
            for (b, &w) in picks.iter().enumerate() {
                let day = self.windows[w].history.start + t;
                for c in 0..d {
                    out.set(t * picks.len() + b, c, news.get(day, c));
                }
            }
        }
        Some(out)
    }
}

/// Day-level feature tensor from an assembled market matrix; with
/// `use_volatility` off the volatility column is dropped, shrinking the
/// feature width by one.
pub fn feature_tensor(matrix: &FeatureMatrix, use_volatility: bool) -> Tensor {
    let vol_col = FEATURE_NAMES
        .iter()
        .position(|n| *n == "vol_ratio")
        .expect("volatility column is part of the schema");
    let keep: Vec<usize> = (0..FEATURE_NAMES.len())
        .filter(|&c| use_volatility || c != vol_col)
        .collect();
    let mut out = Tensor::zeros(matrix.len(), keep.len());
    for (r, row) in matrix.rows.iter().enumerate() {
        let values = row.as_array();
        for (c, &src) in keep.iter().enumerate() {
            out.set(r, c, values[src]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::TargetReturn;
    use chrono::NaiveDate;

    fn day(offset: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(u64::from(offset))
    }

    fn tiny_set() -> TrainingSet {
        // 8 days, 2 features: feature 0 counts days, feature 1 is its
        // negative; returns are 0.01 * day parity sign.
        let features = Tensor::from_vec(
            8,
            2,
            (0..8).flat_map(|d| [d as f64, -(d as f64)]).collect(),
        )
        .unwrap();
        let news = Tensor::from_vec(8, 3, (0..24).map(f64::from).collect()).unwrap();
        let windows = (0..3)
            .map(|s| TrainingWindow {
                history: s..s + 3,
                target: vec![
                    TargetReturn::new(0.01 * (s as f64 + 1.0)),
                    TargetReturn::new(-0.02),
                ],
                anchor_date: day(s as u32 + 2),
            })
            .collect();
        TrainingSet::new(features, Some(news), windows).unwrap()
    }

    #[test]
    fn shapes_and_counts_are_derived_from_the_windows() {
        let set = tiny_set();
        assert_eq!(set.window(), 3);
        assert_eq!(set.horizon(), 2);
        assert_eq!(set.feature_dim(), 2);
        assert_eq!(set.news_dim(), Some(3));
        assert_eq!(set.window_count(), 3);
    }

    #[test]
    fn real_batch_holds_each_windows_targets() {
        let set = tiny_set();
        let real = set.real_batch(&[2, 0]);
        assert_eq!(real.shape(), (2, 2));
        assert_eq!(real.get(0, 0), 0.03);
        assert_eq!(real.get(0, 1), -0.02);
        assert_eq!(real.get(1, 0), 0.01);
    }

    #[test]
    fn movement_batch_is_sign_valued() {
        let set = tiny_set();
        let m = set.movement_batch(&[0, 1]);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), -1.0);
    }

    #[test]
    fn feature_steps_gather_by_history_offset() {
        let set = tiny_set();
        let steps = set.feature_steps(&[1, 2]);
        assert_eq!(steps.len(), 3);
        // Step 0 of window 1 is day 1; of window 2 is day 2.
        assert_eq!(steps[0].get(0, 0), 1.0);
        assert_eq!(steps[0].get(1, 0), 2.0);
        // Step 2 of window 1 is day 3, second feature is its negative.
        assert_eq!(steps[2].get(0, 1), -3.0);
    }

    #[test]
    fn news_steps_are_step_major() {
        let set = tiny_set();
        let news = set.news_steps(&[0, 2]).unwrap();
        assert_eq!(news.shape(), (6, 3));
        // Row t*B + b = news of day (window b's start + t).
        // t = 0: windows 0 and 2 start at days 0 and 2.
        assert_eq!(news.get(0, 0), 0.0);
        assert_eq!(news.get(1, 0), 6.0);
        // t = 2, b = 1: day 4 -> first cell 12.
        assert_eq!(news.get(5, 0), 12.0);
    }

    #[test]
    fn mismatched_news_rows_are_rejected() {
        let features = Tensor::zeros(8, 2);
        let news = Tensor::zeros(7, 3);
        let windows = vec![TrainingWindow {
            history: 0..3,
            target: vec![TargetReturn::new(0.01)],
            anchor_date: day(2),
        }];
        let err = TrainingSet::new(features, Some(news), windows).unwrap_err();
        assert!(err.to_string().contains("covers 7 days"), "got {err}");
    }

    #[test]
    fn out_of_range_windows_are_rejected() {
        let features = Tensor::zeros(4, 2);
        let windows = vec![TrainingWindow {
            history: 2..5,
            target: vec![TargetReturn::new(0.01)],
            anchor_date: day(4),
        }];
        let err = TrainingSet::new(features, None, windows).unwrap_err();
        assert!(err.to_string().contains("reaches row 5"), "got {err}");
    }

    #[test]
    fn ragged_windows_are_rejected() {
        let features = Tensor::zeros(8, 2);
        let windows = vec![
            TrainingWindow {
                history: 0..3,
                target: vec![TargetReturn::new(0.01)],
                anchor_date: day(2),
            },
            TrainingWindow {
                history: 3..5,
                target: vec![TargetReturn::new(0.01)],
                anchor_date: day(4),
            },
        ];
        let err = TrainingSet::new(features, None, windows).unwrap_err();
        assert!(err.to_string().contains("disagree"), "got {err}");
    }

    #[test]
    fn feature_tensor_drops_the_volatility_column_on_request() {
        use crate::marketdata::MarketFeatureRow;
        let row = MarketFeatureRow {
            price_returns: [0.1, 0.2, 0.3, 0.4],
            vol_ratio: 9.0,
            rsi_flag: 1.0,
            macd_scaled: 0.5,
            bolu_flag: 0.0,
            bold_flag: 1.0,
            ma_ratios: [0.01, 0.02, 0.03, 0.04, 0.05],
        };
        let matrix = FeatureMatrix {
            dates: vec![day(0)],
            rows: vec![row],
            targets: vec![TargetReturn::new(0.0)],
        };
        let with = feature_tensor(&matrix, true);
        assert_eq!(with.cols(), FEATURE_NAMES.len());
        assert_eq!(with.get(0, 4), 9.0);
        let without = feature_tensor(&matrix, false);
        assert_eq!(without.cols(), FEATURE_NAMES.len() - 1);
        // The column after the dropped one shifts left.
        assert_eq!(without.get(0, 4), 1.0);
        assert_eq!(without.get(0, 0), 0.1);
    }
}
