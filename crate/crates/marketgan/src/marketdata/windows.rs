use std::ops::Range;

use chrono::NaiveDate;

use super::{MarketDataError, SplitSpec, TargetReturn, TrainingWindow};

/// Close-to-close returns aligned with the input; the first entry has no
/// predecessor and is `None`.
pub fn target_returns(close: &[f64]) -> Result<Vec<Option<TargetReturn>>, MarketDataError> {
    if close.len() < 2 {
        return Err(MarketDataError::TooShort {
            what: "target_returns",
            needed: 2,
            got: close.len(),
        });
    }
    let mut out = vec![None; close.len()];
    for t in 1..close.len() {
        if close[t - 1] == 0.0 {
            return Err(MarketDataError::ZeroDivisor {
                what: "target_returns",
                index: t - 1,
            });
        }
        out[t] = Some(TargetReturn::new(close[t] / close[t - 1] - 1.0));
    }
    Ok(out)
}

/// Slides a stride-1 window over aligned feature rows and same-day
/// returns: each window holds `w` history rows ending at anchor `T` and
/// the returns of days `T+1 ..= T+q`. Produces exactly `n - w - q + 1`
/// windows.
pub fn make_windows(
    dates: &[NaiveDate],
    targets: &[TargetReturn],
    w: usize,
    q: usize,
) -> Result<Vec<TrainingWindow>, MarketDataError> {
    if w == 0 || q == 0 {
        return Err(MarketDataError::BadConfig(
            "window sizes w and q must be positive".into(),
        ));
    }
    if dates.len() != targets.len() {
        return Err(MarketDataError::BadConfig(format!(
            "dates ({}) and targets ({}) are not aligned",
            dates.len(),
            targets.len()
        )));
    }
    let n = dates.len();
    if n < w + q {
        return Err(MarketDataError::TooShort {
            what: "make_windows",
            needed: w + q,
            got: n,
        });
    }
    let mut out = Vec::with_capacity(n - w - q + 1);
    for anchor in (w - 1)..(n - q) {
        out.push(TrainingWindow {
            history: (anchor + 1 - w)..(anchor + 1),
            target: targets[anchor + 1..=anchor + q].to_vec(),
            anchor_date: dates[anchor],
        });
    }
    Ok(out)
}

/// Splits `n_rows` chronologically by the given ratios (e.g. `(8, 1, 1)`),
/// earlier rows first: train, then validation, then test.
pub fn chrono_split(
    n_rows: usize,
    ratios: (usize, usize, usize),
) -> Result<SplitSpec, MarketDataError> {
    let (a, b, c) = ratios;
    let total = a + b + c;
    if a == 0 || b == 0 || c == 0 {
        return Err(MarketDataError::BadConfig(
            "split ratios must all be positive".into(),
        ));
    }
    let train_end = n_rows * a / total;
    let valid_end = n_rows * (a + b) / total;
    if train_end == 0 || valid_end == train_end || valid_end == n_rows {
        return Err(MarketDataError::TooShort {
            what: "chrono_split",
            needed: total,
            got: n_rows,
        });
    }
    Ok(SplitSpec {
        train: 0..train_end,
        valid: train_end..valid_end,
        test: valid_end..n_rows,
    })
}

/// Windows partitioned by split; windows whose full span (history plus
/// target) does not fit inside a single split interval are dropped.
#[derive(Clone, Debug, Default)]
pub struct WindowSplits {
    pub train: Vec<TrainingWindow>,
    pub valid: Vec<TrainingWindow>,
    pub test: Vec<TrainingWindow>,
}

/// Assigns each window to the split that contains its entire span;
/// boundary-straddling windows are dropped so no training target can sit
/// in validation or test rows (and vice versa).
pub fn assign_windows(windows: Vec<TrainingWindow>, split: &SplitSpec) -> WindowSplits {
    let mut out = WindowSplits::default();
    let contains = |r: &Range<usize>, w: &TrainingWindow| {
        w.history.start >= r.start && w.target_rows().end <= r.end
    };
    for w in windows {
        if contains(&split.train, &w) {
            out.train.push(w);
        } else if contains(&split.valid, &w) {
            out.valid.push(w);
        } else if contains(&split.test, &w) {
            out.test.push(w);
        }
    }
    out
}
