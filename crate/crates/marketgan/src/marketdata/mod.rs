//! Market-data ingestion and feature engineering.
//!
//! Raw OHLC prices and a volatility-index series come in as CSV, are
//! joined by date, and turn into one 14-feature row per trading day:
//! four price returns, the volatility ratio, an RSI flag, min-max-scaled
//! MACD DIFF, two Bollinger-band flags, and five moving-average ratios.
//! Scaling statistics are fitted on the chronological training split
//! only, windowing is stride-1, and windows that straddle a split
//! boundary are dropped so no training target leaks across splits.

mod csv;
mod indicators;
mod windows;

pub use csv::{parse_ohlc_csv, parse_volatility_csv, write_feature_csv};
pub use indicators::{
    bollinger_flags, ema, ma_ratio_features, macd_diff, macd_diff_scaled, price_and_vol_features,
    rsi, rsi_flag, scale_clamp, sma, PriceVolFeatures,
};
pub use windows::{assign_windows, chrono_split, make_windows, target_returns, WindowSplits};

use chrono::NaiveDate;

/// Rows dropped from the front of the assembled matrix so that every
/// feature (the 200-day moving average being the slowest) is defined.
pub const WARMUP_ROWS: usize = 200;

/// Default RSI lookback.
pub const RSI_PERIOD: usize = 14;
/// Default Bollinger window and band width (standard deviations).
pub const BOLLINGER_WINDOW: usize = 20;
pub const BOLLINGER_WIDTH: f64 = 2.0;
/// MACD configuration: fast/slow EMAs and the signal EMA.
pub const MACD_FAST: usize = 12;
pub const MACD_SLOW: usize = 26;
pub const MACD_SIGNAL: usize = 9;

/// Number of market features per day.
pub const FEATURE_COUNT: usize = 14;

/// Column names for the assembled feature matrix, in row order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "open_ret",
    "high_ret",
    "low_ret",
    "close_ret",
    "vol_ratio",
    "rsi_flag",
    "macd_scaled",
    "bolu_flag",
    "bold_flag",
    "ema5_ratio",
    "sma13_ratio",
    "sma21_ratio",
    "sma50_ratio",
    "sma200_ratio",
];

/// Errors from parsing, feature computation, and windowing.
#[derive(Debug, thiserror::Error)]
pub enum MarketDataError {
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {detail}")]
    Row { line: usize, detail: String },
    #[error("input is empty")]
    Empty,
    #[error("{what} needs at least {needed} rows, got {got}")]
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("{what}: value at index {index} is zero, cannot divide")]
    ZeroDivisor { what: &'static str, index: usize },
    #[error("price and volatility series share no dates")]
    NoDateOverlap,
    #[error("{0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
}

/// Daily OHLC prices plus a volatility-index level, aligned by date.
///
/// `volatility` is empty until [`PriceSeries::attach_volatility`] joins a
/// second series in; the feature assembly requires it.
#[derive(Clone, Debug, Default)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub open: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volatility: Vec<f64>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Inner-joins a volatility series by date, keeping only days present
    /// in both (index and volatility calendars differ around holidays).
    pub fn attach_volatility(
        &self,
        vol_dates: &[NaiveDate],
        vol_close: &[f64],
    ) -> Result<PriceSeries, MarketDataError> {
        let lookup: std::collections::HashMap<NaiveDate, f64> = vol_dates
            .iter()
            .copied()
            .zip(vol_close.iter().copied())
            .collect();
        let mut out = PriceSeries::default();
        for i in 0..self.len() {
            if let Some(&v) = lookup.get(&self.dates[i]) {
                out.dates.push(self.dates[i]);
                out.open.push(self.open[i]);
                out.high.push(self.high[i]);
                out.low.push(self.low[i]);
                out.close.push(self.close[i]);
                out.volatility.push(v);
            }
        }
        if out.is_empty() {
            return Err(MarketDataError::NoDateOverlap);
        }
        Ok(out)
    }
}

/// One trading day's processed market features; see [`FEATURE_NAMES`] for
/// the column order used by [`MarketFeatureRow::as_array`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketFeatureRow {
    /// Open/high/low/close, each `s_t / s_{t-1} - 1`.
    pub price_returns: [f64; 4],
    /// Volatility level ratio `s_t / s_{t-1}` (deliberately not `- 1`).
    pub vol_ratio: f64,
    /// RSI threshold flag in {-1, 0, 1}.
    pub rsi_flag: f64,
    /// MACD DIFF after train-fitted min-max scaling, in [0, 1].
    pub macd_scaled: f64,
    /// 1 when close is strictly above the upper Bollinger band.
    pub bolu_flag: f64,
    /// 1 when close is strictly below the lower Bollinger band.
    pub bold_flag: f64,
    /// EMA5, SMA13, SMA21, SMA50, SMA200, each `ma_t / close_t - 1`.
    pub ma_ratios: [f64; 5],
}

impl MarketFeatureRow {
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.price_returns[0],
            self.price_returns[1],
            self.price_returns[2],
            self.price_returns[3],
            self.vol_ratio,
            self.rsi_flag,
            self.macd_scaled,
            self.bolu_flag,
            self.bold_flag,
            self.ma_ratios[0],
            self.ma_ratios[1],
            self.ma_ratios[2],
            self.ma_ratios[3],
            self.ma_ratios[4],
        ]
    }
}

/// A day's close-to-close return and its direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetReturn {
    /// `close_t / close_{t-1} - 1`.
    pub value: f64,
    /// +1 for up, -1 for down; an exactly-zero return counts as down.
    pub movement: i8,
}

impl TargetReturn {
    pub fn new(value: f64) -> Self {
        TargetReturn {
            value,
            movement: movement_sign(value),
        }
    }
}

/// Direction of a return: +1 when positive, -1 otherwise (ties are down).
pub fn movement_sign(value: f64) -> i8 {
    if value > 0.0 {
        1
    } else {
        -1
    }
}

/// One supervised example: `w` history rows and the following `q` returns.
#[derive(Clone, Debug)]
pub struct TrainingWindow {
    /// Feature-matrix row indices of the history block (length `w`); the
    /// last index is the anchor day `T`.
    pub history: std::ops::Range<usize>,
    /// Returns for days `T+1 ..= T+q`.
    pub target: Vec<TargetReturn>,
    /// Date of the anchor day `T`.
    pub anchor_date: NaiveDate,
}

impl TrainingWindow {
    /// Index of the last history row.
    pub fn anchor(&self) -> usize {
        self.history.end - 1
    }

    /// Feature-matrix row indices of the target days.
    pub fn target_rows(&self) -> std::ops::Range<usize> {
        self.history.end..self.history.end + self.target.len()
    }
}

/// Contiguous chronological row intervals for train/validation/test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: std::ops::Range<usize>,
    pub valid: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
}

/// Statistics fitted on the training split that deployment must reuse
/// instead of refitting (stored in checkpoints).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineStats {
    pub macd_min: f64,
    pub macd_max: f64,
}

/// The assembled per-day dataset: feature rows, same-day returns, and the
/// dates they belong to, all aligned index-for-index.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<MarketFeatureRow>,
    /// Return realized on the same day as the feature row.
    pub targets: Vec<TargetReturn>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Computes every feature column, drops the warmup rows, fits the MACD
/// min-max bounds on the training split, and returns the aligned matrix
/// together with the split and the fitted statistics.
pub fn assemble_features(
    series: &PriceSeries,
    ratios: (usize, usize, usize),
) -> Result<(FeatureMatrix, SplitSpec, PipelineStats), MarketDataError> {
    let n = series.len();
    if n <= WARMUP_ROWS + 9 {
        return Err(MarketDataError::TooShort {
            what: "feature assembly",
            needed: WARMUP_ROWS + 10,
            got: n,
        });
    }
    let split = chrono_split(n - WARMUP_ROWS, ratios)?;
    let diff = macd_diff(&series.close);
    let fit_range = (split.train.start + WARMUP_ROWS)..(split.train.end + WARMUP_ROWS);
    let (macd_min, macd_max) = indicators::fit_bounds(&diff[fit_range]);
    let stats = PipelineStats { macd_min, macd_max };
    let matrix = assemble_with(series, &stats)?;
    Ok((matrix, split, stats))
}

/// Assembles the feature matrix reusing previously fitted statistics —
/// the deployment path, where refitting would leak future information.
pub fn assemble_features_with_stats(
    series: &PriceSeries,
    stats: &PipelineStats,
) -> Result<FeatureMatrix, MarketDataError> {
    if series.len() <= WARMUP_ROWS + 1 {
        return Err(MarketDataError::TooShort {
            what: "feature assembly",
            needed: WARMUP_ROWS + 2,
            got: series.len(),
        });
    }
    assemble_with(series, stats)
}

fn assemble_with(
    series: &PriceSeries,
    stats: &PipelineStats,
) -> Result<FeatureMatrix, MarketDataError> {
    let n = series.len();
    if series.volatility.len() != n {
        return Err(MarketDataError::BadConfig(format!(
            "volatility series has {} rows but prices have {}; attach a volatility series first",
            series.volatility.len(),
            n
        )));
    }
    let pv = price_and_vol_features(series)?;
    let rsi = rsi_flag(&series.close, RSI_PERIOD)?;
    let diff = macd_diff(&series.close);
    let (bolu, bold) = bollinger_flags(&series.close, BOLLINGER_WINDOW, BOLLINGER_WIDTH)?;
    let ma = ma_ratio_features(&series.close)?;
    let targets = target_returns(&series.close)?;

    let mut matrix = FeatureMatrix {
        dates: Vec::with_capacity(n - WARMUP_ROWS),
        rows: Vec::with_capacity(n - WARMUP_ROWS),
        targets: Vec::with_capacity(n - WARMUP_ROWS),
    };
    for t in WARMUP_ROWS..n {
        let pv_t = pv[t].expect("price returns defined after warmup");
        let row = MarketFeatureRow {
            price_returns: pv_t.price_returns,
            vol_ratio: pv_t.vol_ratio,
            rsi_flag: rsi[t].expect("rsi defined after warmup"),
            macd_scaled: scale_clamp(diff[t], stats.macd_min, stats.macd_max),
            bolu_flag: bolu[t].expect("bollinger defined after warmup"),
            bold_flag: bold[t].expect("bollinger defined after warmup"),
            ma_ratios: ma[t].expect("moving averages defined after warmup"),
        };
        matrix.dates.push(series.dates[t]);
        matrix.rows.push(row);
        matrix.targets.push(targets[t].expect("return defined after warmup"));
    }
    Ok(matrix)
}
