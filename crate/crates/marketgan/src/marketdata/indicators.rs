use super::{MarketDataError, PriceSeries, SplitSpec, MACD_FAST, MACD_SIGNAL, MACD_SLOW};

/// Exponential moving average seeded with the first value:
/// `e_0 = x_0`, `e_t = alpha * x_t + (1 - alpha) * e_{t-1}` with
/// `alpha = 2 / (period + 1)`. Defined at every index.
pub fn ema(data: &[f64], period: usize) -> Vec<f64> {
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = Vec::with_capacity(data.len());
    let mut prev = match data.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(prev);
    for &x in &data[1..] {
        prev = alpha * x + (1.0 - alpha) * prev;
        out.push(prev);
    }
    out
}

/// Simple moving average over the trailing `window` values; `None` until
/// a full window is available.
pub fn sma(data: &[f64], window: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; data.len()];
    if window == 0 {
        return out;
    }
    for t in (window - 1)..data.len() {
        let sum: f64 = data[t + 1 - window..=t].iter().sum();
        out[t] = Some(sum / window as f64);
    }
    out
}

/// Relative Strength Index with Wilder smoothing, 0..100; `None` for the
/// first `period` indices.
///
/// Conventions for flat stretches: no gains and no losses → 50; no
/// losses → 100; no gains → 0.
pub fn rsi(close: &[f64], period: usize) -> Result<Vec<Option<f64>>, MarketDataError> {
    if period == 0 {
        return Err(MarketDataError::BadConfig("rsi period must be positive".into()));
    }
    if close.len() <= period {
        return Err(MarketDataError::TooShort {
            what: "rsi",
            needed: period + 1,
            got: close.len(),
        });
    }
    let mut out = vec![None; close.len()];
    let gain = |t: usize| (close[t] - close[t - 1]).max(0.0);
    let loss = |t: usize| (close[t - 1] - close[t]).max(0.0);

    let mut avg_gain: f64 = (1..=period).map(gain).sum::<f64>() / period as f64;
    let mut avg_loss: f64 = (1..=period).map(loss).sum::<f64>() / period as f64;
    out[period] = Some(rsi_from_averages(avg_gain, avg_loss));
    for t in (period + 1)..close.len() {
        avg_gain = (avg_gain * (period as f64 - 1.0) + gain(t)) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + loss(t)) / period as f64;
        out[t] = Some(rsi_from_averages(avg_gain, avg_loss));
    }
    Ok(out)
}

fn rsi_from_averages(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_gain == 0.0 && avg_loss == 0.0 {
        50.0
    } else if avg_loss == 0.0 {
        100.0
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// RSI thresholded to a flag: -1 when RSI <= 20, +1 when RSI >= 80,
/// 0 otherwise.
pub fn rsi_flag(close: &[f64], period: usize) -> Result<Vec<Option<f64>>, MarketDataError> {
    Ok(rsi(close, period)?
        .into_iter()
        .map(|r| {
            r.map(|v| {
                if v <= 20.0 {
                    -1.0
                } else if v >= 80.0 {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect())
}

/// Raw MACD DIFF: `(EMA12 - EMA26) - EMA9(EMA12 - EMA26)`; defined at
/// every index thanks to the first-value EMA seed.
pub fn macd_diff(close: &[f64]) -> Vec<f64> {
    let fast = ema(close, MACD_FAST);
    let slow = ema(close, MACD_SLOW);
    let macd: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let signal = ema(&macd, MACD_SIGNAL);
    macd.iter().zip(&signal).map(|(m, s)| m - s).collect()
}

/// Smallest and largest value of a slice (used to fit min-max bounds on
/// the training rows).
pub(super) fn fit_bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// Min-max scaling clamped to [0, 1]; a degenerate fit (min = max) maps
/// everything to 0.0 so the feature goes inert instead of exploding.
pub fn scale_clamp(x: f64, min: f64, max: f64) -> f64 {
    if min >= max {
        return 0.0;
    }
    ((x - min) / (max - min)).clamp(0.0, 1.0)
}

/// MACD DIFF min-max scaled to [0, 1], with the bounds fitted on the
/// training rows of `split` only and all other rows clamped.
pub fn macd_diff_scaled(close: &[f64], split: &SplitSpec) -> Result<Vec<f64>, MarketDataError> {
    if split.test.end > close.len() || split.train.is_empty() {
        return Err(MarketDataError::BadConfig(format!(
            "split covers rows up to {} but the series has {} rows",
            split.test.end,
            close.len()
        )));
    }
    let diff = macd_diff(close);
    let (min, max) = fit_bounds(&diff[split.train.clone()]);
    Ok(diff.into_iter().map(|d| scale_clamp(d, min, max)).collect())
}

/// Upper/lower Bollinger-band breakout flags: `bolu = 1` iff close is
/// strictly above `SMA + width * sigma`, `bold = 1` iff strictly below
/// `SMA - width * sigma` (population standard deviation); `None` during
/// the window warmup.
#[allow(clippy::type_complexity)]
pub fn bollinger_flags(
    close: &[f64],
    window: usize,
    width: f64,
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>), MarketDataError> {
    if window < 2 {
        return Err(MarketDataError::BadConfig(
            "bollinger window must be at least 2".into(),
        ));
    }
    if close.len() <= window {
        return Err(MarketDataError::TooShort {
            what: "bollinger_flags",
            needed: window + 1,
            got: close.len(),
        });
    }
    let mut bolu = vec![None; close.len()];
    let mut bold = vec![None; close.len()];
    for t in (window - 1)..close.len() {
        let slice = &close[t + 1 - window..=t];
        let mean = slice.iter().sum::<f64>() / window as f64;
        let var = slice.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / window as f64;
        let sigma = var.sqrt();
        let upper = mean + width * sigma;
        let lower = mean - width * sigma;
        bolu[t] = Some(if close[t] > upper { 1.0 } else { 0.0 });
        bold[t] = Some(if close[t] < lower { 1.0 } else { 0.0 });
    }
    Ok((bolu, bold))
}

/// The five moving-average ratio features `ma_t / close_t - 1` for EMA5,
/// SMA13, SMA21, SMA50, SMA200; `None` until the 200-day warmup passes.
pub fn ma_ratio_features(close: &[f64]) -> Result<Vec<Option<[f64; 5]>>, MarketDataError> {
    if close.len() <= 200 {
        return Err(MarketDataError::TooShort {
            what: "ma_ratio_features",
            needed: 201,
            got: close.len(),
        });
    }
    let ema5 = ema(close, 5);
    let sma13 = sma(close, 13);
    let sma21 = sma(close, 21);
    let sma50 = sma(close, 50);
    let sma200 = sma(close, 200);
    let mut out = vec![None; close.len()];
    for t in 199..close.len() {
        if close[t] == 0.0 {
            return Err(MarketDataError::ZeroDivisor {
                what: "ma_ratio_features",
                index: t,
            });
        }
        out[t] = Some([
            ema5[t] / close[t] - 1.0,
            sma13[t].expect("sma13 defined at t >= 199") / close[t] - 1.0,
            sma21[t].expect("sma21 defined at t >= 199") / close[t] - 1.0,
            sma50[t].expect("sma50 defined at t >= 199") / close[t] - 1.0,
            sma200[t].expect("sma200 defined at t >= 199") / close[t] - 1.0,
        ]);
    }
    Ok(out)
}

/// Per-day price returns and the volatility level ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceVolFeatures {
    /// Open/high/low/close, each `s_t / s_{t-1} - 1`.
    pub price_returns: [f64; 4],
    /// `vol_t / vol_{t-1}` — a ratio, not a return.
    pub vol_ratio: f64,
}

/// Computes the four price returns and the volatility ratio per day; the
/// first row has no predecessor and is `None`.
pub fn price_and_vol_features(
    series: &PriceSeries,
) -> Result<Vec<Option<PriceVolFeatures>>, MarketDataError> {
    let n = series.len();
    if n < 2 {
        return Err(MarketDataError::TooShort {
            what: "price_and_vol_features",
            needed: 2,
            got: n,
        });
    }
    if series.volatility.len() != n {
        return Err(MarketDataError::BadConfig(
            "volatility series not attached".into(),
        ));
    }
    let mut out = vec![None; n];
    for t in 1..n {
        for (what, column) in [
            ("open returns", &series.open),
            ("high returns", &series.high),
            ("low returns", &series.low),
            ("close returns", &series.close),
            ("volatility ratio", &series.volatility),
        ] {
            if column[t - 1] == 0.0 {
                return Err(MarketDataError::ZeroDivisor {
                    what,
                    index: t - 1,
                });
            }
        }
        out[t] = Some(PriceVolFeatures {
            price_returns: [
                series.open[t] / series.open[t - 1] - 1.0,
                series.high[t] / series.high[t - 1] - 1.0,
                series.low[t] / series.low[t - 1] - 1.0,
                series.close[t] / series.close[t - 1] - 1.0,
            ],
            vol_ratio: series.volatility[t] / series.volatility[t - 1],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn ema_of_constant_series_is_the_constant() {
        let e = ema(&[5.0; 10], 3);
        assert!(e.iter().all(|&x| (x - 5.0).abs() < 1e-15));
    }

    #[test]
    fn sma_warmup_is_none_then_windowed_mean() {
        let s = sma(&[1.0, 2.0, 3.0, 4.0], 3);
        assert_eq!(s[0], None);
        assert_eq!(s[1], None);
        assert_eq!(s[2], Some(2.0));
        assert_eq!(s[3], Some(3.0));
    }

    #[test]
    fn rsi_saturates_at_100_on_a_strictly_rising_series() {
        let close: Vec<f64> = (0..40).map(|t| 100.0 + t as f64).collect();
        let flags = rsi_flag(&close, 14).unwrap();
        assert_eq!(flags[13], None, "undefined during warmup");
        for t in 14..40 {
            assert_eq!(flags[t], Some(1.0), "index {t}: all-gain series must flag +1");
        }
    }

    #[test]
    fn rsi_saturates_at_0_on_a_strictly_falling_series() {
        let close: Vec<f64> = (0..40).map(|t| 100.0 - t as f64 * 0.5).collect();
        let values = rsi(&close, 14).unwrap();
        assert_eq!(values[20], Some(0.0));
        let flags = rsi_flag(&close, 14).unwrap();
        assert_eq!(flags[20], Some(-1.0));
    }

    #[test]
    fn rsi_of_flat_series_is_50_and_flags_0() {
        let values = rsi(&[7.0; 30], 14).unwrap();
        assert_eq!(values[20], Some(50.0));
        let flags = rsi_flag(&[7.0; 30], 14).unwrap();
        assert_eq!(flags[20], Some(0.0));
    }

    #[test]
    fn rsi_rejects_too_short_input() {
        let err = rsi(&[1.0; 14], 14).unwrap_err();
        assert!(matches!(err, MarketDataError::TooShort { needed: 15, .. }));
    }

    #[test]
    fn macd_diff_of_constant_series_is_zero() {
        let d = macd_diff(&[42.0; 60]);
        assert!(d.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn scale_clamp_maps_train_extremes_to_unit_interval() {
        assert_eq!(scale_clamp(2.0, 2.0, 6.0), 0.0);
        assert_eq!(scale_clamp(6.0, 2.0, 6.0), 1.0);
        assert_eq!(scale_clamp(4.0, 2.0, 6.0), 0.5);
        // Out-of-range values (validation/test rows) clamp.
        assert_eq!(scale_clamp(9.0, 2.0, 6.0), 1.0);
        assert_eq!(scale_clamp(-1.0, 2.0, 6.0), 0.0);
        // Degenerate fit goes inert.
        assert_eq!(scale_clamp(123.0, 5.0, 5.0), 0.0);
    }

    #[test]
    fn macd_scaled_constant_series_degenerates_to_zero() {
        let split = SplitSpec {
            train: 0..40,
            valid: 40..45,
            test: 45..50,
        };
        let scaled = macd_diff_scaled(&[42.0; 50], &split).unwrap();
        assert!(scaled.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bollinger_flags_zero_on_constant_series() {
        let (bolu, bold) = bollinger_flags(&[10.0; 30], 20, 2.0).unwrap();
        for t in 19..30 {
            assert_eq!(bolu[t], Some(0.0), "strict inequality must fail at {t}");
            assert_eq!(bold[t], Some(0.0));
        }
    }

    #[test]
    fn bollinger_spike_above_flat_baseline_trips_the_upper_flag() {
        let mut close = vec![100.0; 21];
        close[20] = 150.0;
        let (bolu, bold) = bollinger_flags(&close, 20, 2.0).unwrap();
        // Window at t=20: nineteen 100s and one 150; mean 102.5,
        // sigma = sqrt(mean((x - 102.5)^2)) ~ 10.9, upper ~ 124.3 < 150.
        assert_eq!(bolu[20], Some(1.0));
        assert_eq!(bold[20], Some(0.0));
    }

    #[test]
    fn ma_ratios_vanish_on_constant_series() {
        let close = vec![50.0; 210];
        let ma = ma_ratio_features(&close).unwrap();
        assert_eq!(ma[198], None, "undefined before the 200-day warmup");
        let row = ma[205].unwrap();
        for (i, v) in row.iter().enumerate() {
            assert!(v.abs() < 1e-12, "feature {i} = {v}");
        }
    }

    #[test]
    fn sma13_ratio_on_a_linear_ramp_matches_hand_value() {
        // close_t = t+1 for t = 0..; at index 19 (price 20), SMA13 is the
        // mean of 8..=20, i.e. 14, so the feature is 14/20 - 1 = -0.3.
        let close: Vec<f64> = (1..=250).map(|t| t as f64).collect();
        let s = sma(&close, 13);
        let feature = s[19].unwrap() / close[19] - 1.0;
        assert!((feature + 0.3).abs() < 1e-12, "got {feature}");
    }

    #[test]
    fn price_and_vol_features_match_direct_ratios() {
        let series = PriceSeries {
            dates: vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
            ],
            open: vec![10.0, 11.0],
            high: vec![12.0, 12.6],
            low: vec![9.0, 9.9],
            close: vec![100.0, 110.0],
            volatility: vec![20.0, 25.0],
        };
        let rows = price_and_vol_features(&series).unwrap();
        assert_eq!(rows[0], None, "first row has no predecessor");
        let r = rows[1].unwrap();
        assert!((r.price_returns[3] - 0.10).abs() < 1e-15);
        assert!((r.price_returns[0] - 0.10).abs() < 1e-15);
        assert!((r.vol_ratio - 1.25).abs() < 1e-15, "ratio keeps no -1");
    }

    #[test]
    fn zero_previous_price_is_a_division_error() {
        let series = PriceSeries {
            dates: vec![
                NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
            ],
            open: vec![0.0, 11.0],
            high: vec![12.0, 12.6],
            low: vec![9.0, 9.9],
            close: vec![100.0, 110.0],
            volatility: vec![20.0, 25.0],
        };
        let err = price_and_vol_features(&series).unwrap_err();
        assert!(matches!(err, MarketDataError::ZeroDivisor { index: 0, .. }));
    }
}
