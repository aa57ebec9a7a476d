//! Feature engineering from raw OHLC and volatility CSVs.
//!
//! Builds a synthetic daily price history in the exact CSV layouts the
//! pipeline ingests, joins the two calendars, and assembles the full
//! 14-column feature matrix: price/volatility ratios, the RSI and
//! Bollinger flags, min-max-scaled MACD, and the moving-average ratios.
//! The first 200 days are indicator warmup and are dropped, the MACD
//! bounds are fitted on the training split only, and every feature for
//! day `t` uses prices up to `t` — nothing later.
//!
//! Run with: `cargo run --example market_features`

use std::error::Error;
use std::fmt::Write as _;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use marketgan::marketdata::{
    assemble_features, parse_ohlc_csv, parse_volatility_csv, write_feature_csv, FEATURE_NAMES,
    WARMUP_ROWS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Renders `days` weekdays of a geometric random walk as an OHLC CSV and
/// a matching volatility CSV. The volatility calendar deliberately skips
/// one day the price calendar has, so the join below has work to do.
fn synthetic_csvs(days: usize, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = String::from("Date,Open,High,Low,Close\n");
    let mut vol = String::from("Date,Close\n");

    let mut date = NaiveDate::from_ymd_opt(2014, 1, 6).expect("valid calendar date");
    let mut close = 1_800.0_f64;
    for day in 0..days {
        let open = close;
        close *= 1.0 + rng.random_range(-0.015..0.015);
        let spread = 1.0 + rng.random_range(0.0..0.004);
        let high = open.max(close) * spread;
        let low = open.min(close) / spread;
        writeln!(prices, "{date},{open:.2},{high:.2},{low:.2},{close:.2}").unwrap();
        if day != 250 {
            let level = 14.0 + rng.random_range(-3.0..3.0);
            writeln!(vol, "{date},{level:.2}").unwrap();
        }
        date = next_weekday(date);
    }
    (prices, vol)
}

fn next_weekday(date: NaiveDate) -> NaiveDate {
    let mut next = date + Days::new(1);
    while matches!(next.weekday(), Weekday::Sat | Weekday::Sun) {
        next = next + Days::new(1);
    }
    next
}

fn main() -> Result<(), Box<dyn Error>> {
    let (price_csv, vol_csv) = synthetic_csvs(320, 5);

    // The two files rarely share a calendar exactly (index and
    // volatility markets observe different holidays); the join keeps
    // only dates present in both.
    let prices = parse_ohlc_csv(price_csv.as_bytes())?;
    let (vol_dates, vol_close) = parse_volatility_csv(vol_csv.as_bytes())?;
    let series = prices.attach_volatility(&vol_dates, &vol_close)?;
    println!(
        "parsed {} price days, {} volatility days, {} joined",
        prices.len(),
        vol_dates.len(),
        series.len()
    );

    let (matrix, split, stats) = assemble_features(&series, (8, 1, 1))?;
    println!(
        "feature rows: {} (after {} warmup days), split {}/{}/{}",
        matrix.len(),
        WARMUP_ROWS,
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    println!(
        "macd bounds fitted on the training split: [{:.4}, {:.4}]",
        stats.macd_min, stats.macd_max
    );

    println!("\ncolumns: {}", FEATURE_NAMES.join(", "));
    let first = &matrix.rows[0];
    println!("\nfirst emitted day ({}):", matrix.dates[0]);
    for (name, value) in FEATURE_NAMES.iter().zip(first.as_array()) {
        println!("  {name:<12} {value:>10.6}");
    }
    println!(
        "  next-day target return {:+.6} (movement {})",
        matrix.targets[1].value, matrix.targets[1].movement
    );

    // The same matrix round-trips through the on-disk CSV format.
    let mut rendered = Vec::new();
    write_feature_csv(&matrix, &mut rendered)?;
    let text = String::from_utf8(rendered)?;
    println!("\nfeature CSV, first two lines of {}:", matrix.len() + 1);
    for line in text.lines().take(2) {
        println!("  {line}");
    }
    Ok(())
}
