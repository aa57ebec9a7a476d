use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{FeatureMatrix, MarketDataError, PriceSeries, FEATURE_NAMES};

fn column_index(
    headers: &::csv::StringRecord,
    name: &'static str,
) -> Result<usize, MarketDataError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or(MarketDataError::MissingColumn(name))
}

fn record_line(record: &::csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn field<'r>(
    record: &'r ::csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'r str, MarketDataError> {
    record.get(idx).ok_or_else(|| MarketDataError::Row {
        line: record_line(record),
        detail: format!("row has no `{name}` field"),
    })
}

fn parse_date(record: &::csv::StringRecord, idx: usize) -> Result<NaiveDate, MarketDataError> {
    let s = field(record, idx, "Date")?;
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| MarketDataError::Row {
        line: record_line(record),
        detail: format!("bad date `{s}`: {e}"),
    })
}

fn parse_price(
    record: &::csv::StringRecord,
    idx: usize,
    name: &'static str,
) -> Result<f64, MarketDataError> {
    let s = field(record, idx, name)?;
    let v: f64 = s.trim().parse().map_err(|_| MarketDataError::Row {
        line: record_line(record),
        detail: format!("bad number `{s}` in column `{name}`"),
    })?;
    if !v.is_finite() || v <= 0.0 {
        return Err(MarketDataError::Row {
            line: record_line(record),
            detail: format!("column `{name}` must be a positive price, got {v}"),
        });
    }
    Ok(v)
}

fn check_sorted_unique(
    rows: &mut [(NaiveDate, [f64; 4])],
) -> Result<(), MarketDataError> {
    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(MarketDataError::Row {
                line: 0,
                detail: format!("duplicate date {}", pair[0].0),
            });
        }
    }
    Ok(())
}

/// Parses an OHLC CSV (`Date,Open,High,Low,Close[,Adj Close,Volume]`),
/// ignoring extra columns, validating prices, and sorting by date.
///
/// The returned series has no volatility attached; join one with
/// [`PriceSeries::attach_volatility`].
pub fn parse_ohlc_csv<R: Read>(reader: R) -> Result<PriceSeries, MarketDataError> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_i = column_index(&headers, "Date")?;
    let open_i = column_index(&headers, "Open")?;
    let high_i = column_index(&headers, "High")?;
    let low_i = column_index(&headers, "Low")?;
    let close_i = column_index(&headers, "Close")?;

    let mut rows: Vec<(NaiveDate, [f64; 4])> = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let date = parse_date(&record, date_i)?;
        let open = parse_price(&record, open_i, "Open")?;
        let high = parse_price(&record, high_i, "High")?;
        let low = parse_price(&record, low_i, "Low")?;
        let close = parse_price(&record, close_i, "Close")?;
        if low > open.min(close) || high < open.max(close) {
            return Err(MarketDataError::Row {
                line: record_line(&record),
                detail: format!(
                    "inconsistent OHLC: low {low}, open {open}, close {close}, high {high}"
                ),
            });
        }
        rows.push((date, [open, high, low, close]));
    }
    if rows.is_empty() {
        return Err(MarketDataError::Empty);
    }
    check_sorted_unique(&mut rows)?;

    let mut series = PriceSeries::default();
    for (date, [open, high, low, close]) in rows {
        series.dates.push(date);
        series.open.push(open);
        series.high.push(high);
        series.low.push(low);
        series.close.push(close);
    }
    Ok(series)
}

/// Parses a volatility-index CSV: only `Date` and `Close` (the index
/// level) are read; any other columns are ignored.
pub fn parse_volatility_csv<R: Read>(
    reader: R,
) -> Result<(Vec<NaiveDate>, Vec<f64>), MarketDataError> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_i = column_index(&headers, "Date")?;
    let close_i = column_index(&headers, "Close")?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let date = parse_date(&record, date_i)?;
        let close = parse_price(&record, close_i, "Close")?;
        rows.push((date, close));
    }
    if rows.is_empty() {
        return Err(MarketDataError::Empty);
    }
    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(MarketDataError::Row {
                line: 0,
                detail: format!("duplicate date {}", pair[0].0),
            });
        }
    }
    Ok(rows.into_iter().unzip())
}

/// Renders an `f64` with 17 significant digits — enough that parsing the
/// text back recovers the exact bit pattern.
fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the assembled feature matrix as CSV: date, the 14 feature
/// columns in [`FEATURE_NAMES`] order, and the same-day target return.
pub fn write_feature_csv<W: Write>(
    matrix: &FeatureMatrix,
    writer: W,
) -> Result<(), MarketDataError> {
    let mut wtr = ::csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.push("target_return".to_string());
    wtr.write_record(&header)?;
    for i in 0..matrix.len() {
        let mut record = vec![matrix.dates[i].format("%Y-%m-%d").to_string()];
        record.extend(matrix.rows[i].as_array().iter().map(|&v| exact(v)));
        record.push(exact(matrix.targets[i].value));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
Date,Open,High,Low,Close,Adj Close,Volume
2020-01-02,100.0,102.0,99.0,101.0,101.0,1000
2020-01-03,101.0,111.0,100.5,110.0,110.0,1200
";

    #[test]
    fn parses_two_rows_with_extra_columns_ignored() {
        let s = parse_ohlc_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.close, vec![101.0, 110.0]);
        assert!(s.volatility.is_empty(), "no volatility until attached");
    }

    #[test]
    fn out_of_order_rows_are_sorted_by_date() {
        let csv = "\
Date,Open,High,Low,Close
2020-01-03,101.0,111.0,100.5,110.0
2020-01-02,100.0,102.0,99.0,101.0
";
        let s = parse_ohlc_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.close, vec![101.0, 110.0]);
        assert!(s.dates[0] < s.dates[1]);
    }

    #[test]
    fn missing_close_header_is_a_schema_error() {
        let csv = "Date,Open,High,Low\n2020-01-02,1,2,0.5\n";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        assert!(
            matches!(err, MarketDataError::MissingColumn("Close")),
            "got {err}"
        );
    }

    #[test]
    fn bad_number_reports_the_line() {
        let csv = "\
Date,Open,High,Low,Close
2020-01-02,100.0,102.0,99.0,101.0
2020-01-03,oops,111.0,100.5,110.0
";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        match err {
            MarketDataError::Row { line, detail } => {
                assert_eq!(line, 3, "header is line 1");
                assert!(detail.contains("oops"), "got {detail}");
            }
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn bad_date_reports_the_line() {
        let csv = "Date,Open,High,Low,Close\n02/01/2020,100.0,102.0,99.0,101.0\n";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, MarketDataError::Row { line: 2, .. }), "got {err}");
    }

    #[test]
    fn empty_file_is_an_error() {
        let err = parse_ohlc_csv("Date,Open,High,Low,Close\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MarketDataError::Empty));
    }

    #[test]
    fn nonpositive_price_is_rejected() {
        let csv = "Date,Open,High,Low,Close\n2020-01-02,100.0,102.0,-1.0,101.0\n";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, MarketDataError::Row { line: 2, .. }), "got {err}");
    }

    #[test]
    fn inconsistent_ohlc_is_rejected() {
        let csv = "Date,Open,High,Low,Close\n2020-01-02,100.0,100.5,99.0,101.0\n";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        match err {
            MarketDataError::Row { detail, .. } => {
                assert!(detail.contains("inconsistent OHLC"), "got {detail}")
            }
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn duplicate_dates_are_rejected() {
        let csv = "\
Date,Open,High,Low,Close
2020-01-02,100.0,102.0,99.0,101.0
2020-01-02,100.0,102.0,99.0,101.5
";
        let err = parse_ohlc_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, MarketDataError::Row { .. }));
    }

    #[test]
    fn volatility_parser_reads_date_and_close_only() {
        let csv = "Date,Open,High,Low,Close\n2020-01-02,1.0,2.0,0.5,14.5\n";
        let (dates, close) = parse_volatility_csv(csv.as_bytes()).unwrap();
        assert_eq!(dates.len(), 1);
        assert_eq!(close, vec![14.5]);
    }

    #[test]
    fn feature_csv_round_trips_values_exactly() {
        use super::super::{MarketFeatureRow, TargetReturn};
        let row = MarketFeatureRow {
            price_returns: [0.1, -0.2, 1.0 / 3.0, 1e-17],
            vol_ratio: 1.0321,
            rsi_flag: -1.0,
            macd_scaled: 0.731,
            bolu_flag: 0.0,
            bold_flag: 1.0,
            ma_ratios: [0.015, -0.002, 1.0 / 7.0, 0.0, 2e-9],
        };
        let matrix = FeatureMatrix {
            dates: vec![NaiveDate::from_ymd_opt(2021, 5, 4).unwrap()],
            rows: vec![row],
            targets: vec![TargetReturn::new(-1.0 / 3.0)],
        };
        let mut buf = Vec::new();
        write_feature_csv(&matrix, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("date,open_ret,"));
        assert!(header.ends_with(",target_return"));
        let data: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(data.len(), 16);
        assert_eq!(data[0], "2021-05-04");
        // Every numeric field must parse back to the identical bits.
        let expected = row.as_array();
        for (i, &cell) in data[1..15].iter().enumerate() {
            let parsed: f64 = cell.parse().unwrap();
            assert_eq!(
                parsed.to_bits(),
                expected[i].to_bits(),
                "column {i} not bit-exact: {cell}"
            );
        }
        let parsed_target: f64 = data[15].parse().unwrap();
        assert_eq!(parsed_target.to_bits(), (-1.0f64 / 3.0).to_bits());
    }
}
