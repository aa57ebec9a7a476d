use std::io::Read;

use chrono::NaiveDate;

use super::{clean_headline, HeadlineBundle, NewsTextError, NEWS_SLOTS};

/// Strips the wrappers that scraped headline dumps accumulate: outer
/// quote pairs and the Python byte-literal prefix (`b'...'` / `b"..."`),
/// repeatedly, so `"b'text'"` unwraps all the way to `text`.
fn strip_wrappers(raw: &str) -> &str {
    let mut s = raw.trim();
    loop {
        let before = s;
        if s.len() >= 3
            && ((s.starts_with("b'") && s.ends_with('\''))
                || (s.starts_with("b\"") && s.ends_with('"')))
        {
            s = s[2..s.len() - 1].trim();
        } else if s.len() >= 2
            && ((s.starts_with('"') && s.ends_with('"'))
                || (s.starts_with('\'') && s.ends_with('\'')))
        {
            s = s[1..s.len() - 1].trim();
        }
        if s == before {
            return s;
        }
    }
}

/// Parses a headline CSV with header `Date,Top1,...,Top25` into one
/// [`HeadlineBundle`] per row, sorted by date.
///
/// Cells are unwrapped with [`strip_wrappers`] and cleaned into token
/// lists; empty cells count as absent headlines, so a bundle holds the
/// present headlines in rank order, compacted. A headline that cleans to
/// no tokens is kept as an empty list (it still occupies a rank).
pub fn parse_news_csv<R: Read>(reader: R) -> Result<Vec<HeadlineBundle>, NewsTextError> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_i = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("Date"))
        .ok_or_else(|| NewsTextError::MissingColumn("Date".into()))?;
    // Rank-ordered headline columns; Top1 must exist, later ones may not.
    let mut top_is = Vec::new();
    for rank in 1..=NEWS_SLOTS {
        let name = format!("Top{rank}");
        match headers.iter().position(|h| h.eq_ignore_ascii_case(&name)) {
            Some(i) => top_is.push(i),
            None => break,
        }
    }
    if top_is.is_empty() {
        return Err(NewsTextError::MissingColumn("Top1".into()));
    }

    let mut bundles = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_date = record.get(date_i).ok_or_else(|| NewsTextError::Line {
            line,
            detail: "row has no date field".into(),
        })?;
        let date = NaiveDate::parse_from_str(raw_date.trim(), "%Y-%m-%d").map_err(|e| {
            NewsTextError::Line {
                line,
                detail: format!("bad date `{raw_date}`: {e}"),
            }
        })?;
        let mut headlines = Vec::new();
        for &i in &top_is {
            let cell = record.get(i).map(strip_wrappers).unwrap_or("");
            if !cell.is_empty() {
                headlines.push(clean_headline(cell));
            }
        }
        bundles.push(HeadlineBundle { date, headlines });
    }
    if bundles.is_empty() {
        return Err(NewsTextError::Empty);
    }
    bundles.sort_by_key(|b| b.date);
    for pair in bundles.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(NewsTextError::Line {
                line: 0,
                detail: format!("duplicate date {}", pair[0].date),
            });
        }
    }
    Ok(bundles)
}

/// Aligns bundles to a trading calendar: the result has exactly one
/// bundle per trading day, in order. Days without news get an empty
/// bundle; news on non-trading days (weekends, holidays) is dropped.
pub fn align_to_trading_days(
    bundles: &[HeadlineBundle],
    trading_days: &[NaiveDate],
) -> Vec<HeadlineBundle> {
    let by_date: std::collections::HashMap<NaiveDate, &HeadlineBundle> =
        bundles.iter().map(|b| (b.date, b)).collect();
    trading_days
        .iter()
        .map(|&date| match by_date.get(&date) {
            Some(b) => (*b).clone(),
            None => HeadlineBundle {
                date,
                headlines: Vec::new(),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_header() -> String {
        let tops: Vec<String> = (1..=NEWS_SLOTS).map(|i| format!("Top{i}")).collect();
        format!("Date,{}", tops.join(","))
    }

    fn row(date: &str, headlines: &[&str]) -> String {
        let mut cells = vec![date.to_string()];
        cells.extend(headlines.iter().map(|h| h.to_string()));
        while cells.len() < NEWS_SLOTS + 1 {
            cells.push(String::new());
        }
        cells.join(",")
    }

    #[test]
    fn strips_byte_literal_and_quote_wrappers() {
        assert_eq!(strip_wrappers("b'Oil prices rise'"), "Oil prices rise");
        assert_eq!(strip_wrappers("\"b'Nested case'\""), "Nested case");
        assert_eq!(strip_wrappers("b\"Double quoted\""), "Double quoted");
        assert_eq!(strip_wrappers("plain text"), "plain text");
        assert_eq!(strip_wrappers("  padded  "), "padded");
        assert_eq!(strip_wrappers("b''"), "");
        assert_eq!(strip_wrappers("'"), "'", "lone quote is content");
    }

    #[test]
    fn parses_rows_into_cleaned_bundles() {
        let csv = format!(
            "{}\n{}\n{}\n",
            full_header(),
            row("2015-06-01", &["b'Markets Rally Hard'", "Oil falls 5%"]),
            row("2015-06-02", &["Fed holds rates"]),
        );
        let bundles = parse_news_csv(csv.as_bytes()).unwrap();
        assert_eq!(bundles.len(), 2);
        assert_eq!(bundles[0].headlines.len(), 2);
        assert_eq!(bundles[0].headlines[0], vec!["markets", "rally", "hard"]);
        assert_eq!(bundles[0].headlines[1], vec!["oil", "falls"]);
        assert_eq!(bundles[1].headlines.len(), 1);
    }

    #[test]
    fn empty_cells_are_absent_headlines() {
        let csv = format!(
            "{}\n{}\n",
            full_header(),
            row("2015-06-01", &["First story", "", "Third story"]),
        );
        let bundles = parse_news_csv(csv.as_bytes()).unwrap();
        // The empty rank-2 cell is skipped; ranks compact.
        assert_eq!(bundles[0].headlines.len(), 2);
    }

    #[test]
    fn rows_are_sorted_by_date() {
        let csv = format!(
            "{}\n{}\n{}\n",
            full_header(),
            row("2015-06-02", &["Later"]),
            row("2015-06-01", &["Earlier"]),
        );
        let bundles = parse_news_csv(csv.as_bytes()).unwrap();
        assert!(bundles[0].date < bundles[1].date);
        assert_eq!(bundles[0].headlines[0], vec!["earlier"]);
    }

    #[test]
    fn duplicate_dates_are_rejected() {
        let csv = format!(
            "{}\n{}\n{}\n",
            full_header(),
            row("2015-06-01", &["One"]),
            row("2015-06-01", &["Two"]),
        );
        assert!(parse_news_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn missing_top1_column_is_a_schema_error() {
        let err = parse_news_csv("Date,Other\n2015-06-01,x\n".as_bytes()).unwrap_err();
        assert!(
            matches!(&err, NewsTextError::MissingColumn(c) if c == "Top1"),
            "got {err}"
        );
    }

    #[test]
    fn bad_date_reports_the_line() {
        let csv = format!("{}\n{}\n", full_header(), row("06/01/2015", &["x"]));
        let err = parse_news_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, NewsTextError::Line { line: 2, .. }), "got {err}");
    }

    #[test]
    fn alignment_gives_every_trading_day_exactly_one_bundle() {
        let d = |day: u32| NaiveDate::from_ymd_opt(2015, 6, day).unwrap();
        // June 6-7 2015 is a weekend; June 8 has no news row.
        let csv = format!(
            "{}\n{}\n{}\n{}\n",
            full_header(),
            row("2015-06-05", &["Friday story"]),
            row("2015-06-06", &["Saturday story"]),
            row("2015-06-09", &["Tuesday story"]),
        );
        let bundles = parse_news_csv(csv.as_bytes()).unwrap();
        let trading = [d(5), d(8), d(9)];
        let aligned = align_to_trading_days(&bundles, &trading);
        assert_eq!(aligned.len(), 3);
        assert_eq!(aligned[0].date, d(5));
        assert_eq!(aligned[0].headlines.len(), 1);
        assert!(aligned[1].headlines.is_empty(), "no-news day is empty");
        assert_eq!(aligned[2].headlines.len(), 1);
        // The Saturday bundle is nowhere in the output.
        assert!(aligned.iter().all(|b| b.date != d(6)));
    }
}
