//! Prediction files and the metrics report.
//!
//! The prediction CSV has one row per requested trading day:
//! `date,mean_return,movement,round_1,...,round_q,status`. Successful
//! rows carry full-precision values and status `ok`; failed days keep
//! their row with the value cells empty and the reason in `status`, so
//! a date range never has silent holes. The metrics report is flat
//! `key value` text with the confusion counts, the three scores, and
//! the persistence baseline's accuracy for comparison.

use std::path::Path;

use chrono::NaiveDate;

use crate::marketdata::movement_sign;

use super::metrics::EvalReport;
use super::rolling::{PredictionRecord, PredictionRow};
use super::DeployError;

fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes prediction rows with `horizon` round columns. Dates must be
/// strictly increasing, and each row's shape must match its status.
pub fn write_predictions(
    path: &Path,
    rows: &[PredictionRow],
    horizon: usize,
) -> Result<(), DeployError> {
    if rows.is_empty() {
        return Err(DeployError::Data("no prediction rows to write".into()));
    }
    if horizon == 0 {
        return Err(DeployError::Data("horizon must be at least 1".into()));
    }
    for pair in rows.windows(2) {
        if pair[0].date >= pair[1].date {
            return Err(DeployError::Data(format!(
                "prediction rows must have strictly increasing dates; {} is followed by {}",
                pair[0].date, pair[1].date
            )));
        }
    }
    let mut header = vec!["date".to_string(), "mean_return".into(), "movement".into()];
    header.extend((1..=horizon).map(|j| format!("round_{j}")));
    header.push("status".into());

    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.date.to_string()];
        match &row.prediction {
            Some(p) => {
                if row.status != "ok" {
                    return Err(DeployError::Data(format!(
                        "row {} holds a prediction but its status is `{}`",
                        row.date, row.status
                    )));
                }
                if p.round_returns.len() != horizon {
                    return Err(DeployError::Data(format!(
                        "row {} has {} rounds but the file is for horizon {horizon}",
                        row.date,
                        p.round_returns.len()
                    )));
                }
                record.push(exact(p.mean_return));
                record.push(p.movement.to_string());
                record.extend(p.round_returns.iter().map(|&v| exact(v)));
                record.push("ok".into());
            }
            None => {
                if row.status == "ok" || row.status.is_empty() {
                    return Err(DeployError::Data(format!(
                        "failed row {} needs a non-ok status explaining it",
                        row.date
                    )));
                }
                record.extend(std::iter::repeat(String::new()).take(2 + horizon));
                record.push(row.status.clone());
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    value: &str,
    what: &str,
    date: NaiveDate,
) -> Result<T, DeployError> {
    value.parse().map_err(|_| {
        DeployError::PredictionFormat(format!("row {date}: cannot parse {what} from `{value}`"))
    })
}

/// Reads a file written by [`write_predictions`], re-checking the row
/// invariants (mean = average of rounds, movement = sign of mean,
/// strictly increasing dates).
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, DeployError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| DeployError::PredictionFormat("empty file".into()))??;
    if header.len() < 5
        || &header[0] != "date"
        || &header[1] != "mean_return"
        || &header[2] != "movement"
        || &header[header.len() - 1] != "status"
    {
        return Err(DeployError::PredictionFormat(
            "header must be date,mean_return,movement,round_1,...,status".into(),
        ));
    }
    let horizon = header.len() - 4;
    for j in 1..=horizon {
        if &header[2 + j] != format!("round_{j}").as_str() {
            return Err(DeployError::PredictionFormat(format!(
                "round column {} is named `{}`, expected `round_{j}`",
                2 + j,
                &header[2 + j]
            )));
        }
    }

    let mut rows: Vec<PredictionRow> = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DeployError::PredictionFormat(format!(
                "data row {} has {} fields, expected {}",
                i + 1,
                record.len(),
                header.len()
            )));
        }
        let date: NaiveDate = record[0].parse().map_err(|_| {
            DeployError::PredictionFormat(format!(
                "data row {}: cannot parse date from `{}`",
                i + 1,
                &record[0]
            ))
        })?;
        if let Some(prev) = rows.last() {
            if prev.date >= date {
                return Err(DeployError::PredictionFormat(format!(
                    "dates must be strictly increasing; {} is followed by {date}",
                    prev.date
                )));
            }
        }
        let status = record[record.len() - 1].to_string();
        let row = if status == "ok" {
            let mean_return: f64 = parse_field(&record[1], "mean_return", date)?;
            let movement: i8 = parse_field(&record[2], "movement", date)?;
            let round_returns: Vec<f64> = (0..horizon)
                .map(|j| parse_field(&record[3 + j], &format!("round_{}", j + 1), date))
                .collect::<Result<_, _>>()?;
            let implied = round_returns.iter().sum::<f64>() / horizon as f64;
            if (mean_return - implied).abs() > 1e-12 {
                return Err(DeployError::PredictionFormat(format!(
                    "row {date}: mean_return {mean_return} does not match the round average {implied}"
                )));
            }
            if movement != movement_sign(mean_return) {
                return Err(DeployError::PredictionFormat(format!(
                    "row {date}: movement {movement} does not match the sign of {mean_return}"
                )));
            }
            PredictionRow {
                date,
                prediction: Some(PredictionRecord {
                    target_date: date,
                    round_returns,
                    mean_return,
                    movement,
                }),
                status,
            }
        } else {
            if record.iter().skip(1).take(2 + horizon).any(|f| !f.is_empty()) {
                return Err(DeployError::PredictionFormat(format!(
                    "row {date}: failed rows must leave the value cells empty"
                )));
            }
            PredictionRow {
                date,
                prediction: None,
                status,
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DeployError::PredictionFormat("no data rows".into()));
    }
    Ok(rows)
}

/// Writes the metrics report: flat `key value` lines with the model's
/// confusion counts and scores, plus the persistence baseline's accuracy.
pub fn write_metrics_report(
    path: &Path,
    model: &EvalReport,
    naive: &EvalReport,
) -> Result<(), DeployError> {
    let text = format!(
        "tp {}\ntn {}\nfp {}\nfn {}\naccuracy {:.6}\nf1 {:.6}\nmcc {:.6}\nnaive_accuracy {:.6}\n",
        model.true_positives,
        model.true_negatives,
        model.false_positives,
        model.false_negatives,
        model.accuracy,
        model.f1,
        model.mcc,
        naive.accuracy,
    );
    std::fs::write(path, text)?;
    Ok(())
}
