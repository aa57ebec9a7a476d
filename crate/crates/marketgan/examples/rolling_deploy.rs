//! Deploying a trained model: checkpoints, rolling prediction, files.
//!
//! Trains briefly on a synthetic series, then walks the full deployment
//! loop. To predict day `t'` with horizon `q`, round `j` feeds the model
//! the `w` feature rows ending `j` days before `t'` and keeps position
//! `j` of the generated sequence — the element that lands on `t'` — so
//! each day's estimate averages `q` forecasts made from `q` different
//! anchor days, none of which sees `t'` or anything after it. The
//! checkpoint and the prediction file both round-trip through disk, and
//! a requested date that cannot be predicted becomes an explicit failed
//! row rather than a silent hole.
//!
//! Run with: `cargo run --release --example rolling_deploy`

use std::error::Error;

use marketgan::deploy::{
    metrics, naive_baseline, rolling_predict_range, CheckpointGenerator, NoiseMode,
};
use marketgan::marketdata::{assign_windows, chrono_split};
use marketgan::synthetic::{planted_signal, PlantedSignalConfig};
use marketgan::training::{load_checkpoint, save_checkpoint, train, TrainConfig, TrainingSet};

fn main() -> Result<(), Box<dyn Error>> {
    let data = planted_signal(&PlantedSignalConfig {
        steps: 1200,
        ..PlantedSignalConfig::default()
    })?;
    let config = TrainConfig {
        window: 10,
        horizon: 5,
        encoder_hidden: 16,
        decoder_hidden: 16,
        critic_hidden: 16,
        epochs: 30,
        generator_lr: 5e-4,
        critic_lr: 2.5e-4,
        lambda_fp: 0.51,
        lambda_fn: 0.49,
        use_news: false,
        ..TrainConfig::default()
    };
    let split = chrono_split(data.len(), (8, 1, 1))?;
    let parts = assign_windows(data.windows(config.window, config.horizon)?, &split);
    let set = TrainingSet::new(data.features().clone(), None, parts.train)?;
    let run = train(&set, &config)?;
    println!(
        "trained {} iterations; weights stay inside the clip threshold (max |w| {:.4})",
        run.log.len(),
        run.max_post_clip_abs
    );

    // Checkpoints round-trip exactly: every weight, the config, and the
    // feature-scaling statistics deployment must reuse.
    let dir = std::env::temp_dir();
    let ck_path = dir.join("rolling_deploy_example.ckpt");
    save_checkpoint(&run.checkpoint, &ck_path)?;
    let restored = load_checkpoint(&ck_path)?;
    println!("checkpoint saved and restored: {}", ck_path.display());

    // Predict the last 40 days. NoiseMode::Zero is the deterministic
    // point forecast; MonteCarlo averages fresh noise draws per round.
    let from = data.dates()[data.len() - 40];
    let to = *data.dates().last().expect("series is nonempty");
    let deploy = data.deployment_data();

    let mut point = CheckpointGenerator::new(&restored, NoiseMode::Zero)?;
    let rows = rolling_predict_range(&mut point, &deploy, from, to)?;

    let mut monte = CheckpointGenerator::new(&restored, NoiseMode::MonteCarlo { draws: 16 })?;
    let sampled = rolling_predict_range(&mut monte, &deploy, from, to)?;

    let first = rows[0]
        .prediction
        .as_ref()
        .expect("day 0 of the range has full history");
    println!("\nrolling prediction for {}:", first.target_date);
    for (j, r) in first.round_returns.iter().enumerate() {
        println!("  round {} (anchor {} day(s) back): {r:+.5}", j + 1, j + 1);
    }
    println!(
        "  mean {:+.5} -> movement {}",
        first.mean_return, first.movement
    );
    let monte_first = sampled[0].prediction.as_ref().expect("same history");
    println!(
        "  with Monte Carlo noise instead: mean {:+.5} -> movement {}",
        monte_first.mean_return, monte_first.movement
    );

    // The prediction file keeps one row per requested day, failures
    // included, and re-checks the row invariants when read back.
    let pred_path = dir.join("rolling_deploy_example_predictions.csv");
    marketgan::deploy::write_predictions(&pred_path, &rows, config.horizon)?;
    let reread = marketgan::deploy::read_predictions(&pred_path)?;
    let ok = reread.iter().filter(|r| r.prediction.is_some()).count();
    println!(
        "\nwrote and re-read {} rows ({} ok, {} failed): {}",
        reread.len(),
        ok,
        reread.len() - ok,
        pred_path.display()
    );

    // Score the point forecasts against the realized movements.
    let offset = data.len() - 40;
    let mut predicted = Vec::new();
    let mut realized = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if let Some(p) = &row.prediction {
            predicted.push(p.movement);
            realized.push(data.targets()[offset + i].movement);
        }
    }
    let report = metrics(&predicted, &realized)?;
    let naive = metrics(&naive_baseline(&realized), &realized)?;
    println!(
        "directional accuracy over {} days: {:.3} (naive persistence {:.3}, mcc {:+.3})",
        report.samples(),
        report.accuracy,
        naive.accuracy,
        report.mcc
    );

    std::fs::remove_file(&ck_path).ok();
    std::fs::remove_file(&pred_path).ok();
    Ok(())
}
