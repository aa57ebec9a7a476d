//! How forecast quality varies with the generation horizon `q`.
//!
//! Trains one reduced-scale model per horizon on the same synthetic
//! series and scores each with the rolling strategy on the same held-out
//! days. Longer horizons average more rounds per day but push the later
//! rounds onto older anchors, so the trade-off is an empirical question
//! — the sweep prints one row per horizon and asserts nothing about the
//! ordering. On this series the planted signal is a persistent regime,
//! so accuracy decays only gently as `q` grows.
//!
//! Run with: `cargo run --release --example horizon_sweep`

use std::error::Error;
use std::time::Instant;

use marketgan::deploy::{metrics, rolling_predict_range, CheckpointGenerator, NoiseMode};
use marketgan::marketdata::{assign_windows, chrono_split};
use marketgan::synthetic::{planted_signal, PlantedSignalConfig};
use marketgan::training::{train, TrainConfig, TrainingSet};

fn main() -> Result<(), Box<dyn Error>> {
    let data = planted_signal(&PlantedSignalConfig::default())?;
    let split = chrono_split(data.len(), (8, 1, 1))?;
    let deploy = data.deployment_data();
    let from = data.dates()[split.test.start];
    let to = *data.dates().last().expect("series is nonempty");

    println!("{:>2}  {:>7}  {:>8}  {:>7}  {:>7}  {:>6}", "q", "windows", "accuracy", "f1", "mcc", "secs");
    for horizon in [1, 2, 3, 5, 7, 10] {
        let config = TrainConfig {
            window: 10,
            horizon,
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
        let parts = assign_windows(data.windows(config.window, horizon)?, &split);
        let n_train = parts.train.len();
        let set = TrainingSet::new(data.features().clone(), None, parts.train)?;

        let started = Instant::now();
        let run = train(&set, &config)?;
        let mut generator = CheckpointGenerator::new(&run.checkpoint, NoiseMode::Zero)?;
        let rows = rolling_predict_range(&mut generator, &deploy, from, to)?;

        let mut predicted = Vec::new();
        let mut realized = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if let Some(p) = &row.prediction {
                predicted.push(p.movement);
                realized.push(data.targets()[split.test.start + i].movement);
            }
        }
        let report = metrics(&predicted, &realized)?;
        println!(
            "{horizon:>2}  {n_train:>7}  {:>8.4}  {:>7.4}  {:>+7.4}  {:>6.1}",
            report.accuracy,
            report.f1,
            report.mcc,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
