//! The pipeline's five stages as subcommands.
//!
//! `features` exports the engineered feature matrix, `train` fits a
//! model and writes a checkpoint plus a per-iteration loss log,
//! `predict` rolls a checkpoint over a date range into a prediction CSV,
//! `evaluate` scores predictions against realized movements, and
//! `gradcheck` sweeps the model's gradients against finite differences
//! at toy scale. Every input is an explicit flag — no environment
//! variables — and training settings come from an optional flat
//! `key = value` config file that individual flags override.

use std::collections::HashMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::autodiff::Tensor;
use crate::deploy::{
    metrics, naive_baseline, read_predictions, rolling_predict_range, write_metrics_report,
    write_predictions, CheckpointGenerator, DeployError, DeploymentData, NoiseMode,
};
use crate::marketdata::{
    assemble_features, assemble_features_with_stats, assign_windows, make_windows,
    parse_ohlc_csv, parse_volatility_csv, target_returns, write_feature_csv, MarketDataError,
    PriceSeries,
};
use crate::newstext::{
    align_to_trading_days, corpus_max_length, embed_day, parse_embedding_file, parse_news_csv,
    NewsTextError,
};
use crate::training::{
    feature_tensor, gradient_suite, load_checkpoint, save_checkpoint, toy_suite_config, train,
    write_loss_log, TrainConfig, TrainingError, TrainingSet,
};

/// Errors surfaced to the user as one-line diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("market data: {0}")]
    MarketData(#[from] MarketDataError),
    #[error("news: {0}")]
    News(#[from] NewsTextError),
    #[error("training: {0}")]
    Training(#[from] TrainingError),
    #[error("deployment: {0}")]
    Deploy(#[from] DeployError),
}

#[derive(Parser, Debug)]
#[command(
    name = "marketgan",
    version,
    about = "Adversarial multi-step forecasting of stock-index returns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the market feature matrix from price CSVs and export it
    Features(FeaturesArgs),
    /// Train the model; write a checkpoint and a per-iteration loss log
    Train(Box<TrainArgs>),
    /// Roll a trained checkpoint over a date range into a prediction CSV
    Predict(PredictArgs),
    /// Score a prediction CSV against realized movements
    Evaluate(EvaluateArgs),
    /// Check model gradients against finite differences at toy scale
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// OHLC price CSV (Date,Open,High,Low,Close,...)
    #[arg(long)]
    pub prices: PathBuf,
    /// Volatility-index CSV; only Date and Close are read
    #[arg(long)]
    pub volatility: PathBuf,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// Chronological train/valid/test ratio fitting the scaling statistics
    #[arg(long, default_value = "8,1,1", value_parser = parse_ratios)]
    pub ratios: (usize, usize, usize),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// OHLC price CSV (Date,Open,High,Low,Close,...)
    #[arg(long)]
    pub prices: PathBuf,
    /// Volatility-index CSV; only Date and Close are read
    #[arg(long)]
    pub volatility: PathBuf,
    /// Daily headlines CSV; required when the config enables news
    #[arg(long)]
    pub news: Option<PathBuf>,
    /// Word-embedding text file; required when the config enables news
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Flat `key = value` config file; omitted keys keep their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Chronological train/valid/test split ratio
    #[arg(long, default_value = "8,1,1", value_parser = parse_ratios)]
    pub ratios: (usize, usize, usize),
    /// Output checkpoint path
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output loss-log CSV path
    #[arg(long)]
    pub loss_log: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

/// Per-field overrides applied on top of the config file (or defaults);
/// a flag always wins over the file.
#[derive(Args, Debug, Default)]
pub struct ConfigOverrides {
    /// Windows per batch
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Generator RMSProp learning rate
    #[arg(long)]
    pub generator_lr: Option<f64>,
    /// Critic RMSProp learning rate
    #[arg(long)]
    pub critic_lr: Option<f64>,
    /// Critic weights are clamped into [-threshold, threshold]
    #[arg(long)]
    pub clip_threshold: Option<f64>,
    /// Critic updates per generator update
    #[arg(long)]
    pub n_critic: Option<usize>,
    /// Passes over the training windows
    #[arg(long)]
    pub epochs: Option<usize>,
    /// RNG seed for parameters, shuffling, and noise
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directional cost of calling a down-move up
    #[arg(long)]
    pub lambda_fp: Option<f64>,
    /// Directional cost of missing an up-move
    #[arg(long)]
    pub lambda_fn: Option<f64>,
    /// Weight of the supervised (squared-error) loss term
    #[arg(long)]
    pub gamma_supervised: Option<f64>,
    /// Weight of the directional (weighted) loss term
    #[arg(long)]
    pub gamma_directional: Option<f64>,
    /// Temperature of the smooth directional surrogate
    #[arg(long)]
    pub temperature: Option<f64>,
    /// History days per window (w)
    #[arg(long)]
    pub window: Option<usize>,
    /// Future days predicted per window (q)
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Noise vector dimension (d_z)
    #[arg(long)]
    pub noise_dim: Option<usize>,
    /// Encoder GRU hidden width
    #[arg(long)]
    pub encoder_hidden: Option<usize>,
    /// Decoder GRU hidden width
    #[arg(long)]
    pub decoder_hidden: Option<usize>,
    /// Critic GRU hidden width
    #[arg(long)]
    pub critic_hidden: Option<usize>,
    /// News context vector dimension (g)
    #[arg(long)]
    pub news_context_dim: Option<usize>,
    /// Word-embedding dimension (m)
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Headline slots per day (k)
    #[arg(long)]
    pub headline_slots: Option<usize>,
    /// Feed headline embeddings into the generator
    #[arg(long)]
    pub use_news: Option<bool>,
    /// Keep the volatility-ratio feature column
    #[arg(long)]
    pub use_volatility: Option<bool>,
    /// Attend over encoder states instead of using the last one
    #[arg(long)]
    pub use_attention: Option<bool>,
    /// Draw fresh noise per history step instead of one shared vector
    #[arg(long)]
    pub per_step_noise: Option<bool>,
}

impl ConfigOverrides {
    pub fn apply(&self, config: &mut TrainConfig) {
        macro_rules! put {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = self.$field {
                    config.$field = v;
                })*
            };
        }
        put!(
            batch_size,
            generator_lr,
            critic_lr,
            clip_threshold,
            n_critic,
            epochs,
            seed,
            lambda_fp,
            lambda_fn,
            gamma_supervised,
            gamma_directional,
            temperature,
            window,
            horizon,
            noise_dim,
            encoder_hidden,
            decoder_hidden,
            critic_hidden,
            news_context_dim,
            embedding_dim,
            headline_slots,
            use_news,
            use_volatility,
            use_attention,
            per_step_noise,
        );
    }
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Trained checkpoint to deploy
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// OHLC price CSV (Date,Open,High,Low,Close,...)
    #[arg(long)]
    pub prices: PathBuf,
    /// Volatility-index CSV; only Date and Close are read
    #[arg(long)]
    pub volatility: PathBuf,
    /// Daily headlines CSV; required when the checkpoint uses news
    #[arg(long)]
    pub news: Option<PathBuf>,
    /// Word-embedding text file; required when the checkpoint uses news
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// First target date (YYYY-MM-DD)
    #[arg(long)]
    pub from: NaiveDate,
    /// Last target date, inclusive
    #[arg(long)]
    pub to: NaiveDate,
    /// Output prediction CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// Average each round over this many noise draws (default: zero noise)
    #[arg(long)]
    pub noise_draws: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Prediction CSV produced by `predict`
    #[arg(long)]
    pub predictions: PathBuf,
    /// OHLC price CSV supplying the realized movements
    #[arg(long)]
    pub prices: PathBuf,
    /// Output metrics report path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Central-difference half step
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Probe-batch seed
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Exit nonzero when the max relative error exceeds this
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Features(args) => run_features(args),
        Command::Train(args) => run_train(*args),
        Command::Predict(args) => run_predict(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Gradcheck(args) => run_gradcheck(args),
    }
}

fn run_features(args: FeaturesArgs) -> Result<(), CliError> {
    let series = load_series(&args.prices, &args.volatility)?;
    let (matrix, split, stats) = assemble_features(&series, args.ratios)?;
    write_feature_csv(&matrix, create_file(&args.out)?)?;
    println!(
        "wrote {} feature rows to {} ({}/{}/{} train/valid/test days; \
         macd bounds fitted on train: [{:.6}, {:.6}])",
        matrix.len(),
        args.out.display(),
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        stats.macd_min,
        stats.macd_max,
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::from_key_value_text(&read_file(path)?)?,
        None => TrainConfig::default(),
    };
    args.overrides.apply(&mut config);
    config.validate()?;

    let series = load_series(&args.prices, &args.volatility)?;
    let (matrix, split, stats) = assemble_features(&series, args.ratios)?;
    let features = feature_tensor(&matrix, config.use_volatility);
    let windows = make_windows(&matrix.dates, &matrix.targets, config.window, config.horizon)?;
    let parts = assign_windows(windows, &split);

    let (news, news_tokens) = if config.use_news {
        let news_path = require_flag(&args.news, "--news", "the config enables news")?;
        let emb_path = require_flag(&args.embeddings, "--embeddings", "the config enables news")?;
        let (tensor, tokens) = news_day_matrix(
            news_path,
            emb_path,
            &matrix.dates,
            config.headline_slots,
            config.embedding_dim,
            None,
        )?;
        (Some(tensor), Some(tokens))
    } else {
        (None, None)
    };

    let set = TrainingSet::new(features, news, parts.train)?;
    println!(
        "training on {} windows over {} days ({} epochs, batch {})",
        set.window_count(),
        matrix.len(),
        config.epochs,
        config.batch_size,
    );
    let start = Instant::now();
    let mut run = train(&set, &config)?;
    run.checkpoint.stats = Some(stats);
    run.checkpoint.news_tokens = news_tokens;
    save_checkpoint(&run.checkpoint, &args.checkpoint)?;
    write_loss_log(&args.loss_log, &run.log)?;
    println!(
        "{} iterations ({} generator updates) in {:.1}s; \
         final critic loss {:.6}, generator loss {:.6}",
        run.log.len(),
        run.generator_updates,
        start.elapsed().as_secs_f64(),
        run.log.last().map_or(f64::NAN, |r| r.critic_loss),
        run.log.last().map_or(f64::NAN, |r| r.generator_loss),
    );
    println!("checkpoint: {}", args.checkpoint.display());
    println!("loss log: {}", args.loss_log.display());
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), CliError> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let stats = checkpoint.stats.ok_or_else(|| {
        CliError::Usage(format!(
            "checkpoint `{}` carries no feature-scaling statistics, so it cannot \
             be deployed on market CSVs",
            args.checkpoint.display()
        ))
    })?;
    let series = load_series(&args.prices, &args.volatility)?;
    let matrix = assemble_features_with_stats(&series, &stats)?;
    let features = feature_tensor(&matrix, checkpoint.config.use_volatility);

    let news = if checkpoint.config.use_news {
        let news_path = require_flag(&args.news, "--news", "the checkpoint was trained with news")?;
        let emb_path = require_flag(
            &args.embeddings,
            "--embeddings",
            "the checkpoint was trained with news",
        )?;
        let tokens = checkpoint.news_tokens.ok_or_else(|| {
            CliError::Usage(
                "checkpoint enables news but stores no token-axis length".into(),
            )
        })?;
        let (tensor, _) = news_day_matrix(
            news_path,
            emb_path,
            &matrix.dates,
            checkpoint.config.headline_slots,
            checkpoint.config.embedding_dim,
            Some(tokens),
        )?;
        Some(tensor)
    } else {
        None
    };

    let data = DeploymentData::new(features, news, matrix.dates.clone())?;
    let mode = match args.noise_draws {
        None => NoiseMode::Zero,
        Some(draws) => NoiseMode::MonteCarlo { draws },
    };
    let mut generator = CheckpointGenerator::new(&checkpoint, mode)?;
    let rows = rolling_predict_range(&mut generator, &data, args.from, args.to)?;
    if rows.is_empty() {
        return Err(CliError::Usage(format!(
            "no trading days between {} and {} in `{}`",
            args.from,
            args.to,
            args.prices.display()
        )));
    }
    write_predictions(&args.out, &rows, checkpoint.config.horizon)?;
    let ok = rows.iter().filter(|r| r.prediction.is_some()).count();
    println!(
        "wrote {} prediction rows ({} ok, {} failed) to {}",
        rows.len(),
        ok,
        rows.len() - ok,
        args.out.display(),
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let rows = read_predictions(&args.predictions)?;
    let series = parse_ohlc_csv(open_file(&args.prices)?)?;
    let realized = target_returns(&series.close)?;
    let movement_on: HashMap<NaiveDate, i8> = series
        .dates
        .iter()
        .zip(&realized)
        .filter_map(|(date, r)| r.map(|t| (*date, t.movement)))
        .collect();

    let mut predicted = Vec::new();
    let mut truths = Vec::new();
    let mut skipped = 0usize;
    for row in &rows {
        let Some(p) = &row.prediction else {
            skipped += 1;
            continue;
        };
        let truth = movement_on.get(&row.date).ok_or_else(|| {
            CliError::Usage(format!(
                "prediction for {} has no realized return in `{}`",
                row.date,
                args.prices.display()
            ))
        })?;
        predicted.push(p.movement);
        truths.push(*truth);
    }

    let model = metrics(&predicted, &truths)?;
    let naive = metrics(&naive_baseline(&truths), &truths)?;
    write_metrics_report(&args.out, &model, &naive)?;
    println!(
        "scored {} predictions ({} failed rows skipped)",
        model.samples(),
        skipped,
    );
    println!(
        "accuracy {:.6}  f1 {:.6}  mcc {:+.6}  (naive persistence accuracy {:.6})",
        model.accuracy, model.f1, model.mcc, naive.accuracy,
    );
    println!("report: {}", args.out.display());
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let config = toy_suite_config();
    let start = Instant::now();
    let report = gradient_suite(&config, args.step, args.seed)?;
    println!(
        "generator: max relative error {:.3e} over {} entries ({} skipped near kinks)",
        report.generator.max_rel_err, report.generator.checked, report.generator.skipped,
    );
    println!(
        "critic: max relative error {:.3e} over {} entries ({} skipped near kinks)",
        report.critic.max_rel_err, report.critic.checked, report.critic.skipped,
    );
    println!(
        "max relative error {:.3e} ({} entries checked in {:.1}s)",
        report.max_rel_err(),
        report.checked(),
        start.elapsed().as_secs_f64(),
    );
    if report.max_rel_err() >= args.tolerance {
        return Err(CliError::Usage(format!(
            "max relative error {:.3e} exceeds the tolerance {:.1e}",
            report.max_rel_err(),
            args.tolerance
        )));
    }
    Ok(())
}

fn load_series(prices: &Path, volatility: &Path) -> Result<PriceSeries, CliError> {
    let series = parse_ohlc_csv(open_file(prices)?)?;
    let (vol_dates, vol_close) = parse_volatility_csv(open_file(volatility)?)?;
    Ok(series.attach_volatility(&vol_dates, &vol_close)?)
}

/// Builds the day-level pooled news matrix (`days × k·m`). The token-axis
/// length is computed from the corpus when `tokens` is `None` (training)
/// and reused verbatim otherwise (deployment, where it must match the
/// length the checkpoint was trained with).
fn news_day_matrix(
    news: &Path,
    embeddings: &Path,
    dates: &[NaiveDate],
    slots: usize,
    dim: usize,
    tokens: Option<usize>,
) -> Result<(Tensor, usize), CliError> {
    let bundles = parse_news_csv(open_file(news)?)?;
    let aligned = align_to_trading_days(&bundles, dates);
    let tokens = match tokens {
        Some(t) => t,
        None => corpus_max_length(&aligned)?,
    };
    let table = parse_embedding_file(open_file(embeddings)?, dim)?;
    let mut cells = Vec::with_capacity(dates.len() * slots * dim);
    for bundle in &aligned {
        cells.extend(embed_day(bundle, &table, tokens, slots).mean_pooled());
    }
    let tensor = Tensor::from_vec(dates.len(), slots * dim, cells)
        .expect("pooled rows match the requested shape");
    Ok((tensor, tokens))
}

fn require_flag<'a>(
    value: &'a Option<PathBuf>,
    flag: &str,
    why: &str,
) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{why}, so `{flag}` is required")))
}

fn open_file(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Usage(format!("cannot open `{}`: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read `{}`: {e}", path.display())))
}

fn create_file(path: &Path) -> Result<File, CliError> {
    File::create(path)
        .map_err(|e| CliError::Usage(format!("cannot create `{}`: {e}", path.display())))
}

fn parse_ratios(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated integers like `8,1,1`, got `{s}`"
        ));
    }
    let part = |p: &str| {
        p.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad ratio component `{p}`"))
    };
    Ok((part(parts[0])?, part(parts[1])?, part(parts[2])?))
}
