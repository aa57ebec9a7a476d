//! The adversarial training loop.
//!
//! Each iteration processes one shuffled mini-batch. The critic is
//! updated every iteration: the generator runs forward (frozen) to
//! produce fake sequences, the critic scores real against fake, takes an
//! RMSprop step on `-mean f_c(real) + mean f_c(fake)`, and its weights
//! are clamped to the clip threshold. Every `n_critic`-th iteration the
//! generator additionally takes a step on fresh noise over the same
//! batch, minimizing the adversarial score plus the supervised and
//! directional penalties.
//!
//! One [`LossRecord`] is appended per iteration. On iterations without a
//! generator step the generator-side columns are evaluated (not trained)
//! from the batch the critic just saw, so the log has no holes. A
//! non-finite value in any column aborts the run immediately.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{rmsprop_step, Graph, OptimizerState, Phase, RmspropConfig, Tensor};
use crate::networks::{generator_forward, GeneratorInputs, Mount, NoiseSpec};

use super::checkpoint::{build_model, Checkpoint, RngSnapshot};
use super::config::TrainConfig;
use super::data::TrainingSet;
use super::losses::{
    clip_weights, critic_loss, generator_loss, supervised_loss, weighted_loss_smooth,
};
use super::TrainingError;

/// One loss-log row. `iteration` counts globally from 1; `epoch` counts
/// from 1. `weighted_loss` is the smooth surrogate the generator trains
/// on, not the hard count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub epoch: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub supervised_loss: f64,
    pub weighted_loss: f64,
}

/// A finished training run.
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    /// One record per iteration, in order.
    pub log: Vec<LossRecord>,
    /// Generator steps the `n_critic` schedule produced.
    pub generator_updates: u64,
    /// Largest critic weight magnitude observed right after any clip;
    /// stays at or below the clip threshold when clipping works.
    pub max_post_clip_abs: f64,
}

impl std::fmt::Debug for TrainRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainRun")
            .field("iterations", &self.log.len())
            .field("generator_updates", &self.generator_updates)
            .field("max_post_clip_abs", &self.max_post_clip_abs)
            .finish_non_exhaustive()
    }
}

fn batch_inputs(
    graph: &mut Graph,
    noise: NoiseSpec,
    feature_steps: &[Tensor],
    news: Option<&Tensor>,
    rng: &mut ChaCha8Rng,
) -> GeneratorInputs {
    let batch = feature_steps[0].rows();
    let window = feature_steps.len();
    GeneratorInputs {
        noise: noise
            .sample(batch, window, rng)
            .into_iter()
            .map(|t| graph.constant(t))
            .collect(),
        features: feature_steps
            .iter()
            .map(|t| graph.constant(t.clone()))
            .collect(),
        news: news.map(|t| graph.constant(t.clone())),
    }
}

fn check_finite(record: &LossRecord) -> Result<(), TrainingError> {
    for (column, value) in [
        ("critic_loss", record.critic_loss),
        ("generator_loss", record.generator_loss),
        ("supervised_loss", record.supervised_loss),
        ("weighted_loss", record.weighted_loss),
    ] {
        if !value.is_finite() {
            return Err(TrainingError::NonFinite {
                column,
                iteration: record.iteration,
                epoch: record.epoch,
            });
        }
    }
    Ok(())
}

fn scalar(graph: &Graph, node: crate::autodiff::NodeId) -> f64 {
    graph.value(node).data()[0]
}

/// Trains a generator/critic pair on `data` and returns the finished
/// model together with the full loss log. The run is deterministic in
/// `config.seed`.
pub fn train(data: &TrainingSet, config: &TrainConfig) -> Result<TrainRun, TrainingError> {
    config.validate()?;
    if data.window() != config.window {
        return Err(TrainingError::Config(format!(
            "config expects {}-day windows but the training set holds {}-day windows",
            config.window,
            data.window()
        )));
    }
    if data.horizon() != config.horizon {
        return Err(TrainingError::Config(format!(
            "config expects horizon {} but the training set holds horizon {}",
            config.horizon,
            data.horizon()
        )));
    }
    let news_dim = if config.use_news {
        let have = data.news_dim().ok_or_else(|| {
            TrainingError::Config(
                "config enables news but the training set has no news tensor".into(),
            )
        })?;
        let want = config.headline_slots * config.embedding_dim;
        if have != want {
            return Err(TrainingError::Config(format!(
                "news tensor has {have} columns but the config implies {want} \
                 ({} slots x {} embedding dims)",
                config.headline_slots, config.embedding_dim
            )));
        }
        Some(have)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = build_model(config, data.feature_dim(), &mut rng)?;
    let mut generator_state = model.generator.fresh_state();
    let mut generator_opt = OptimizerState::new(&model.generator_set);
    let mut critic_opt = OptimizerState::new(&model.critic_set);
    let generator_rms = RmspropConfig::with_learning_rate(config.generator_lr);
    let critic_rms = RmspropConfig::with_learning_rate(config.critic_lr);
    let weights = config.loss_weights();
    let noise = config.noise_spec()?;

    let mut log = Vec::new();
    let mut iteration: u64 = 0;
    let mut generator_updates: u64 = 0;
    let mut max_post_clip_abs: f64 = 0.0;
    let mut order: Vec<usize> = (0..data.window_count()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                // Batch statistics are meaningless on a single row; the
                // leftover windows return in the next epoch's shuffle.
                continue;
            }
            iteration += 1;
            let real = data.real_batch(batch);
            let feature_steps = data.feature_steps(batch);
            let news = news_dim.and(data.news_steps(batch));

            // Critic step: generate with the generator frozen, then
            // score real against fake as plain constants so the
            // backward pass touches only critic parameters.
            let fake_values = {
                let mut graph = Graph::new();
                let inputs = batch_inputs(
                    &mut graph,
                    noise,
                    &feature_steps,
                    news.as_ref(),
                    &mut rng,
                );
                let fake = generator_forward(
                    &mut graph,
                    Mount::frozen(&model.generator_set),
                    &model.generator,
                    &mut generator_state,
                    &inputs,
                    Phase::Train,
                )?;
                graph.value(fake).clone()
            };
            let (critic_value, mean_fake_score) = {
                let mut graph = Graph::new();
                let real_node = graph.constant(real.clone());
                let fake_node = graph.constant(fake_values.clone());
                let loss = critic_loss(
                    &mut graph,
                    Mount::trainable(&model.critic_set),
                    &model.critic,
                    real_node,
                    fake_node,
                )?;
                model.critic_set.zero_grads();
                graph.backward(loss.total, &mut model.critic_set)?;
                rmsprop_step(&mut model.critic_set, &mut critic_opt, &critic_rms)?;
                (scalar(&graph, loss.total), scalar(&graph, loss.fake_score))
            };
            clip_weights(&mut model.critic_set, config.clip_threshold);
            max_post_clip_abs = max_post_clip_abs.max(model.critic_set.max_abs_value());

            let record = if iteration % config.n_critic as u64 == 0 {
                // Generator step: fresh noise, same batch, critic frozen.
                let mut graph = Graph::new();
                let inputs = batch_inputs(
                    &mut graph,
                    noise,
                    &feature_steps,
                    news.as_ref(),
                    &mut rng,
                );
                let real_node = graph.constant(real);
                let fake = generator_forward(
                    &mut graph,
                    Mount::trainable(&model.generator_set),
                    &model.generator,
                    &mut generator_state,
                    &inputs,
                    Phase::Train,
                )?;
                let loss = generator_loss(
                    &mut graph,
                    Mount::frozen(&model.critic_set),
                    &model.critic,
                    real_node,
                    fake,
                    &weights,
                )?;
                model.generator_set.zero_grads();
                graph.backward(loss.total, &mut model.generator_set)?;
                rmsprop_step(&mut model.generator_set, &mut generator_opt, &generator_rms)?;
                generator_updates += 1;
                LossRecord {
                    iteration,
                    epoch,
                    critic_loss: critic_value,
                    generator_loss: scalar(&graph, loss.total),
                    supervised_loss: scalar(&graph, loss.supervised),
                    weighted_loss: scalar(&graph, loss.weighted),
                }
            } else {
                // No generator step this iteration; evaluate its loss
                // terms on the critic step's batch so every row of the
                // log is complete. Same graph ops, no backward.
                let mut graph = Graph::new();
                let real_node = graph.constant(real);
                let fake_node = graph.constant(fake_values);
                let supervised = supervised_loss(&mut graph, real_node, fake_node)?;
                let weighted = weighted_loss_smooth(&mut graph, real_node, fake_node, &weights)?;
                let supervised = scalar(&graph, supervised);
                let weighted = scalar(&graph, weighted);
                LossRecord {
                    iteration,
                    epoch,
                    critic_loss: critic_value,
                    generator_loss: -mean_fake_score
                        + weights.gamma_supervised * supervised
                        + weights.gamma_directional * weighted,
                    supervised_loss: supervised,
                    weighted_loss: weighted,
                }
            };
            check_finite(&record)?;
            log.push(record);
        }
    }

    Ok(TrainRun {
        checkpoint: Checkpoint {
            config: config.clone(),
            feature_dim: data.feature_dim(),
            epoch: config.epochs as u64,
            generator_set: model.generator_set,
            generator: model.generator,
            generator_state,
            critic_set: model.critic_set,
            critic: model.critic,
            generator_opt,
            critic_opt,
            rng: RngSnapshot::capture(&rng),
            stats: None,
            news_tokens: None,
        },
        log,
        generator_updates,
        max_post_clip_abs,
    })
}

fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the loss log as CSV, one row per iteration, floats in
/// full-precision scientific notation.
pub fn write_loss_log(path: &Path, log: &[LossRecord]) -> Result<(), TrainingError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "iteration",
        "epoch",
        "critic_loss",
        "generator_loss",
        "supervised_loss",
        "weighted_loss",
    ])?;
    for r in log {
        writer.write_record([
            r.iteration.to_string(),
            r.epoch.to_string(),
            exact(r.critic_loss),
            exact(r.generator_loss),
            exact(r.supervised_loss),
            exact(r.weighted_loss),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
