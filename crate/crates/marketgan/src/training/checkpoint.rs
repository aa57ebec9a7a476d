//! Versioned binary checkpoints.
//!
//! A checkpoint freezes everything needed to reproduce forward passes and
//! resume inspection: the run's [`TrainConfig`], both parameter sets,
//! batchnorm running statistics, both optimizer states, the epoch
//! counter, and the RNG state. Writes are atomic (temp file + rename), so
//! a crash mid-save never corrupts an existing checkpoint.
//!
//! # Byte layout (format version 1)
//!
//! All integers are little-endian; floats are IEEE-754 `f64`
//! little-endian. `bool` is one byte, `0` or `1`.
//!
//! ```text
//! magic               8 bytes  b"MGANCKPT"
//! version             u32
//! config              fixed field order:
//!     batch_size n_critic epochs seed          4 × u64 (sizes/counts)
//!     generator_lr critic_lr clip_threshold    3 × f64
//!     lambda_fp lambda_fn                      2 × f64
//!     gamma_supervised gamma_directional       2 × f64
//!     temperature                              f64
//!     window horizon noise_dim                 3 × u64
//!     encoder_hidden decoder_hidden            2 × u64
//!     critic_hidden news_context_dim           2 × u64
//!     embedding_dim headline_slots             2 × u64
//!     use_news use_volatility use_attention
//!     per_step_noise                           4 × bool
//! feature_dim         u64   (market features per day in the run's data)
//! epoch               u64   (completed epochs)
//! generator tensors   count u64, then per tensor:
//!     name      u32 length + UTF-8 bytes
//!     rows cols 2 × u64
//!     data      rows·cols × f64, row-major
//! critic tensors      same encoding
//! norm statistics     count u64, then per news block:
//!     running mean    rows cols 2 × u64 + data (1×features)
//!     running var     same
//! generator optimizer count u64, then per parameter (registration
//!                     order): rows cols 2 × u64 + data
//! critic optimizer    same
//! rng                 seed 32 bytes, stream u64, word position u128
//! feature stats       bool flag; when set: macd_min f64, macd_max f64
//! news token length   bool flag; when set: u64
//! ```
//!
//! The file ends immediately after the last section; trailing bytes are
//! rejected. Tensor names are matched against the freshly built model,
//! so a checkpoint whose config disagrees with its tensors (or one from
//! a different architecture) fails with an error naming the tensor.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{BatchNormState, OptimizerState, ParamSet, Tensor};
use crate::marketdata::PipelineStats;
use crate::networks::{CriticParams, GeneratorParams, GeneratorState, NewsBlockState};

use super::config::TrainConfig;
use super::TrainingError;

const MAGIC: &[u8; 8] = b"MGANCKPT";
/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Longest accepted tensor name; real names are short dotted paths.
const MAX_NAME: u32 = 1024;
/// Largest accepted tensor side and entry count, to reject garbage
/// headers before allocating.
const MAX_DIM: u64 = 1 << 32;
const MAX_ENTRIES: u64 = 1 << 26;

/// Enough ChaCha state to resume the exact random stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngSnapshot {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// A full training snapshot; see the module docs for the on-disk form.
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Market features per day in the data this model was trained on.
    pub feature_dim: usize,
    /// Completed epochs.
    pub epoch: u64,
    pub generator_set: ParamSet,
    pub generator: GeneratorParams,
    /// Batchnorm running statistics for the generator's news blocks.
    pub generator_state: GeneratorState,
    pub critic_set: ParamSet,
    pub critic: CriticParams,
    pub generator_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub rng: RngSnapshot,
    /// Feature-scaling statistics fitted on the training split, carried
    /// so deployment reuses them instead of refitting; `None` for runs
    /// trained on pre-built tensors.
    pub stats: Option<PipelineStats>,
    /// Token-axis length the news pipeline padded to at train time;
    /// deployment must embed with the same length.
    pub news_tokens: Option<usize>,
}

impl std::fmt::Debug for Checkpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Checkpoint")
            .field("epoch", &self.epoch)
            .field("feature_dim", &self.feature_dim)
            .field("generator_tensors", &self.generator_set.len())
            .field("critic_tensors", &self.critic_set.len())
            .finish_non_exhaustive()
    }
}

/// Freshly initialized generator and critic for a config, registered in
/// separate parameter sets (one per adversary, so an optimizer step on
/// one side can never touch the other).
pub(crate) struct ModelBundle {
    pub generator_set: ParamSet,
    pub generator: GeneratorParams,
    pub critic_set: ParamSet,
    pub critic: CriticParams,
}

pub(crate) fn build_model(
    config: &TrainConfig,
    feature_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ModelBundle, TrainingError> {
    let mut generator_set = ParamSet::new();
    let generator = GeneratorParams::register(
        &mut generator_set,
        config.generator_config(feature_dim),
        rng,
    )?;
    let mut critic_set = ParamSet::new();
    let critic = CriticParams::register(
        &mut critic_set,
        "critic",
        config.horizon,
        config.critic_hidden,
        rng,
    )?;
    Ok(ModelBundle {
        generator_set,
        generator,
        critic_set,
        critic,
    })
}

// ---- writing ----------------------------------------------------------

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u128(out: &mut Vec<u8>, v: u128) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bool(out: &mut Vec<u8>, v: bool) {
    out.push(u8::from(v));
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    put_u64(out, t.rows() as u64);
    put_u64(out, t.cols() as u64);
    for &v in t.data() {
        put_f64(out, v);
    }
}

fn put_named_tensors(out: &mut Vec<u8>, set: &ParamSet) {
    put_u64(out, set.len() as u64);
    for id in set.ids() {
        let name = set.name(id).as_bytes();
        put_u32(out, name.len() as u32);
        out.extend_from_slice(name);
        put_tensor(out, set.value(id));
    }
}

fn put_config(out: &mut Vec<u8>, c: &TrainConfig) {
    put_u64(out, c.batch_size as u64);
    put_u64(out, c.n_critic as u64);
    put_u64(out, c.epochs as u64);
    put_u64(out, c.seed);
    put_f64(out, c.generator_lr);
    put_f64(out, c.critic_lr);
    put_f64(out, c.clip_threshold);
    put_f64(out, c.lambda_fp);
    put_f64(out, c.lambda_fn);
    put_f64(out, c.gamma_supervised);
    put_f64(out, c.gamma_directional);
    put_f64(out, c.temperature);
    put_u64(out, c.window as u64);
    put_u64(out, c.horizon as u64);
    put_u64(out, c.noise_dim as u64);
    put_u64(out, c.encoder_hidden as u64);
    put_u64(out, c.decoder_hidden as u64);
    put_u64(out, c.critic_hidden as u64);
    put_u64(out, c.news_context_dim as u64);
    put_u64(out, c.embedding_dim as u64);
    put_u64(out, c.headline_slots as u64);
    put_bool(out, c.use_news);
    put_bool(out, c.use_volatility);
    put_bool(out, c.use_attention);
    put_bool(out, c.per_step_noise);
}

/// Serializes a checkpoint to its binary form.
pub fn checkpoint_bytes(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_config(&mut out, &ck.config);
    put_u64(&mut out, ck.feature_dim as u64);
    put_u64(&mut out, ck.epoch);
    put_named_tensors(&mut out, &ck.generator_set);
    put_named_tensors(&mut out, &ck.critic_set);
    let norms = ck
        .generator_state
        .news
        .as_ref()
        .map_or(&[] as &[BatchNormState], NewsBlockState::norms);
    put_u64(&mut out, norms.len() as u64);
    for norm in norms {
        put_tensor(&mut out, norm.running_mean());
        put_tensor(&mut out, norm.running_var());
    }
    for opt in [&ck.generator_opt, &ck.critic_opt] {
        put_u64(&mut out, opt.accumulators().len() as u64);
        for t in opt.accumulators() {
            put_tensor(&mut out, t);
        }
    }
    out.extend_from_slice(&ck.rng.seed);
    put_u64(&mut out, ck.rng.stream);
    put_u128(&mut out, ck.rng.word_pos);
    put_bool(&mut out, ck.stats.is_some());
    if let Some(stats) = &ck.stats {
        put_f64(&mut out, stats.macd_min);
        put_f64(&mut out, stats.macd_max);
    }
    put_bool(&mut out, ck.news_tokens.is_some());
    if let Some(l) = ck.news_tokens {
        put_u64(&mut out, l as u64);
    }
    out
}

/// Writes the checkpoint atomically: the bytes land in a sibling temp
/// file which is renamed over `path` only after a successful flush.
pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), TrainingError> {
    let bytes = checkpoint_bytes(ck);
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = PathBuf::from(tmp_name);
    let mut file = File::create(&tmp)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    drop(file);
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

// ---- reading ----------------------------------------------------------

struct Section<'a, R: Read> {
    inner: &'a mut R,
}

impl<R: Read> Section<'_, R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>, TrainingError> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                TrainingError::CheckpointTruncated { what: what.into() }
            } else {
                TrainingError::Io(e)
            }
        })?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32, TrainingError> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, TrainingError> {
        Ok(u64::from_le_bytes(self.bytes(8, what)?.try_into().unwrap()))
    }

    fn u128(&mut self, what: &str) -> Result<u128, TrainingError> {
        Ok(u128::from_le_bytes(self.bytes(16, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, TrainingError> {
        Ok(f64::from_le_bytes(self.bytes(8, what)?.try_into().unwrap()))
    }

    fn size(&mut self, what: &str) -> Result<usize, TrainingError> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| {
            TrainingError::CheckpointFormat(format!("{what} {v} does not fit this platform"))
        })
    }

    fn bool(&mut self, what: &str) -> Result<bool, TrainingError> {
        match self.bytes(1, what)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(TrainingError::CheckpointFormat(format!(
                "{what} must be 0 or 1, got {b}"
            ))),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, TrainingError> {
        let len = self.u32(what)?;
        if len > MAX_NAME {
            return Err(TrainingError::CheckpointFormat(format!(
                "{what} length {len} is implausible"
            )));
        }
        String::from_utf8(self.bytes(len as usize, what)?).map_err(|_| {
            TrainingError::CheckpointFormat(format!("{what} is not valid UTF-8"))
        })
    }

    fn tensor(&mut self, what: &str) -> Result<Tensor, TrainingError> {
        let rows = self.u64(what)?;
        let cols = self.u64(what)?;
        if rows > MAX_DIM || cols > MAX_DIM || rows.saturating_mul(cols) > MAX_ENTRIES {
            return Err(TrainingError::CheckpointFormat(format!(
                "{what} claims an implausible {rows}x{cols} tensor"
            )));
        }
        let n = (rows * cols) as usize;
        let raw = self.bytes(n * 8, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::from_vec(rows as usize, cols as usize, data).map_err(|e| {
            TrainingError::CheckpointFormat(format!("{what}: {e}"))
        })
    }
}

fn read_config<R: Read>(s: &mut Section<'_, R>) -> Result<TrainConfig, TrainingError> {
    Ok(TrainConfig {
        batch_size: s.size("config.batch_size")?,
        n_critic: s.size("config.n_critic")?,
        epochs: s.size("config.epochs")?,
        seed: s.u64("config.seed")?,
        generator_lr: s.f64("config.generator_lr")?,
        critic_lr: s.f64("config.critic_lr")?,
        clip_threshold: s.f64("config.clip_threshold")?,
        lambda_fp: s.f64("config.lambda_fp")?,
        lambda_fn: s.f64("config.lambda_fn")?,
        gamma_supervised: s.f64("config.gamma_supervised")?,
        gamma_directional: s.f64("config.gamma_directional")?,
        temperature: s.f64("config.temperature")?,
        window: s.size("config.window")?,
        horizon: s.size("config.horizon")?,
        noise_dim: s.size("config.noise_dim")?,
        encoder_hidden: s.size("config.encoder_hidden")?,
        decoder_hidden: s.size("config.decoder_hidden")?,
        critic_hidden: s.size("config.critic_hidden")?,
        news_context_dim: s.size("config.news_context_dim")?,
        embedding_dim: s.size("config.embedding_dim")?,
        headline_slots: s.size("config.headline_slots")?,
        use_news: s.bool("config.use_news")?,
        use_volatility: s.bool("config.use_volatility")?,
        use_attention: s.bool("config.use_attention")?,
        per_step_noise: s.bool("config.per_step_noise")?,
    })
}

fn fill_set<R: Read>(
    s: &mut Section<'_, R>,
    set: &mut ParamSet,
    section: &str,
) -> Result<(), TrainingError> {
    let count = s.u64(&format!("{section} tensor count"))?;
    if count != set.len() as u64 {
        return Err(TrainingError::CheckpointFormat(format!(
            "{section} section holds {count} tensors but the model has {}",
            set.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let name = s.name(&format!("{section} tensor name"))?;
        let tensor = s.tensor(&format!("{section} tensor `{name}`"))?;
        let id = set.id(&name).map_err(|_| {
            TrainingError::CheckpointFormat(format!(
                "tensor `{name}` is not part of the {section}"
            ))
        })?;
        if !seen.insert(name.clone()) {
            return Err(TrainingError::CheckpointFormat(format!(
                "tensor `{name}` appears twice"
            )));
        }
        let expected = set.value(id).shape();
        if tensor.shape() != expected {
            return Err(TrainingError::CheckpointShape {
                tensor: name,
                expected,
                found: tensor.shape(),
            });
        }
        *set.value_mut(id) = tensor;
    }
    Ok(())
}

fn read_optimizer<R: Read>(
    s: &mut Section<'_, R>,
    set: &ParamSet,
    section: &str,
) -> Result<OptimizerState, TrainingError> {
    let count = s.u64(&format!("{section} accumulator count"))?;
    if count != set.len() as u64 {
        return Err(TrainingError::CheckpointFormat(format!(
            "{section} holds {count} accumulators but the model has {} parameters",
            set.len()
        )));
    }
    let mut accum = Vec::with_capacity(count as usize);
    for id in set.ids() {
        let t = s.tensor(&format!("{section} accumulator"))?;
        if t.shape() != set.value(id).shape() {
            return Err(TrainingError::CheckpointShape {
                tensor: format!("optimizer accumulator for `{}`", set.name(id)),
                expected: set.value(id).shape(),
                found: t.shape(),
            });
        }
        accum.push(t);
    }
    Ok(OptimizerState::from_accumulators(accum))
}

/// Reads and validates a checkpoint; see the module docs for the errors
/// each kind of damage produces.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainingError> {
    let file = File::open(path)?;
    let mut reader = io::BufReader::new(file);
    let mut s = Section { inner: &mut reader };

    let magic = s.bytes(MAGIC.len(), "magic header")?;
    if magic != MAGIC {
        return Err(TrainingError::CheckpointFormat(
            "not a checkpoint file (bad magic header)".into(),
        ));
    }
    let version = s.u32("format version")?;
    if version != CHECKPOINT_VERSION {
        return Err(TrainingError::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let config = read_config(&mut s)?;
    config.validate()?;
    let feature_dim = s.size("feature_dim")?;
    let epoch = s.u64("epoch")?;

    // Rebuild the architecture the config describes, then overwrite its
    // values from the file; mismatches surface as named shape errors.
    let mut init_rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = build_model(&config, feature_dim, &mut init_rng)?;
    fill_set(&mut s, &mut model.generator_set, "generator")?;
    fill_set(&mut s, &mut model.critic_set, "critic")?;

    let expected_norms = model.generator.fresh_state();
    let expected_norms = expected_norms
        .news
        .as_ref()
        .map_or(&[] as &[BatchNormState], NewsBlockState::norms);
    let norm_count = s.u64("norm statistics count")?;
    if norm_count != expected_norms.len() as u64 {
        return Err(TrainingError::CheckpointFormat(format!(
            "checkpoint has {norm_count} norm statistics but the model needs {}",
            expected_norms.len()
        )));
    }
    let mut norms = Vec::with_capacity(expected_norms.len());
    for (i, expected) in expected_norms.iter().enumerate() {
        let mean = s.tensor(&format!("norm {i} running mean"))?;
        let var = s.tensor(&format!("norm {i} running var"))?;
        for (t, which) in [(&mean, "mean"), (&var, "var")] {
            if t.shape() != (1, expected.features()) {
                return Err(TrainingError::CheckpointShape {
                    tensor: format!("news norm {i} running {which}"),
                    expected: (1, expected.features()),
                    found: t.shape(),
                });
            }
        }
        norms.push(BatchNormState::from_stats(mean, var)?);
    }
    let generator_state = GeneratorState {
        news: config.use_news.then_some(NewsBlockState::from_norms(norms)),
    };

    let generator_opt = read_optimizer(&mut s, &model.generator_set, "generator optimizer")?;
    let critic_opt = read_optimizer(&mut s, &model.critic_set, "critic optimizer")?;

    let seed: [u8; 32] = s.bytes(32, "rng seed")?.try_into().unwrap();
    let rng = RngSnapshot {
        seed,
        stream: s.u64("rng stream")?,
        word_pos: s.u128("rng word position")?,
    };
    let stats = s
        .bool("feature stats flag")?
        .then(|| -> Result<PipelineStats, TrainingError> {
            Ok(PipelineStats {
                macd_min: s.f64("macd_min")?,
                macd_max: s.f64("macd_max")?,
            })
        })
        .transpose()?;
    let news_tokens = s
        .bool("news token length flag")?
        .then(|| s.size("news token length"))
        .transpose()?;

    let mut probe = [0u8; 1];
    match s.inner.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(TrainingError::CheckpointFormat(
                "trailing data after the last section".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    }

    Ok(Checkpoint {
        config,
        feature_dim,
        epoch,
        generator_set: model.generator_set,
        generator: model.generator,
        generator_state,
        critic_set: model.critic_set,
        critic: model.critic,
        generator_opt,
        critic_opt,
        rng,
        stats,
        news_tokens,
    })
}
