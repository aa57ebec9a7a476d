use crate::networks::{GeneratorConfig, NewsBlockConfig, NoiseSpec};

use super::losses::LossWeights;
use super::TrainingError;

/// Every knob of a training run: optimizer settings, loss weights,
/// architecture widths, ablation switches, and the RNG seed.
///
/// The defaults are the full-scale settings; reduced-scale runs (smoke
/// tests, synthetic benchmarks) override the width and schedule fields.
/// `feature_dim` is deliberately absent — it is a property of the dataset
/// and is recorded alongside the config in checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Windows per optimization step.
    pub batch_size: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    /// Critic weights are clamped to `[-clip_threshold, clip_threshold]`
    /// after every critic update.
    pub clip_threshold: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub epochs: usize,
    /// Seed for parameter initialization, batch shuffling, and noise.
    pub seed: u64,

    /// Directional-loss weight on false positives (predicted up, went
    /// down). Must exceed `lambda_fn` and sum with it to 1.
    pub lambda_fp: f64,
    /// Directional-loss weight on false negatives.
    pub lambda_fn: f64,
    /// Weight of the L1 sequence-matching term in the generator loss.
    pub gamma_supervised: f64,
    /// Weight of the smoothed directional term in the generator loss.
    pub gamma_directional: f64,
    /// Sigmoid temperature of the smoothed directional loss; roughly the
    /// scale of a daily return.
    pub temperature: f64,

    /// History steps `w` fed to the encoder.
    pub window: usize,
    /// Future steps `q` generated per window.
    pub horizon: usize,
    /// Noise vector width `d_z`.
    pub noise_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub critic_hidden: usize,
    /// Output width `g` of the news context blocks.
    pub news_context_dim: usize,
    /// Word-embedding width `m`.
    pub embedding_dim: usize,
    /// Headlines per day `k` kept by the news pipeline.
    pub headline_slots: usize,

    /// Feed pooled news embeddings through the context blocks into the
    /// encoder. When false the dataset must carry no news tensor.
    pub use_news: bool,
    /// Keep the volatility column in the market features.
    pub use_volatility: bool,
    /// Attend over encoder states; when false the decoder is bridged
    /// from the last encoder state alone.
    pub use_attention: bool,
    /// Draw fresh noise at every window step instead of one shared draw.
    pub per_step_noise: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            generator_lr: 1e-4,
            critic_lr: 5e-5,
            clip_threshold: 0.01,
            n_critic: 5,
            epochs: 80,
            seed: 42,
            lambda_fp: 0.8,
            lambda_fn: 0.2,
            gamma_supervised: 10.0,
            gamma_directional: 3.0,
            temperature: 0.02,
            window: 35,
            horizon: 5,
            noise_dim: 8,
            encoder_hidden: 100,
            decoder_hidden: 200,
            critic_hidden: 64,
            news_context_dim: 6,
            embedding_dim: 50,
            headline_slots: 25,
            use_news: true,
            use_volatility: true,
            use_attention: true,
            per_step_noise: false,
        }
    }
}

impl TrainConfig {
    /// Checks every constraint the training loop relies on; call before
    /// building models or touching data.
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |msg: String| Err(TrainingError::Config(msg));
        if !(self.lambda_fp > 0.0 && self.lambda_fp < 1.0) {
            return bad(format!("lambda_fp must lie in (0, 1), got {}", self.lambda_fp));
        }
        if !(self.lambda_fn > 0.0 && self.lambda_fn < 1.0) {
            return bad(format!("lambda_fn must lie in (0, 1), got {}", self.lambda_fn));
        }
        if self.lambda_fp <= self.lambda_fn {
            return bad(format!(
                "lambda_fp ({}) must exceed lambda_fn ({}): missing an up-move must \
                 cost less than calling a down-move up",
                self.lambda_fp, self.lambda_fn
            ));
        }
        if (self.lambda_fp + self.lambda_fn - 1.0).abs() > 1e-12 {
            return bad(format!(
                "lambda_fp + lambda_fn must equal 1, got {}",
                self.lambda_fp + self.lambda_fn
            ));
        }
        if self.gamma_supervised < 0.0 || !self.gamma_supervised.is_finite() {
            return bad(format!(
                "gamma_supervised must be finite and nonnegative, got {}",
                self.gamma_supervised
            ));
        }
        if self.gamma_directional < 0.0 || !self.gamma_directional.is_finite() {
            return bad(format!(
                "gamma_directional must be finite and nonnegative, got {}",
                self.gamma_directional
            ));
        }
        if !(self.clip_threshold > 0.0) {
            return bad(format!(
                "clip_threshold must be positive, got {}",
                self.clip_threshold
            ));
        }
        if self.n_critic < 1 {
            return bad("n_critic must be at least 1".into());
        }
        if !(self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.generator_lr > 0.0) || !(self.critic_lr > 0.0) {
            return bad(format!(
                "learning rates must be positive, got generator {} / critic {}",
                self.generator_lr, self.critic_lr
            ));
        }
        if self.batch_size < 2 {
            return bad(format!(
                "batch_size must be at least 2 (batch statistics need two rows), got {}",
                self.batch_size
            ));
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        for (name, v) in [
            ("window", self.window),
            ("horizon", self.horizon),
            ("noise_dim", self.noise_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("critic_hidden", self.critic_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.use_news {
            for (name, v) in [
                ("news_context_dim", self.news_context_dim),
                ("embedding_dim", self.embedding_dim),
                ("headline_slots", self.headline_slots),
            ] {
                if v == 0 {
                    return bad(format!("{name} must be at least 1 when use_news is set"));
                }
            }
        }
        Ok(())
    }

    /// Pooled news width `k·m` consumed by the context blocks, when news
    /// is enabled.
    pub fn news_input_dim(&self) -> Option<usize> {
        self.use_news
            .then(|| self.headline_slots * self.embedding_dim)
    }

    /// Generator architecture for a dataset with `feature_dim` market
    /// features per day.
    pub fn generator_config(&self, feature_dim: usize) -> GeneratorConfig {
        GeneratorConfig {
            window: self.window,
            horizon: self.horizon,
            feature_dim,
            noise_dim: self.noise_dim,
            encoder_hidden: self.encoder_hidden,
            decoder_hidden: self.decoder_hidden,
            use_attention: self.use_attention,
            news: self
                .news_input_dim()
                .map(|input| NewsBlockConfig::standard(input, self.news_context_dim)),
        }
    }

    /// Noise sampling strategy implied by the config.
    pub fn noise_spec(&self) -> Result<NoiseSpec, TrainingError> {
        let spec = if self.per_step_noise {
            NoiseSpec::per_step(self.noise_dim)
        } else {
            NoiseSpec::shared(self.noise_dim)
        }?;
        Ok(spec)
    }

    /// The loss-weight subset used by the loss functions.
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_fp: self.lambda_fp,
            lambda_fn: self.lambda_fn,
            gamma_supervised: self.gamma_supervised,
            gamma_directional: self.gamma_directional,
            temperature: self.temperature,
        }
    }

    /// Parses flat `key = value` config text. One assignment per line;
    /// `#` starts a comment; blank lines are skipped. Keys not mentioned
    /// keep their defaults; unknown or repeated keys are errors, and the
    /// assembled config is validated before it is returned. Environment
    /// variables are never consulted.
    pub fn from_key_value_text(text: &str) -> Result<Self, TrainingError> {
        let mut config = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| TrainingError::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(at(format!("`{key}` is set twice")));
            }
            config.set_field(key, value).map_err(|msg| at(msg))?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set_field(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse `{value}` as a value for `{key}`"))
        }
        match key {
            "batch_size" => self.batch_size = parse(key, value)?,
            "generator_lr" => self.generator_lr = parse(key, value)?,
            "critic_lr" => self.critic_lr = parse(key, value)?,
            "clip_threshold" => self.clip_threshold = parse(key, value)?,
            "n_critic" => self.n_critic = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lambda_fp" => self.lambda_fp = parse(key, value)?,
            "lambda_fn" => self.lambda_fn = parse(key, value)?,
            "gamma_supervised" => self.gamma_supervised = parse(key, value)?,
            "gamma_directional" => self.gamma_directional = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "noise_dim" => self.noise_dim = parse(key, value)?,
            "encoder_hidden" => self.encoder_hidden = parse(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse(key, value)?,
            "critic_hidden" => self.critic_hidden = parse(key, value)?,
            "news_context_dim" => self.news_context_dim = parse(key, value)?,
            "embedding_dim" => self.embedding_dim = parse(key, value)?,
            "headline_slots" => self.headline_slots = parse(key, value)?,
            "use_news" => self.use_news = parse(key, value)?,
            "use_volatility" => self.use_volatility = parse(key, value)?,
            "use_attention" => self.use_attention = parse(key, value)?,
            "per_step_noise" => self.per_step_noise = parse(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Renders the config in the format [`TrainConfig::from_key_value_text`]
    /// reads, one line per field, in declaration order. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_key_value_text(&self) -> String {
        format!(
            "batch_size = {}\n\
             generator_lr = {}\n\
             critic_lr = {}\n\
             clip_threshold = {}\n\
             n_critic = {}\n\
             epochs = {}\n\
             seed = {}\n\
             lambda_fp = {}\n\
             lambda_fn = {}\n\
             gamma_supervised = {}\n\
             gamma_directional = {}\n\
             temperature = {}\n\
             window = {}\n\
             horizon = {}\n\
             noise_dim = {}\n\
             encoder_hidden = {}\n\
             decoder_hidden = {}\n\
             critic_hidden = {}\n\
             news_context_dim = {}\n\
             embedding_dim = {}\n\
             headline_slots = {}\n\
             use_news = {}\n\
             use_volatility = {}\n\
             use_attention = {}\n\
             per_step_noise = {}\n",
            self.batch_size,
            self.generator_lr,
            self.critic_lr,
            self.clip_threshold,
            self.n_critic,
            self.epochs,
            self.seed,
            self.lambda_fp,
            self.lambda_fn,
            self.gamma_supervised,
            self.gamma_directional,
            self.temperature,
            self.window,
            self.horizon,
            self.noise_dim,
            self.encoder_hidden,
            self.decoder_hidden,
            self.critic_hidden,
            self.news_context_dim,
            self.embedding_dim,
            self.headline_slots,
            self.use_news,
            self.use_volatility,
            self.use_attention,
            self.per_step_noise,
        )
    }
}
