use crate::autodiff::{Graph, NodeId, ParamId, ParamSet, Tensor};
use crate::networks::{critic_forward, CriticParams, Mount};

use super::TrainingError;

/// The scalar weights entering the generator's composite loss.
///
/// `lambda_*` weight the two directional error kinds (and must be
/// validated by the caller: interior, summing to 1, false positives
/// heavier); `gamma_*` scale the two auxiliary terms against the
/// adversarial one; `temperature` controls how sharply the smoothed
/// directional loss approximates its indicator form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_fp: f64,
    pub lambda_fn: f64,
    pub gamma_supervised: f64,
    pub gamma_directional: f64,
    pub temperature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_fp: 0.8,
            lambda_fn: 0.2,
            gamma_supervised: 10.0,
            gamma_directional: 3.0,
            temperature: 0.02,
        }
    }
}

fn require_same_shape(
    what: &'static str,
    graph: &Graph,
    real: NodeId,
    fake: NodeId,
) -> Result<(), TrainingError> {
    let r = graph.value(real).shape();
    let f = graph.value(fake).shape();
    if r != f {
        return Err(TrainingError::Config(format!(
            "{what}: real batch is {r:?} but fake batch is {f:?}"
        )));
    }
    if r.0 == 0 || r.1 == 0 {
        return Err(TrainingError::Config(format!("{what}: empty batch")));
    }
    Ok(())
}

/// L1 sequence-matching loss: the mean of `|c - ĉ|` over every batch row
/// and every horizon position.
pub fn supervised_loss(
    graph: &mut Graph,
    real: NodeId,
    fake: NodeId,
) -> Result<NodeId, TrainingError> {
    require_same_shape("supervised_loss", graph, real, fake)?;
    let diff = graph.sub(real, fake)?;
    let l1 = graph.abs(diff);
    Ok(graph.mean_all(l1)?)
}

fn is_up(v: f64) -> bool {
    v > 0.0
}

/// Hard-indicator directional error rate, for evaluation and reporting.
///
/// Both tensors hold one movement per entry, interpreted by sign (up iff
/// positive; an exact zero counts as down, matching the movement rule).
/// Per row: `(lambda_fp · #FP + lambda_fn · #FN) / q`, where a false
/// positive predicts up on a down move and a false negative predicts down
/// on an up move; the result is the mean over rows. Always lies in
/// `[0, lambda_fp]` and is zero exactly when every sign matches.
pub fn weighted_loss_eval(
    truth: &Tensor,
    predicted: &Tensor,
    lambda_fp: f64,
    lambda_fn: f64,
) -> Result<f64, TrainingError> {
    if truth.shape() != predicted.shape() {
        return Err(TrainingError::Config(format!(
            "weighted_loss_eval: truth is {:?} but predictions are {:?}",
            truth.shape(),
            predicted.shape()
        )));
    }
    if truth.is_empty() {
        return Err(TrainingError::Config("weighted_loss_eval: empty batch".into()));
    }
    let mut false_positives = 0usize;
    let mut false_negatives = 0usize;
    for (&y, &y_hat) in truth.data().iter().zip(predicted.data()) {
        match (is_up(y), is_up(y_hat)) {
            (false, true) => false_positives += 1,
            (true, false) => false_negatives += 1,
            _ => {}
        }
    }
    let scale = (truth.rows() * truth.cols()) as f64;
    Ok((lambda_fp * false_positives as f64 + lambda_fn * false_negatives as f64) / scale)
}

/// Differentiable surrogate of [`weighted_loss_eval`] used inside the
/// generator loss.
///
/// The indicator on the prediction is replaced by a sigmoid at
/// temperature `tau`: down days contribute `lambda_fp · sigma(ĉ/tau)`
/// and up days `lambda_fn · sigma(-ĉ/tau)`. The indicator on the truth
/// stays hard (`c < 0` / `c > 0`, so an exactly-zero return activates
/// neither term); truths enter as data, not as differentiated inputs.
/// As `tau -> 0` with predictions bounded away from zero this converges
/// to the hard form.
pub fn weighted_loss_smooth(
    graph: &mut Graph,
    real: NodeId,
    fake: NodeId,
    weights: &LossWeights,
) -> Result<NodeId, TrainingError> {
    require_same_shape("weighted_loss_smooth", graph, real, fake)?;
    if !(weights.temperature > 0.0) {
        return Err(TrainingError::Config(format!(
            "weighted_loss_smooth: temperature must be positive, got {}",
            weights.temperature
        )));
    }
    let (rows, cols) = graph.value(real).shape();
    let mut down_mask = Tensor::zeros(rows, cols);
    let mut up_mask = Tensor::zeros(rows, cols);
    for (i, &c) in graph.value(real).data().iter().enumerate() {
        if c < 0.0 {
            down_mask.data_mut()[i] = 1.0;
        } else if c > 0.0 {
            up_mask.data_mut()[i] = 1.0;
        }
    }
    let down_mask = graph.constant(down_mask);
    let up_mask = graph.constant(up_mask);

    let sharp = graph.scale(fake, 1.0 / weights.temperature);
    let up_call = graph.sigmoid(sharp);
    let sharp_neg = graph.scale(fake, -1.0 / weights.temperature);
    let down_call = graph.sigmoid(sharp_neg);

    let fp_terms = graph.mul(down_mask, up_call)?;
    let fn_terms = graph.mul(up_mask, down_call)?;
    let fp_weighted = graph.scale(fp_terms, weights.lambda_fp);
    let fn_weighted = graph.scale(fn_terms, weights.lambda_fn);
    let combined = graph.add(fp_weighted, fn_weighted)?;
    Ok(graph.mean_all(combined)?)
}

/// The critic objective and the two score means it is built from.
#[derive(Clone, Copy, Debug)]
pub struct CriticLoss {
    /// `-mean f_c(real) + mean f_c(fake)`; minimizing widens the score
    /// gap between real and generated sequences.
    pub total: NodeId,
    pub real_score: NodeId,
    pub fake_score: NodeId,
}

/// Builds the critic loss over two batches of length-`q` sequences.
pub fn critic_loss(
    graph: &mut Graph,
    critic_mount: Mount<'_>,
    critic: &CriticParams,
    real: NodeId,
    fake: NodeId,
) -> Result<CriticLoss, TrainingError> {
    let real_scores = critic_forward(graph, critic_mount, critic, real)?;
    let real_score = graph.mean_all(real_scores)?;
    let fake_scores = critic_forward(graph, critic_mount, critic, fake)?;
    let fake_score = graph.mean_all(fake_scores)?;
    let neg_real = graph.neg(real_score);
    let total = graph.add(neg_real, fake_score)?;
    Ok(CriticLoss {
        total,
        real_score,
        fake_score,
    })
}

/// The generator objective and its three components.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorLoss {
    /// `adversarial + gamma_supervised · supervised + gamma_directional ·
    /// weighted`.
    pub total: NodeId,
    /// `-mean f_c(fake)`.
    pub adversarial: NodeId,
    pub supervised: NodeId,
    pub weighted: NodeId,
}

/// Builds the composite generator loss; `critic_mount` should be frozen
/// during generator updates so critic weights stay fixed while gradients
/// flow through them.
pub fn generator_loss(
    graph: &mut Graph,
    critic_mount: Mount<'_>,
    critic: &CriticParams,
    real: NodeId,
    fake: NodeId,
    weights: &LossWeights,
) -> Result<GeneratorLoss, TrainingError> {
    let fake_scores = critic_forward(graph, critic_mount, critic, fake)?;
    let fake_score = graph.mean_all(fake_scores)?;
    let adversarial = graph.neg(fake_score);
    let supervised = supervised_loss(graph, real, fake)?;
    let weighted = weighted_loss_smooth(graph, real, fake, weights)?;
    let supervised_scaled = graph.scale(supervised, weights.gamma_supervised);
    let weighted_scaled = graph.scale(weighted, weights.gamma_directional);
    let aux = graph.add(supervised_scaled, weighted_scaled)?;
    let total = graph.add(adversarial, aux)?;
    Ok(GeneratorLoss {
        total,
        adversarial,
        supervised,
        weighted,
    })
}

/// Clamps every entry of every parameter into
/// `[-threshold, threshold]` — the Lipschitz enforcement applied to the
/// critic set after each of its updates.
pub fn clip_weights(params: &mut ParamSet, threshold: f64) {
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        for v in params.value_mut(id).data_mut() {
            *v = v.clamp(-threshold, threshold);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-0.05..0.05))
            .collect();
        Tensor::from_vec(rows, cols, data).unwrap()
    }

    fn toy_critic(seed: u64, horizon: usize) -> (ParamSet, CriticParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ParamSet::new();
        let critic = CriticParams::register(&mut set, "critic", horizon, 4, &mut rng).unwrap();
        (set, critic)
    }

    fn eval_supervised(real: &Tensor, fake: &Tensor) -> f64 {
        let mut g = Graph::new();
        let r = g.constant(real.clone());
        let f = g.constant(fake.clone());
        let loss = supervised_loss(&mut g, r, f).unwrap();
        g.value(loss).item().unwrap()
    }

    #[test]
    fn supervised_loss_of_identical_sequences_is_zero() {
        let c = Tensor::from_vec(2, 3, vec![0.01, -0.02, 0.0, 0.4, -0.1, 0.07]).unwrap();
        assert_eq!(eval_supervised(&c, &c), 0.0);
    }

    #[test]
    fn supervised_loss_matches_hand_mean() {
        let c = Tensor::row(vec![0.1, -0.1]);
        let zero = Tensor::zeros(1, 2);
        let v = eval_supervised(&c, &zero);
        assert!((v - 0.1).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn supervised_loss_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_batch(3, 4, &mut rng);
            let b = random_batch(3, 4, &mut rng);
            assert_eq!(eval_supervised(&a, &b), eval_supervised(&b, &a));
        }
    }

    #[test]
    fn supervised_loss_rejects_mismatched_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(2, 3));
        let b = g.constant(Tensor::zeros(2, 4));
        let err = supervised_loss(&mut g, a, b).unwrap_err();
        assert!(err.to_string().contains("real batch"), "got {err}");
    }

    #[test]
    fn weighted_eval_is_zero_on_perfect_signs() {
        let y = Tensor::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let v = weighted_loss_eval(&y, &y, 0.8, 0.2).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn weighted_eval_matches_hand_enumeration() {
        // One false positive out of q = 2: (0.8 * 1 + 0.2 * 0) / 2.
        let y = Tensor::row(vec![-1.0, 1.0]);
        let y_hat = Tensor::row(vec![1.0, 1.0]);
        let v = weighted_loss_eval(&y, &y_hat, 0.8, 0.2).unwrap();
        assert!((v - 0.4).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn weighted_eval_with_equal_weights_on_all_wrong_is_half() {
        let y = Tensor::row(vec![-1.0, 1.0, -1.0, 1.0]);
        let y_hat = Tensor::row(vec![1.0, -1.0, 1.0, -1.0]);
        let v = weighted_loss_eval(&y, &y_hat, 0.5, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn weighted_eval_stays_within_its_range_and_zero_means_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pick = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
            let y_data: Vec<f64> = (0..12).map(|_| pick(&mut rng)).collect();
            let p_data: Vec<f64> = (0..12).map(|_| pick(&mut rng)).collect();
            let y = Tensor::from_vec(3, 4, y_data.clone()).unwrap();
            let p = Tensor::from_vec(3, 4, p_data.clone()).unwrap();
            let v = weighted_loss_eval(&y, &p, 0.8, 0.2).unwrap();
            assert!((0.0..=0.8).contains(&v), "out of range: {v}");
            assert_eq!(v == 0.0, y_data == p_data);
        }
    }

    #[test]
    fn smooth_loss_at_zero_prediction_is_half_of_the_active_weight() {
        // All truths negative: every entry is an active false-positive
        // term, each contributing lambda_fp * sigma(0) = 0.8 * 0.5.
        let mut g = Graph::new();
        let real = g.constant(Tensor::row(vec![-0.01, -0.3, -0.002]));
        let fake = g.constant(Tensor::zeros(1, 3));
        let loss = weighted_loss_smooth(&mut g, real, fake, &LossWeights::default()).unwrap();
        let v = g.value(loss).item().unwrap();
        assert!((v - 0.4).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn smooth_loss_converges_to_the_hard_form_at_low_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights = LossWeights {
            temperature: 1e-4,
            ..LossWeights::default()
        };
        for _ in 0..20 {
            // Predictions bounded away from zero so the sigmoid saturates.
            let bump = |v: f64| if v >= 0.0 { v + 0.01 } else { v - 0.01 };
            let real = random_batch(2, 5, &mut rng);
            let fake_data: Vec<f64> = (0..10)
                .map(|_| bump(rng.random_range(-0.05..0.05)))
                .collect();
            let fake = Tensor::from_vec(2, 5, fake_data).unwrap();

            let mut g = Graph::new();
            let r = g.constant(real.clone());
            let f = g.constant(fake.clone());
            let smooth = weighted_loss_smooth(&mut g, r, f, &weights).unwrap();
            let smooth_v = g.value(smooth).item().unwrap();

            let sign = |t: &Tensor| {
                Tensor::from_vec(
                    t.rows(),
                    t.cols(),
                    t.data().iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect(),
                )
                .unwrap()
            };
            let hard =
                weighted_loss_eval(&sign(&real), &sign(&fake), weights.lambda_fp, weights.lambda_fn)
                    .unwrap();
            assert!(
                (smooth_v - hard).abs() < 1e-3,
                "smooth {smooth_v} vs hard {hard}"
            );
        }
    }

    #[test]
    fn smooth_loss_gradient_passes_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let real = random_batch(2, 4, &mut rng);
        let start = random_batch(2, 4, &mut rng);
        let mut params = ParamSet::new();
        params.register("fake", start).unwrap();
        let weights = LossWeights::default();
        let report = grad_check(
            &mut params,
            &GradCheckConfig {
                step: 1e-4,
                ..GradCheckConfig::default()
            },
            |p| {
                let mut g = Graph::new();
                let r = g.constant(real.clone());
                let f = g.param(p, p.id("fake")?);
                let loss = weighted_loss_smooth(&mut g, r, f, &weights)
                    .map_err(|e| crate::autodiff::AutodiffError::BadShape {
                        op: "weighted_loss_smooth",
                        detail: e.to_string(),
                    })?;
                Ok((g, loss))
            },
        )
        .unwrap();
        assert_eq!(report.checked, 8);
        assert!(report.max_rel_err < 1e-5, "worst: {:?}", report.worst);
    }

    #[test]
    fn critic_loss_cancels_on_identical_batches() {
        let (set, critic) = toy_critic(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_batch(4, 3, &mut rng);
        let mut g = Graph::new();
        let real = g.constant(batch.clone());
        let fake = g.constant(batch);
        let loss = critic_loss(&mut g, Mount::trainable(&set), &critic, real, fake).unwrap();
        assert_eq!(g.value(loss.total).item().unwrap(), 0.0);
    }

    #[test]
    fn critic_loss_is_the_score_gap() {
        let (set, critic) = toy_critic(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let real = random_batch(5, 3, &mut rng);
        let fake = random_batch(5, 3, &mut rng);
        let mut g = Graph::new();
        let r = g.constant(real);
        let f = g.constant(fake);
        let loss = critic_loss(&mut g, Mount::trainable(&set), &critic, r, f).unwrap();
        let total = g.value(loss.total).item().unwrap();
        let mean_real = g.value(loss.real_score).item().unwrap();
        let mean_fake = g.value(loss.fake_score).item().unwrap();
        assert!((total - (mean_fake - mean_real)).abs() < 1e-15);
    }

    #[test]
    fn one_critic_step_does_not_shrink_the_score_gap() {
        use crate::autodiff::{rmsprop_step, OptimizerState, RmspropConfig};
        let (mut set, critic) = toy_critic(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let real = random_batch(6, 3, &mut rng);
        let fake = random_batch(6, 3, &mut rng);

        let gap = |set: &ParamSet| {
            let mut g = Graph::new();
            let r = g.constant(real.clone());
            let f = g.constant(fake.clone());
            let loss = critic_loss(&mut g, Mount::trainable(set), &critic, r, f).unwrap();
            g.value(loss.real_score).item().unwrap() - g.value(loss.fake_score).item().unwrap()
        };

        let before = gap(&set);
        let mut g = Graph::new();
        let r = g.constant(real.clone());
        let f = g.constant(fake.clone());
        let loss = critic_loss(&mut g, Mount::trainable(&set), &critic, r, f).unwrap();
        set.zero_grads();
        g.backward(loss.total, &mut set).unwrap();
        let mut opt = OptimizerState::new(&set);
        rmsprop_step(&mut set, &mut opt, &RmspropConfig::with_learning_rate(5e-5)).unwrap();
        let after = gap(&set);
        assert!(
            after >= before,
            "gap shrank after a descent step: {before} -> {after}"
        );
    }

    #[test]
    fn generator_loss_without_auxiliary_terms_is_the_adversarial_score() {
        let (set, critic) = toy_critic(21, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let real = random_batch(3, 4, &mut rng);
        let fake = random_batch(3, 4, &mut rng);
        let weights = LossWeights {
            gamma_supervised: 0.0,
            gamma_directional: 0.0,
            ..LossWeights::default()
        };
        let mut g = Graph::new();
        let r = g.constant(real);
        let f = g.constant(fake);
        let loss =
            generator_loss(&mut g, Mount::frozen(&set), &critic, r, f, &weights).unwrap();
        let total = g.value(loss.total).item().unwrap();
        let adv = g.value(loss.adversarial).item().unwrap();
        assert_eq!(total, adv);
    }

    #[test]
    fn generator_loss_against_a_zero_critic_is_the_auxiliary_sum() {
        let mut set = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let critic = CriticParams::register(&mut set, "critic", 4, 4, &mut rng).unwrap();
        let ids: Vec<ParamId> = set.ids().collect();
        for id in ids {
            set.value_mut(id).fill(0.0);
        }
        let real = random_batch(3, 4, &mut rng);
        let fake = random_batch(3, 4, &mut rng);
        let weights = LossWeights::default();
        let mut g = Graph::new();
        let r = g.constant(real);
        let f = g.constant(fake);
        let loss = generator_loss(&mut g, Mount::frozen(&set), &critic, r, f, &weights).unwrap();
        let total = g.value(loss.total).item().unwrap();
        let sup = g.value(loss.supervised).item().unwrap();
        let wls = g.value(loss.weighted).item().unwrap();
        assert!(
            (total - (weights.gamma_supervised * sup + weights.gamma_directional * wls)).abs()
                < 1e-15,
            "adversarial term should vanish"
        );
    }

    #[test]
    fn generator_loss_decomposes_into_its_parts() {
        let (set, critic) = toy_critic(41, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let real = random_batch(4, 5, &mut rng);
            let fake = random_batch(4, 5, &mut rng);
            let weights = LossWeights::default();
            let bare = LossWeights {
                gamma_supervised: 0.0,
                gamma_directional: 0.0,
                ..weights
            };

            let mut g = Graph::new();
            let r = g.constant(real.clone());
            let f = g.constant(fake.clone());
            let full =
                generator_loss(&mut g, Mount::frozen(&set), &critic, r, f, &weights).unwrap();
            let full_v = g.value(full.total).item().unwrap();

            let mut g2 = Graph::new();
            let r2 = g2.constant(real);
            let f2 = g2.constant(fake);
            let parts =
                generator_loss(&mut g2, Mount::frozen(&set), &critic, r2, f2, &bare).unwrap();
            let recomposed = g2.value(parts.total).item().unwrap()
                + weights.gamma_supervised * g2.value(parts.supervised).item().unwrap()
                + weights.gamma_directional * g2.value(parts.weighted).item().unwrap();
            assert!(
                (full_v - recomposed).abs() < 1e-12,
                "decomposition broke: {full_v} vs {recomposed}"
            );
        }
    }

    #[test]
    fn clip_weights_clamps_exactly_at_the_threshold() {
        let mut set = ParamSet::new();
        let id = set
            .register("w", Tensor::row(vec![0.05, -0.5, 0.005, 0.01]))
            .unwrap();
        clip_weights(&mut set, 0.01);
        assert_eq!(set.value(id).data(), &[0.01, -0.01, 0.005, 0.01]);
    }

    #[test]
    fn clip_weights_bounds_every_parameter_of_a_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let (mut set, _critic) = toy_critic(50, 3);
        let ids: Vec<ParamId> = set.ids().collect();
        for id in ids {
            for v in set.value_mut(id).data_mut() {
                *v += rng.random_range(-1.0..1.0);
            }
        }
        clip_weights(&mut set, 0.01);
        assert!(set.max_abs_value() <= 0.01);
    }
}
