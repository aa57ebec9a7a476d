//! Verifying analytic gradients against central finite differences.
//!
//! Two layers of the same idea. First the low-level harness: register a
//! parameter, describe how to build a scalar loss over it, and every
//! entry is nudged by ±h to compare `(f(x+h) - f(x-h)) / 2h` with the
//! reverse-mode gradient. Then the assembled check the `gradcheck` CLI
//! subcommand runs: the complete generator and critic, each swept
//! through the loss its own training step uses, at widths small enough
//! to finish in well under a minute.
//!
//! Run with: `cargo run --example gradient_check`

use std::error::Error;
use std::time::Instant;

use marketgan::autodiff::{grad_check, GradCheckConfig, Graph, ParamSet, Tensor};
use marketgan::training::{gradient_suite, toy_suite_config};

fn main() -> Result<(), Box<dyn Error>> {
    // --- the harness on a hand-built loss -----------------------------
    // loss = mean(tanh(x W) * y): one matmul, one nonlinearity, one
    // elementwise product. Every entry of W gets checked.
    let mut params = ParamSet::new();
    let w = params.register(
        "w",
        Tensor::from_vec(3, 2, vec![0.4, -0.3, 0.2, 0.7, -0.5, 0.1])?,
    )?;
    let config = GradCheckConfig::default();
    let report = grad_check(&mut params, &config, |ps| {
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_vec(2, 3, vec![1.0, 0.5, -0.2, -0.8, 0.3, 0.9])?);
        let y = g.constant(Tensor::from_vec(2, 2, vec![0.6, -0.4, 0.2, 0.8])?);
        let w_node = g.param(ps, w);
        let h = g.matmul(x, w_node)?;
        let t = g.tanh(h);
        let prod = g.mul(t, y)?;
        g.mean_all(prod).map(|loss| (g, loss))
    })?;
    println!(
        "hand-built loss: max relative error {:.3e} over {} entries",
        report.max_rel_err, report.checked
    );

    // --- the full model ------------------------------------------------
    // Generator parameters flow through the composite generator loss
    // with the critic frozen; critic parameters through the critic loss
    // with the generator frozen — exactly how training splits them.
    let started = Instant::now();
    let suite = gradient_suite(&toy_suite_config(), 1e-5, 11)?;
    let elapsed = started.elapsed().as_secs_f64();

    for (name, half) in [("generator", &suite.generator), ("critic", &suite.critic)] {
        println!(
            "{name:<9}: max relative error {:.3e} over {} entries ({} skipped near kinks)",
            half.max_rel_err, half.checked, half.skipped
        );
        if let Some(worst) = &half.worst {
            println!("           worst entry: {worst:?}");
        }
    }
    println!(
        "{} entries checked in {elapsed:.1}s; tolerance for a healthy backward pass: 1e-4",
        suite.checked()
    );
    Ok(())
}
