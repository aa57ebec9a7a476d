use super::graph::{Graph, NodeId};
use super::params::ParamSet;
use super::AutodiffError;

/// Settings for [`grad_check`].
#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Floor for the relative-error denominator `max(|a|, |n|, floor)`.
    pub denom_floor: f64,
    /// An entry is skipped when either perturbed forward pass brings a
    /// kinked activation input within `kink_guard * step` of zero.
    pub kink_guard: f64,
    /// Multiple of the central difference's own rounding noise,
    /// `eps·|f| / (2·step)`, below which analytic and numeric gradients
    /// both count as zero and the entry matches exactly. A loss that is
    /// mathematically independent of an entry (a bias feeding a
    /// normalization that subtracts it back out, say) still leaves
    /// rounding residue in `f(θ+e) − f(θ−e)`; without this band that
    /// residue would be compared against a true zero and reported as
    /// a large relative error.
    pub noise_guard: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            denom_floor: 1e-8,
            kink_guard: 10.0,
            noise_guard: 100.0,
        }
    }
}

/// The entry with the largest relative error seen by [`grad_check`].
#[derive(Clone, Debug)]
pub struct WorstEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a full finite-difference sweep.
#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst: Option<WorstEntry>,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares analytic gradients against central differences for every
/// entry of every parameter.
///
/// `build` must deterministically construct a fresh graph from the current
/// parameter values (same inputs, same noise) and return it together with
/// its scalar loss node. Entries whose perturbed evaluations land within
/// `kink_guard * step` of an `abs`/`leaky_relu` kink are skipped rather
/// than compared against a subgradient that finite differences cannot see.
/// Entries where both gradients sit below the difference quotient's own
/// rounding-noise level count as an exact zero-zero match (see
/// [`GradCheckConfig::noise_guard`]).
pub fn grad_check<F>(
    params: &mut ParamSet,
    config: &GradCheckConfig,
    mut build: F,
) -> Result<GradCheckReport, AutodiffError>
where
    F: FnMut(&ParamSet) -> Result<(Graph, NodeId), AutodiffError>,
{
    let (graph, loss) = build(params)?;
    graph.value(loss).item()?;
    params.zero_grads();
    graph.backward(loss, params)?;
    let analytic: Vec<Vec<f64>> = params
        .ids()
        .map(|id| params.grad(id).data().to_vec())
        .collect();

    let guard = config.kink_guard * config.step;
    let mut report = GradCheckReport::default();

    let ids: Vec<_> = params.ids().collect();
    for (pi, &id) in ids.iter().enumerate() {
        for idx in 0..params.value(id).len() {
            let original = params.value(id).data()[idx];

            params.value_mut(id).data_mut()[idx] = original + config.step;
            let (gp, lp) = build(params)?;
            let f_plus = gp.value(lp).item()?;
            let kink_plus = gp.min_kink_distance();

            params.value_mut(id).data_mut()[idx] = original - config.step;
            let (gm, lm) = build(params)?;
            let f_minus = gm.value(lm).item()?;
            let kink_minus = gm.min_kink_distance();

            params.value_mut(id).data_mut()[idx] = original;

            if kink_plus.min(kink_minus) < guard {
                report.skipped += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * config.step);
            let a = analytic[pi][idx];
            let noise = config.noise_guard * f64::EPSILON * f_plus.abs().max(f_minus.abs())
                / (2.0 * config.step);
            let rel = if a.abs() <= noise && numeric.abs() <= noise {
                0.0 // both gradients are zero at this precision
            } else {
                let denom = a.abs().max(numeric.abs()).max(config.denom_floor);
                (a - numeric).abs() / denom
            };
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some(WorstEntry {
                    param: params.name(id).to_string(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}
