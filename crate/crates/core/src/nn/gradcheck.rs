use super::Parameterized;
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Which entries of each parameter tensor get perturbed.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Tensors with more entries than this are sub-sampled.
    pub max_entries_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_entries_per_param: 64,
            seed: 0,
        }
    }
}

/// Relative error used by the checker: `|a - n| / max(|a| + |n|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-7)
}

/// Compares analytic gradients against central finite differences.
///
/// `loss(model, backprop)` must return the scalar loss and, when `backprop`
/// is true, accumulate gradients into the model's parameters. Returns the
/// largest relative error over the sampled entries (0 for a model with no
/// parameters).
pub fn grad_check<M, F>(model: &mut M, opts: GradCheckOptions, mut loss: F) -> Result<f64>
where
    M: Parameterized,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    let base = loss(model, false)?;
    let again = loss(model, false)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::Determinism(format!(
            "identical calls returned {base} and {again}"
        )));
    }

    model.zero_grad();
    loss(model, true)?;
    let analytic: Vec<Vec<f64>> = model
        .parameters()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    model.zero_grad();

    let mut rng = RngState::new(opts.seed);
    let mut worst = 0.0f64;
    let eps = opts.epsilon;
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let entries: Vec<usize> = if n <= opts.max_entries_per_param {
            (0..n).collect()
        } else {
            (0..opts.max_entries_per_param).map(|_| rng.below(n)).collect()
        };
        for i in entries {
            let orig = model.parameters()[pi].value.data()[i];
            model.parameters_mut()[pi].value.data_mut()[i] = orig + eps;
            let plus = loss(model, false)?;
            model.parameters_mut()[pi].value.data_mut()[i] = orig - eps;
            let minus = loss(model, false)?;
            model.parameters_mut()[pi].value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grads[i], numeric));
        }
    }
    Ok(worst)
}
