use std::collections::BTreeMap;

use crate::autodiff::{GradMap, ParamSet, Tensor};
use crate::error::{Result, SuhmoError};

/// Per-leaf Adam moments plus the shared step counter.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
    pub step: u64,
}

/// Scale the filtered gradients so their global L2 norm is at most
/// `max_norm` (no-op when `max_norm <= 0`). Returns the pre-clip norm.
/// Autoregressive rollouts make raw gradient norms occasionally explode;
/// without this the stable learning-rate range is far too small for
/// desk-scale budgets.
pub fn clip_grad_norm(
    grads: &mut GradMap,
    max_norm: f64,
    filter: impl Fn(&str) -> bool,
) -> f64 {
    let norm = grads
        .iter()
        .filter(|(n, _)| filter(n))
        .flat_map(|(_, g)| g.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for (_, g) in grads.iter_mut().filter(|(n, _)| filter(n)) {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// One bias-corrected Adam update over every leaf present in `grads` whose
/// name passes `filter`. Leaves never touched by the filter keep their
/// parameters and moments untouched.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &GradMap,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    filter: impl Fn(&str) -> bool,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, g) in grads {
        if !filter(name) {
            continue;
        }
        let p = params
            .get_mut(name)
            .ok_or_else(|| SuhmoError::Invalid(format!("gradient for unknown leaf {name}")))?;
        if p.shape() != g.shape() {
            return Err(SuhmoError::ShapeMismatch {
                primitive: "adam_step".into(),
                shapes: format!("{:?} vs {:?}", p.shape(), g.shape()),
            });
        }
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape()));
        for i in 0..g.numel() {
            let gi = g.data()[i];
            let mi = beta1 * m.data()[i] + (1.0 - beta1) * gi;
            let vi = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let mhat = mi / bc1;
            let vhat = vi / bc2;
            p.data_mut()[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
