//! Central finite-difference gradient verification.

use super::params::ParamSet;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Max over all leaf elements of the relative error between the analytic
/// gradient and a central finite difference with step `eps`.
pub fn grad_check<F>(f: F, params: &ParamSet, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &ParamSet) -> Var<'t>,
{
    assert!(eps > 0.0, "eps must be positive");
    let tape = Tape::new();
    let loss = f(&tape, params);
    let grads = tape.backward(loss, params)?;

    let mut max_err = 0.0f64;
    for (name, value) in params.iter() {
        let analytic = &grads[name];
        for j in 0..value.numel() {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data_mut()[j] += eps;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data_mut()[j] -= eps;
            let fp = f(&Tape::new(), &plus).item();
            let fm = f(&Tape::new(), &minus).item();
            let cd = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[j];
            // the scale floor keeps central-difference cancellation noise
            // (~1e-10 absolute) from dominating exactly-zero gradients, e.g.
            // behind an inactive hinge
            let err = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-4);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}
