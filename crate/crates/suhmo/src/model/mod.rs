//! Generator and discriminator networks.

pub mod discriminator;
pub mod generator;
pub mod layers;

pub use discriminator::{all_windows, multiscale_estimate, sample_windows, score_multiscale,
                        window_rows, BaseScorer, DiscConfig, Discriminators, WindowSpec};
pub use generator::{real_kinematic_rows, GenConfig, Generator, PairBatch, RolloutGraph};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Primitive, Tape, Var};

/// Network family shared by generator and discriminators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Recurrent,
    Attention,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rnn" | "recurrent" => Ok(Variant::Recurrent),
            "transformer" | "attention" => Ok(Variant::Attention),
            other => Err(format!("unknown variant {other:?} (expected rnn or transformer)")),
        }
    }
}

/// Concat along the feature (last) axis of rank-2 vars.
pub fn concat_cols<'t>(tape: &'t Tape, vars: &[Var<'t>]) -> Var<'t> {
    tape.apply(Primitive::Concat { axis: 1 }, vars).unwrap()
}

/// Concat along the time axis of rank-3 (B, T, e) vars.
pub fn concat_time<'t>(tape: &'t Tape, vars: &[Var<'t>]) -> Var<'t> {
    tape.apply(Primitive::Concat { axis: 1 }, vars).unwrap()
}

/// Batch-pool: elementwise max over the two pair members, duplicated back to
/// both, so the output batch size matches the input.
pub fn batch_pool<'t>(a: Var<'t>, b: Var<'t>) -> (Var<'t>, Var<'t>) {
    let pooled = a.emax(b);
    (pooled, pooled)
}
