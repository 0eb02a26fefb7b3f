//! Adversarial training loop: alternating generator / discriminator updates
//! with hinge losses, window-based multi-scale scoring, an L2 term against
//! the ground-truth continuation, Adam, and decay-on-stall.

mod adam;
mod loop_;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use loop_::{generate_from_refs, is_val_index, split_dataset, train, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Result, SuhmoError};
use crate::model::Variant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    /// L2 reconstruction weight.
    pub lambda: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    /// Global L2 gradient-norm cap applied per optimizer step (0 disables).
    /// BPTT through the rollout occasionally produces exploding gradients,
    /// and without a cap the usable learning-rate range is tiny.
    pub grad_clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Sequences per batch (paired, so must be even).
    pub batch: usize,
    /// Training sequence length.
    pub seq_len: usize,
    /// LR divisor applied once on stall.
    pub decay_factor: f64,
    /// Evaluation intervals without >1% improvement before decay.
    pub stall_window: usize,
    pub max_iters: usize,
    /// Iterations between validation evaluations.
    pub eval_interval: usize,
    /// Observed prefix length is drawn uniformly from 1..=prefix_max.
    pub prefix_max: usize,
    pub hidden: usize,
    pub embed: usize,
    pub disc_embed: usize,
    pub scales: Vec<usize>,
    pub windows_per_seq: usize,
    pub one_sample_g: bool,
    pub one_sample_d: bool,
    pub no_multiscale: bool,
    pub delta_based: bool,
    pub l2_only: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// Small CPU-friendly configuration for the synthetic dataset. Learning
    /// rates are far larger than the paper-scale preset: at a few hundred
    /// iterations, batch 32, and hidden size 64 the model needs them to move
    /// at all.
    pub fn desk(variant: Variant, seed: u64) -> Self {
        TrainConfig {
            variant,
            lambda: 1e-2,
            lr_g: 5e-4,
            lr_d: 2e-4,
            grad_clip: 1.0,
            beta1: 0.5,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 32,
            seq_len: 40,
            decay_factor: 10.0,
            stall_window: 10,
            max_iters: 400,
            eval_interval: 50,
            prefix_max: 5,
            hidden: 64,
            embed: 64,
            disc_embed: 32,
            scales: vec![10, 20, 40],
            windows_per_seq: 4,
            one_sample_g: false,
            one_sample_d: false,
            no_multiscale: false,
            delta_based: false,
            l2_only: false,
            seed,
        }
    }

    /// Full-scale regime (sizes and rates as published); not intended to be
    /// run to convergence on a CPU.
    pub fn paper(variant: Variant, seed: u64) -> Self {
        TrainConfig {
            lr_g: 2e-5,
            lr_d: 1e-5,
            grad_clip: 0.0,
            batch: 120,
            max_iters: 60_000,
            eval_interval: 500,
            hidden: 1024,
            embed: 1024,
            disc_embed: 128,
            ..TrainConfig::desk(variant, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(SuhmoError::Invalid("lambda must be >= 0".into()));
        }
        if self.lr_g <= 0.0 || self.lr_d <= 0.0 {
            return Err(SuhmoError::Invalid("learning rates must be > 0".into()));
        }
        if self.grad_clip < 0.0 {
            return Err(SuhmoError::Invalid("grad_clip must be >= 0".into()));
        }
        if self.batch < 2 || self.batch % 2 != 0 {
            return Err(SuhmoError::Invalid(format!(
                "batch size must be even and >= 2 for pairing, got {}",
                self.batch
            )));
        }
        if self.prefix_max < 1 || self.prefix_max >= self.seq_len {
            return Err(SuhmoError::Invalid("prefix_max must be in 1..seq_len".into()));
        }
        Ok(())
    }
}

/// max(0, x) built from the elementwise-max primitive.
fn relu<'t>(tape: &'t Tape, x: Var<'t>) -> Var<'t> {
    let zeros = tape.constant(crate::autodiff::Tensor::zeros(x.value().shape()));
    x.emax(zeros)
}

/// Mean of the per-tensor means. All score tensors in one list share a shape,
/// so this equals the grand mean.
fn mean_of<'t>(vars: &[Var<'t>]) -> Var<'t> {
    let n = vars.len() as f64;
    let mut acc = vars[0].mean();
    for v in &vars[1..] {
        acc = acc.add(v.mean());
    }
    acc.scale(1.0 / n)
}

/// Discriminator hinge loss: mean(max(0, 1 - s_real)) + mean(max(0, 1 + s_fake)).
pub fn hinge_d_loss<'t>(tape: &'t Tape, real: &[Var<'t>], fake: &[Var<'t>]) -> Var<'t> {
    assert!(!real.is_empty() && !fake.is_empty(), "hinge loss needs scores");
    let real_terms: Vec<Var<'t>> =
        real.iter().map(|s| relu(tape, s.scale(-1.0).add_scalar(1.0))).collect();
    let fake_terms: Vec<Var<'t>> =
        fake.iter().map(|s| relu(tape, s.add_scalar(1.0))).collect();
    mean_of(&real_terms).add(mean_of(&fake_terms))
}

/// Generator hinge loss: -mean(s_fake).
pub fn hinge_g_loss<'t>(fake: &[Var<'t>]) -> Var<'t> {
    assert!(!fake.is_empty(), "hinge loss needs scores");
    mean_of(fake).scale(-1.0)
}

/// Decay-on-stall schedule: a single divide-by-`factor` once the monitored
/// metric stops improving by more than 1% over `stall_window` evaluations.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    history: Vec<f64>,
    stall_window: usize,
    factor: f64,
    decayed: bool,
}

impl LrSchedule {
    pub fn new(stall_window: usize, factor: f64) -> Self {
        LrSchedule { history: Vec::new(), stall_window, factor, decayed: false }
    }

    /// Record a metric value (lower is better) and return the current LR
    /// multiplier.
    pub fn observe(&mut self, metric: f64) -> f64 {
        self.history.push(metric);
        if !self.decayed && self.history.len() > self.stall_window {
            let split = self.history.len() - self.stall_window;
            let before = self.history[..split].iter().cloned().fold(f64::INFINITY, f64::min);
            let recent = self.history[split..].iter().cloned().fold(f64::INFINITY, f64::min);
            if recent > 0.99 * before {
                self.decayed = true;
            }
        }
        self.multiplier()
    }

    pub fn multiplier(&self) -> f64 {
        if self.decayed {
            1.0 / self.factor
        } else {
            1.0
        }
    }
}

/// One row of the training metric log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub iter: usize,
    pub loss_g: f64,
    pub loss_d: f64,
    pub loss_l2: f64,
    pub fvd40: f64,
    pub tfid: f64,
    pub lr_g: f64,
    pub lr_d: f64,
}

pub const METRIC_CSV_HEADER: &str = "iter,loss_G,loss_D,loss_L2,fvd40,tfid,lr_G,lr_D";

impl MetricRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter, self.loss_g, self.loss_d, self.loss_l2, self.fvd40, self.tfid,
            self.lr_g, self.lr_d
        )
    }
}
