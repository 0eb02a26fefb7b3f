//! Window-based multi-scale marginal, joint and frame discriminators, all
//! built on a base sequence scorer applied to randomly sampled temporal
//! slices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layers::{AttentionBlock, Linear, LstmCell, Mlp};
use super::{batch_pool, concat_time, Variant};
use crate::autodiff::{ParamSet, Tape, Var};
use crate::data::MotionSequence;
use crate::error::{Result, SuhmoError};
use crate::model::generator::real_kinematic_rows;
use crate::rng;

/// Temporal slice [t, t + tau) of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct DiscConfig {
    pub variant: Variant,
    pub n_landmarks: usize,
    /// Embedding / hidden size (paper 128, desk 32).
    pub embed: usize,
    /// Scale set for the window length tau.
    pub scales: Vec<usize>,
    /// Windows sampled per sequence per training step.
    pub windows_per_seq: usize,
}

impl DiscConfig {
    pub fn desk(variant: Variant, n_landmarks: usize) -> Self {
        DiscConfig {
            variant,
            n_landmarks,
            embed: 32,
            scales: vec![10, 20, 40],
            windows_per_seq: 4,
        }
    }

    pub fn paper(variant: Variant, n_landmarks: usize) -> Self {
        DiscConfig { embed: 128, ..DiscConfig::desk(variant, n_landmarks) }
    }

    pub fn in_dim(&self) -> usize {
        // positions, velocities and accelerations per timestep
        self.n_landmarks * 6
    }
}

/// tau uniform over the feasible subset of the scale set, t uniform over
/// {0 .. T - tau}; deterministic in the rng state.
pub fn sample_windows(
    t_len: usize,
    scales: &[usize],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<WindowSpec>> {
    let feasible: Vec<usize> = scales.iter().copied().filter(|&s| s >= 1 && s <= t_len).collect();
    if feasible.is_empty() {
        return Err(SuhmoError::Invalid(format!(
            "no feasible scale for sequence length {t_len} in {scales:?}"
        )));
    }
    Ok((0..n)
        .map(|_| {
            let len = feasible[rng.gen_range(0..feasible.len())];
            let start = rng.gen_range(0..=t_len - len);
            WindowSpec { start, len }
        })
        .collect())
}

/// Exhaustive window set: every feasible (tau, t).
pub fn all_windows(t_len: usize, scales: &[usize]) -> Vec<WindowSpec> {
    let mut out = Vec::new();
    for &len in scales {
        if len >= 1 && len <= t_len {
            for start in 0..=t_len - len {
                out.push(WindowSpec { start, len });
            }
        }
    }
    out
}

/// One base scorer: maps a window of d-dimensional rows to a scalar score
/// per batch element.
enum BaseNet {
    Recurrent { cell: LstmCell, score: Mlp },
    Attention { embed: Linear, block: AttentionBlock, score: Mlp },
}

pub struct BaseScorer {
    prefix: String,
    cfg: DiscConfig,
    net: BaseNet,
}

impl BaseScorer {
    pub fn new(prefix: &str, cfg: DiscConfig) -> Self {
        let e = cfg.embed;
        let net = match cfg.variant {
            Variant::Recurrent => BaseNet::Recurrent {
                cell: LstmCell::new(format!("{prefix}.cell"), cfg.in_dim(), e),
                score: Mlp::new(&format!("{prefix}.score"), e, &[e], 1),
            },
            Variant::Attention => BaseNet::Attention {
                embed: Linear::new(format!("{prefix}.embed"), cfg.in_dim(), e),
                block: AttentionBlock::new(&format!("{prefix}.block"), e),
                score: Mlp::new(&format!("{prefix}.score"), e, &[e], 1),
            },
        };
        BaseScorer { prefix: prefix.to_string(), cfg, net }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        match &self.net {
            BaseNet::Recurrent { cell, score } => {
                cell.init(params, rng);
                score.init(params, rng);
            }
            BaseNet::Attention { embed, block, score } => {
                embed.init(params, rng);
                block.init(params, rng);
                score.init(params, rng);
                // learnable class token, prepended to the input sequence
                params.insert_uniform(format!("{}.token", self.prefix), &[1, self.cfg.embed], rng);
            }
        }
    }

    /// Encode window rows ((B, 6K) per timestep) to a (B, e) summary vector.
    fn encode<'t>(&self, tape: &'t Tape, params: &ParamSet, rows: &[Var<'t>]) -> Var<'t> {
        assert!(!rows.is_empty());
        match &self.net {
            BaseNet::Recurrent { cell, .. } => {
                let batch = rows[0].shape()[0];
                let (mut h, mut c) = cell.zero_state(tape, batch);
                for &x in rows {
                    let (h2, c2) = cell.step(tape, params, x, h, c);
                    h = h2;
                    c = c2;
                }
                h
            }
            BaseNet::Attention { embed, block, .. } => {
                let batch = rows[0].shape()[0];
                let e = self.cfg.embed;
                let token = tape
                    .param(params, &format!("{}.token", self.prefix))
                    .broadcast_batch(batch);
                let mut pieces = vec![token];
                for &x in rows {
                    pieces.push(embed.forward(tape, params, x).reshape(&[batch, 1, e]));
                }
                let seq = concat_time(tape, &pieces);
                let enc = block.forward(tape, params, seq, seq);
                // score is read from the class token position
                enc.slice(1, 0, 1).reshape(&[batch, e])
            }
        }
    }

    /// Scalar score per batch element, shape (B, 1).
    pub fn score<'t>(&self, tape: &'t Tape, params: &ParamSet, rows: &[Var<'t>]) -> Result<Var<'t>> {
        if rows.is_empty() {
            return Err(SuhmoError::Invalid(format!("{}: empty window", self.prefix)));
        }
        let enc = self.encode(tape, params, rows);
        Ok(self.score_head().forward(tape, params, enc))
    }

    /// Joint score of a pair of windows: encode both members, batch-pool to a
    /// single vector, then score. One score per pair, shape (B, 1).
    pub fn score_joint<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        rows_a: &[Var<'t>],
        rows_b: &[Var<'t>],
    ) -> Result<Var<'t>> {
        if rows_a.is_empty() || rows_b.is_empty() {
            return Err(SuhmoError::Invalid(format!("{}: empty window", self.prefix)));
        }
        if rows_a.len() != rows_b.len() {
            return Err(SuhmoError::Invalid(format!(
                "{}: member window lengths differ ({} vs {})",
                self.prefix,
                rows_a.len(),
                rows_b.len()
            )));
        }
        let ea = self.encode(tape, params, rows_a);
        let eb = self.encode(tape, params, rows_b);
        let (pooled, _) = batch_pool(ea, eb);
        Ok(self.score_head().forward(tape, params, pooled))
    }

    fn score_head(&self) -> &Mlp {
        match &self.net {
            BaseNet::Recurrent { score, .. } => score,
            BaseNet::Attention { score, .. } => score,
        }
    }
}

/// The three discriminators: joint multi-scale, marginal multi-scale, frame.
pub struct Discriminators {
    pub cfg: DiscConfig,
    pub joint: BaseScorer,
    pub marginal: BaseScorer,
    pub frame: Mlp,
}

impl Discriminators {
    pub fn new(cfg: DiscConfig) -> Self {
        let d = cfg.in_dim();
        let e = cfg.embed;
        Discriminators {
            joint: BaseScorer::new("disc.joint", cfg.clone()),
            marginal: BaseScorer::new("disc.marginal", cfg.clone()),
            frame: Mlp::new("disc.frame", d, &[e, e], 1),
            cfg,
        }
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamSet {
        let mut params = ParamSet::new();
        self.joint.init(&mut params, rng);
        self.marginal.init(&mut params, rng);
        self.frame.init(&mut params, rng);
        params
    }

    /// Frame scores for each timestep row, (B, 1) each.
    pub fn score_frames<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        rows: &[Var<'t>],
    ) -> Vec<Var<'t>> {
        rows.iter().map(|&r| self.frame.forward(tape, params, r)).collect()
    }
}

/// Monte-Carlo mean over sampled windows of an arbitrary per-window score.
/// Sums in sampling order for a deterministic reduction.
pub fn multiscale_estimate<F>(
    t_len: usize,
    scales: &[usize],
    n_windows: usize,
    seed: u64,
    mut score: F,
) -> Result<f64>
where
    F: FnMut(WindowSpec) -> f64,
{
    let mut r = rng::stream(seed, "windows");
    let windows = sample_windows(t_len, scales, n_windows, &mut r)?;
    let total: f64 = windows.iter().map(|&w| score(w)).sum();
    Ok(total / windows.len() as f64)
}

/// Monte-Carlo multi-scale score of a plain sequence under a base scorer.
pub fn score_multiscale(
    scorer: &BaseScorer,
    params: &ParamSet,
    seq: &MotionSequence,
    n_windows: usize,
    seed: u64,
) -> Result<f64> {
    let tape = Tape::new();
    let all_rows = real_kinematic_rows(&tape, &[seq]);
    let mut err = None;
    let est = multiscale_estimate(seq.len(), &scorer.cfg.scales, n_windows, seed, |w| {
        match scorer.score(&tape, params, &all_rows[w.start..w.start + w.len]) {
            Ok(s) => s.item(),
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// Windowed rows helper shared by training code.
pub fn window_rows<'a, 't>(rows: &'a [Var<'t>], w: WindowSpec) -> &'a [Var<'t>] {
    &rows[w.start..w.start + w.len]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::data::DEFAULT_FPS;
    use crate::model::testutil::lstm_step_reference;
    use rand::Rng;

    fn tiny_cfg(variant: Variant) -> DiscConfig {
        DiscConfig { embed: 8, scales: vec![2, 4], ..DiscConfig::desk(variant, 2) }
    }

    fn random_seq(t: usize, k: usize, seed: u64) -> MotionSequence {
        let mut r = rng::stream(seed, "dseq");
        MotionSequence::new(
            (0..t * k * 2).map(|_| r.gen_range(-0.5..0.5)).collect(),
            t,
            k,
            DEFAULT_FPS,
        )
    }

    fn zeroed(d: &Discriminators, seed: u64) -> ParamSet {
        let mut p = d.init_params(&mut rng::stream(seed, "init"));
        for (_, t) in p.iter_mut() {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        p
    }

    #[test]
    fn zero_parameter_network_scores_zero() {
        for variant in [Variant::Recurrent, Variant::Attention] {
            let d = Discriminators::new(tiny_cfg(variant));
            let params = zeroed(&d, 0);
            let seq = random_seq(6, 2, 1);
            let tape = Tape::new();
            let rows = real_kinematic_rows(&tape, &[&seq]);
            let s = d.marginal.score(&tape, &params, &rows).unwrap();
            assert_eq!(s.item(), 0.0, "{variant:?}");
            // frame discriminator too
            for fs in d.score_frames(&tape, &params, &rows) {
                assert_eq!(fs.item(), 0.0);
            }
        }
    }

    #[test]
    fn window_of_length_one_is_valid_and_empty_rejected() {
        let d = Discriminators::new(tiny_cfg(Variant::Recurrent));
        let params = d.init_params(&mut rng::stream(2, "init"));
        let seq = random_seq(4, 2, 3);
        let tape = Tape::new();
        let rows = real_kinematic_rows(&tape, &[&seq]);
        assert!(d.marginal.score(&tape, &params, &rows[..1]).is_ok());
        assert!(d.marginal.score(&tape, &params, &[]).is_err());
    }

    #[test]
    fn recurrent_base_matches_reference_unroll() {
        let cfg = tiny_cfg(Variant::Recurrent);
        let d = Discriminators::new(cfg.clone());
        let mut r = rng::stream(5, "init");
        let params = d.init_params(&mut r);
        let seq = random_seq(2, 2, 6);
        let tape = Tape::new();
        let rows = real_kinematic_rows(&tape, &[&seq]);
        let score = d.marginal.score(&tape, &params, &rows).unwrap().item();

        // reference: two scripted LSTM steps then the score MLP by hand
        let w = params.get("disc.marginal.cell.w").unwrap();
        let b = params.get("disc.marginal.cell.b").unwrap();
        let kin = crate::data::kinematics(&seq);
        let k = seq.n_landmarks();
        let mut h = vec![0.0; cfg.embed];
        let mut c = vec![0.0; cfg.embed];
        for t in 0..2 {
            let mut row = kin.row(t).to_vec();
            for i in 0..k * 2 {
                row[k * 2 + i] *= crate::data::VEL_GAIN;
                row[k * 4 + i] *= crate::data::ACC_GAIN;
            }
            let (h2, c2) = lstm_step_reference(w, b, &row, &h, &c);
            h = h2;
            c = c2;
        }
        let lin = |h: &[f64], w: &Tensor, b: &Tensor| -> Vec<f64> {
            let out = b.numel();
            let mut y = b.data().to_vec();
            for (i, &v) in h.iter().enumerate() {
                for j in 0..out {
                    y[j] += v * w.data()[i * out + j];
                }
            }
            y
        };
        let h1 = lin(
            &h,
            params.get("disc.marginal.score.l0.w").unwrap(),
            params.get("disc.marginal.score.l0.b").unwrap(),
        );
        let h1t: Vec<f64> = h1.iter().map(|v| v.tanh()).collect();
        let out = lin(
            &h1t,
            params.get("disc.marginal.score.l1.w").unwrap(),
            params.get("disc.marginal.score.l1.b").unwrap(),
        );
        assert!((score - out[0]).abs() < 1e-12);
    }

    #[test]
    fn full_scale_window_forces_start_zero() {
        let mut r = rng::stream(7, "w");
        for w in sample_windows(40, &[40], 50, &mut r).unwrap() {
            assert_eq!(w.start, 0);
            assert_eq!(w.len, 40);
        }
    }

    #[test]
    fn windows_respect_bounds() {
        let mut r = rng::stream(8, "w");
        for w in sample_windows(40, &[10, 20, 40], 500, &mut r).unwrap() {
            assert!(w.start + w.len <= 40);
        }
        assert!(sample_windows(5, &[10, 20], 1, &mut r).is_err());
        // infeasible scales are filtered, not fatal, when one fits
        assert!(sample_windows(15, &[10, 20], 4, &mut r).is_ok());
    }

    #[test]
    fn scale_frequencies_uniform_within_3_sigma() {
        let mut r = rng::stream(9, "w");
        let n = 10_000usize;
        let mut counts = [0usize; 3];
        for w in sample_windows(40, &[10, 20, 40], n, &mut r).unwrap() {
            let i = match w.len {
                10 => 0,
                20 => 1,
                _ => 2,
            };
            counts[i] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn multiscale_constant_scorer_is_exact() {
        let est = multiscale_estimate(40, &[10, 20, 40], 100, 1, |_| 0.7).unwrap();
        assert!((est - 0.7).abs() < 1e-12);
    }

    #[test]
    fn multiscale_full_window_mean_on_ramp() {
        // D_M = mean of window values, seq = ramp 0..39, scale {40} -> 19.5
        let ramp: Vec<f64> = (0..40).map(|v| v as f64).collect();
        let est = multiscale_estimate(40, &[40], 10, 2, |w| {
            ramp[w.start..w.start + w.len].iter().sum::<f64>() / w.len as f64
        })
        .unwrap();
        assert_eq!(est, 19.5);
    }

    #[test]
    fn joint_score_swap_invariant_and_degenerate() {
        for variant in [Variant::Recurrent, Variant::Attention] {
            let d = Discriminators::new(tiny_cfg(variant));
            let params = d.init_params(&mut rng::stream(11, "init"));
            let a = random_seq(4, 2, 12);
            let b = random_seq(4, 2, 13);
            let tape = Tape::new();
            let ra = real_kinematic_rows(&tape, &[&a]);
            let rb = real_kinematic_rows(&tape, &[&b]);
            let s_ab = d.joint.score_joint(&tape, &params, &ra, &rb).unwrap().item();
            let s_ba = d.joint.score_joint(&tape, &params, &rb, &ra).unwrap().item();
            assert_eq!(s_ab, s_ba, "{variant:?}: exact swap invariance");
            // identical members: max(v, v) = v, same as scoring one sequence
            let s_aa = d.joint.score_joint(&tape, &params, &ra, &ra).unwrap().item();
            let s_single = d.joint.score(&tape, &params, &ra).unwrap().item();
            assert_eq!(s_aa, s_single, "{variant:?}");
        }
    }

    #[test]
    fn frame_scores_batch_consistent() {
        let d = Discriminators::new(tiny_cfg(Variant::Recurrent));
        let params = d.init_params(&mut rng::stream(14, "init"));
        let a = random_seq(5, 2, 15);
        let b = random_seq(5, 2, 16);
        let tape = Tape::new();
        // batch of two sequences: per-frame scores match per-sequence calls
        let batched = real_kinematic_rows(&tape, &[&a, &b]);
        let single_a = real_kinematic_rows(&tape, &[&a]);
        let sb = d.score_frames(&tape, &params, &batched);
        let sa = d.score_frames(&tape, &params, &single_a);
        for t in 0..5 {
            assert_eq!(sb[t].value().data()[0], sa[t].value().data()[0]);
        }
    }
}
