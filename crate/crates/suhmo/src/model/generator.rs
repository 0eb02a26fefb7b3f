//! Autoregressive velocity generator producing a pair of sequences together.
//!
//! x_t = x_{t-1} + G(x_{0:t-1}); positions are carried as reference + running
//! velocity sum so the telescoping identity holds bit-exactly.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Attention, AttentionBlock, Linear, LstmCell, Mlp};
use super::{batch_pool, concat_cols, concat_time, Variant};
use crate::autodiff::{ParamSet, Tape, Tensor, Var};
use crate::data::{kinematics, MotionSequence, SamplePair, ACC_GAIN, VEL_GAIN};
use crate::error::{Result, SuhmoError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub variant: Variant,
    pub n_landmarks: usize,
    /// Recurrent hidden size (paper 1024, desk 64).
    pub hidden: usize,
    /// Attention embedding size (paper 1024, desk 64).
    pub embed: usize,
    /// Number of hidden layers in the velocity head.
    pub head_depth: usize,
    /// Emit displacements from the reference frame instead of velocities.
    pub delta_based: bool,
    /// Ablation: no pair mixing inside the generator.
    pub one_sample: bool,
}

impl GenConfig {
    pub fn desk(variant: Variant, n_landmarks: usize) -> Self {
        GenConfig {
            variant,
            n_landmarks,
            hidden: 64,
            embed: 64,
            head_depth: 1,
            delta_based: false,
            one_sample: false,
        }
    }

    pub fn paper(variant: Variant, n_landmarks: usize) -> Self {
        GenConfig { hidden: 1024, embed: 1024, ..GenConfig::desk(variant, n_landmarks) }
    }

    pub fn in_dim(&self) -> usize {
        // positions and velocities per timestep
        self.n_landmarks * 4
    }

    pub fn out_dim(&self) -> usize {
        self.n_landmarks * 2
    }
}

enum Net {
    Recurrent { cell: LstmCell, head: Mlp },
    Attention { embed: Linear, cross: Attention, block: AttentionBlock, head: Mlp },
}

pub struct Generator {
    pub cfg: GenConfig,
    net: Net,
}

/// Batched pair prefixes / outputs: per member, per timestep position tensors
/// of shape (B, 2K).
#[derive(Clone, Debug)]
pub struct PairBatch {
    pub pos: [Vec<Tensor>; 2],
    pub batch: usize,
    pub k: usize,
}

impl PairBatch {
    pub fn from_pairs(pairs: &[SamplePair], upto: usize) -> Self {
        let batch = pairs.len();
        let k = pairs[0].first.n_landmarks();
        let mut pos = [Vec::with_capacity(upto), Vec::with_capacity(upto)];
        for t in 0..upto {
            for m in 0..2 {
                let mut data = Vec::with_capacity(batch * k * 2);
                for p in pairs {
                    let seq = if m == 0 { &p.first } else { &p.second };
                    data.extend_from_slice(seq.frame_coords(t));
                }
                pos[m].push(Tensor::new(data, &[batch, k * 2]));
            }
        }
        PairBatch { pos, batch, k }
    }

    pub fn len(&self) -> usize {
        self.pos[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos[0].is_empty()
    }
}

/// Rollout result still attached to the tape: per member, per timestep
/// positions and emitted velocities (zeros for t = 0 and within the prefix,
/// where frames are observed rather than generated).
pub struct RolloutGraph<'t> {
    pub pos: [Vec<Var<'t>>; 2],
    pub vel: [Vec<Var<'t>>; 2],
    pub prefix_len: usize,
    pub batch: usize,
    pub k: usize,
}

impl<'t> RolloutGraph<'t> {
    /// Materialize pair `b` of the batch as a SamplePair.
    pub fn to_pair(&self, b: usize, fps: f32) -> SamplePair {
        let t_out = self.pos[0].len();
        let mut seqs = Vec::with_capacity(2);
        for m in 0..2 {
            let mut data = Vec::with_capacity(t_out * self.k * 2);
            for t in 0..t_out {
                let v = self.pos[m][t].value();
                data.extend_from_slice(&v.data()[b * self.k * 2..(b + 1) * self.k * 2]);
            }
            seqs.push(MotionSequence::new(data, t_out, self.k, fps));
        }
        let second = seqs.pop().unwrap();
        SamplePair { first: seqs.pop().unwrap(), second }
    }
}

impl Generator {
    pub fn new(cfg: GenConfig) -> Self {
        let net = match cfg.variant {
            Variant::Recurrent => Net::Recurrent {
                cell: LstmCell::new("gen.cell", cfg.in_dim() + cfg.hidden, cfg.hidden),
                head: Mlp::new("gen.head", cfg.hidden, &vec![cfg.hidden; cfg.head_depth], cfg.out_dim()),
            },
            Variant::Attention => Net::Attention {
                embed: Linear::new("gen.embed", cfg.in_dim(), cfg.embed),
                cross: Attention::new("gen.cross", cfg.embed),
                block: AttentionBlock::new("gen.block", cfg.embed),
                head: Mlp::new("gen.head", cfg.embed, &vec![cfg.embed; cfg.head_depth], cfg.out_dim()),
            },
        };
        Generator { cfg, net }
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamSet {
        let mut params = ParamSet::new();
        match &self.net {
            Net::Recurrent { cell, head } => {
                cell.init(&mut params, rng);
                head.init_out_scaled(&mut params, rng, 0.1);
            }
            Net::Attention { embed, cross, block, head } => {
                embed.init(&mut params, rng);
                cross.init(&mut params, rng);
                block.init(&mut params, rng);
                head.init_out_scaled(&mut params, rng, 0.1);
            }
        }
        params
    }

    /// Autoregressive rollout to `t_out` total frames given an observed prefix.
    /// Frames past the prefix are generated; kinematic inputs are recomputed
    /// from generated frames.
    pub fn rollout_graph<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        prefix: &PairBatch,
        t_out: usize,
    ) -> Result<RolloutGraph<'t>> {
        let prefix_len = prefix.len();
        if prefix_len < 1 {
            return Err(SuhmoError::Invalid("rollout requires a prefix of at least 1 frame".into()));
        }
        if t_out < prefix_len {
            return Err(SuhmoError::Invalid(format!(
                "t_out {t_out} shorter than prefix {prefix_len}"
            )));
        }
        let (batch, k) = (prefix.batch, prefix.k);
        let zeros = || tape.constant(Tensor::zeros(&[batch, k * 2]));

        // positions, velocities, and the running velocity sum per member
        let mut pos: [Vec<Var<'t>>; 2] = [Vec::new(), Vec::new()];
        let mut vel: [Vec<Var<'t>>; 2] = [Vec::new(), Vec::new()];
        // anchor frame and running velocity sum, set at the first generated step
        let mut vsum: [Option<(Var<'t>, Var<'t>)>; 2] = [None, None];
        for m in 0..2 {
            for t in 0..prefix_len {
                pos[m].push(tape.constant(prefix.pos[m][t].clone()));
            }
            vel[m].push(zeros());
            for t in 1..prefix_len {
                vel[m].push(pos[m][t].sub(pos[m][t - 1]));
            }
        }

        // per-step generator input: positions || velocities, per member; the
        // velocity channels carry the same fixed gain as discriminator rows
        let gen_input = |pos: &[Var<'t>], vel: &[Var<'t>], t: usize| -> Var<'t> {
            concat_cols(tape, &[pos[t], vel[t].scale(VEL_GAIN)])
        };

        match &self.net {
            Net::Recurrent { cell, head } => {
                let mut state = [cell.zero_state(tape, batch), cell.zero_state(tape, batch)];
                let mut pooled = [
                    tape.constant(Tensor::zeros(&[batch, self.cfg.hidden])),
                    tape.constant(Tensor::zeros(&[batch, self.cfg.hidden])),
                ];
                for t in 0..t_out.saturating_sub(1) {
                    let mut hs = [None, None];
                    for m in 0..2 {
                        let x = gen_input(&pos[m], &vel[m], t);
                        let input = concat_cols(tape, &[x, pooled[m]]);
                        let (h, c) = cell.step(tape, params, input, state[m].0, state[m].1);
                        state[m] = (h, c);
                        hs[m] = Some(h);
                    }
                    let (h1, h2) = (hs[0].unwrap(), hs[1].unwrap());
                    if self.cfg.one_sample {
                        pooled = [h1, h2];
                    } else {
                        let (p1, p2) = batch_pool(h1, h2);
                        pooled = [p1, p2];
                    }
                    if t + 1 >= prefix_len {
                        for m in 0..2 {
                            let h = if m == 0 { h1 } else { h2 };
                            let v = head.forward(tape, params, h);
                            self.advance(&mut pos[m], &mut vel[m], &mut vsum[m], v);
                        }
                    }
                }
            }
            Net::Attention { embed, cross, block, head } => {
                // embedded history rows, (B, 1, e) pieces per member
                let mut emb: [Vec<Var<'t>>; 2] = [Vec::new(), Vec::new()];
                for t in prefix_len..t_out {
                    for m in 0..2 {
                        while emb[m].len() < t {
                            let s = emb[m].len();
                            let x = gen_input(&pos[m], &vel[m], s);
                            let e = embed.forward(tape, params, x).reshape(&[batch, 1, self.cfg.embed]);
                            emb[m].push(e);
                        }
                    }
                    // full causal attention recomputed each step
                    let hist = [concat_time(tape, &emb[0]), concat_time(tape, &emb[1])];
                    for m in 0..2 {
                        let other = if self.cfg.one_sample { hist[m] } else { hist[1 - m] };
                        let mixed = cross.forward(tape, params, hist[m], other);
                        let enc = block.forward(tape, params, mixed, mixed);
                        let last = enc
                            .slice(1, t - 1, 1)
                            .reshape(&[batch, self.cfg.embed]);
                        let v = head.forward(tape, params, last);
                        self.advance(&mut pos[m], &mut vel[m], &mut vsum[m], v);
                    }
                }
            }
        }
        Ok(RolloutGraph { pos, vel, prefix_len, batch, k })
    }

    /// Append the next frame from head output `v`.
    fn advance<'t>(
        &self,
        pos: &mut Vec<Var<'t>>,
        vel: &mut Vec<Var<'t>>,
        vsum: &mut Option<(Var<'t>, Var<'t>)>,
        v: Var<'t>,
    ) {
        if self.cfg.delta_based {
            // displacement from the reference frame, no cumulative sum
            let x = pos[0].add(v);
            vel.push(x.sub(*pos.last().unwrap()));
            pos.push(x);
        } else {
            // positions are anchor + running sum, so x_T - anchor is exactly
            // the ordered sum of emitted velocities
            let (anchor, s) = match *vsum {
                Some((anchor, s)) => (anchor, s.add(v)),
                None => (*pos.last().unwrap(), v),
            };
            *vsum = Some((anchor, s));
            pos.push(anchor.add(s));
            vel.push(v);
        }
    }

    /// Convenience rollout detached from any training graph.
    pub fn rollout(
        &self,
        params: &ParamSet,
        pairs: &[SamplePair],
        prefix_len: usize,
        t_out: usize,
        fps: f32,
    ) -> Result<Vec<SamplePair>> {
        let prefix = PairBatch::from_pairs(pairs, prefix_len.min(pairs[0].first.len()));
        let tape = Tape::new();
        let graph = self.rollout_graph(&tape, params, &prefix, t_out)?;
        Ok((0..pairs.len()).map(|b| graph.to_pair(b, fps)).collect())
    }

    /// Kinematic rows (positions || velocities || accelerations), (B, 6K) per
    /// timestep, for discriminator input over generated output.
    pub fn kinematic_rows<'t>(tape: &'t Tape, roll: &RolloutGraph<'t>, member: usize) -> Vec<Var<'t>> {
        let (pos, vel) = (&roll.pos[member], &roll.vel[member]);
        let zeros = tape.constant(Tensor::zeros(&[roll.batch, roll.k * 2]));
        (0..pos.len())
            .map(|t| {
                let v = vel[t];
                let a = if t < 2 { zeros } else { vel[t].sub(vel[t - 1]) };
                concat_cols(tape, &[pos[t], v.scale(VEL_GAIN), a.scale(ACC_GAIN)])
            })
            .collect()
    }
}


/// Kinematic rows for a batch of real sequences, as constants.
pub fn real_kinematic_rows<'t>(tape: &'t Tape, seqs: &[&MotionSequence]) -> Vec<Var<'t>> {
    let batch = seqs.len();
    let k = seqs[0].n_landmarks();
    let t_len = seqs[0].len();
    let kins: Vec<_> = seqs.iter().map(|s| kinematics(s)).collect();
    (0..t_len)
        .map(|t| {
            let mut data = Vec::with_capacity(batch * k * 6);
            for kin in &kins {
                let row = kin.row(t);
                data.extend_from_slice(&row[..k * 2]);
                data.extend(row[k * 2..k * 4].iter().map(|v| v * VEL_GAIN));
                data.extend(row[k * 4..].iter().map(|a| a * ACC_GAIN));
            }
            tape.constant(Tensor::new(data, &[batch, k * 6]))
        })
        .collect()
}
