use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    adam_step, clip_grad_norm, hinge_d_loss, hinge_g_loss, mean_of, AdamState, LrSchedule,
    MetricRow,
    TrainConfig,
};
use crate::autodiff::{ParamSet, Tape};
use crate::data::{augment_reference, MotionSequence, SamplePair};
use crate::error::{Result, SuhmoError};
use crate::metrics::{fvd_like, tfid, FrameExtractor, SequenceExtractor, DEFAULT_ALPHA};
use crate::model::discriminator::{
    sample_windows, window_rows, DiscConfig, Discriminators, WindowSpec,
};
use crate::model::generator::{real_kinematic_rows, GenConfig, Generator, PairBatch};
use crate::rng;

pub struct TrainOutcome {
    /// Generator and discriminator leaves merged into one set.
    pub params: ParamSet,
    pub log: Vec<MetricRow>,
    pub generator: Generator,
}

fn finite(value: f64, iter: usize, term: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SuhmoError::NanLoss { iter, term: term.to_string() })
    }
}

/// True when dataset index `i` belongs to the validation split: two adjacent
/// sequences out of every sixteen. Taking an adjacent pair (rather than every
/// eighth index) keeps the split balanced across datasets whose labels cycle
/// with a small period, e.g. the synthetic generator's `mode = i % n_modes`.
pub fn is_val_index(i: usize) -> bool {
    i % 16 >= 14
}

/// Sequences held out for validation: two in every sixteen.
pub fn split_dataset(dataset: &[MotionSequence]) -> (Vec<&MotionSequence>, Vec<&MotionSequence>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        if is_val_index(i) {
            val.push(s);
        } else {
            train.push(s);
        }
    }
    (train, val)
}

/// Generate `n` free-running sequences of length `t_out` from the first
/// frames of `refs`, with augmented-reference partners.
pub fn generate_from_refs(
    gen: &Generator,
    params: &ParamSet,
    refs: &[&MotionSequence],
    t_out: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<MotionSequence>> {
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let r = refs[i % refs.len()];
        let frame = r.frame(0);
        let partner = augment_reference(&frame, rng::substream(seed, "gen.partner", i as u64).gen());
        pairs.push(SamplePair::new(
            MotionSequence::from_frames(&[frame], r.fps),
            MotionSequence::from_frames(&[partner], r.fps),
        )?);
    }
    let out = gen.rollout(params, &pairs, 1, t_out, refs[0].fps)?;
    Ok(out.into_iter().map(|p| p.first).collect())
}

pub fn train(cfg: &TrainConfig, dataset: &[MotionSequence]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.len() < 16 {
        return Err(SuhmoError::Invalid("training needs at least 16 sequences".into()));
    }
    let k = dataset[0].n_landmarks();
    let fps = dataset[0].fps;
    for s in dataset {
        if s.len() < cfg.seq_len {
            return Err(SuhmoError::Invalid(format!(
                "dataset sequence of length {} shorter than training length {}",
                s.len(),
                cfg.seq_len
            )));
        }
    }
    let (train_set, val_set) = split_dataset(dataset);
    if train_set.len() < cfg.batch {
        return Err(SuhmoError::Invalid("training split smaller than batch size".into()));
    }

    let gen = Generator::new(GenConfig {
        variant: cfg.variant,
        n_landmarks: k,
        hidden: cfg.hidden,
        embed: cfg.embed,
        head_depth: 1,
        delta_based: cfg.delta_based,
        one_sample: cfg.one_sample_g,
    });
    let disc = Discriminators::new(DiscConfig {
        variant: cfg.variant,
        n_landmarks: k,
        embed: cfg.disc_embed,
        scales: cfg.scales.clone(),
        windows_per_seq: cfg.windows_per_seq,
    });
    let mut params = gen.init_params(&mut rng::stream(cfg.seed, "init.gen"));
    for (name, tensor) in disc.init_params(&mut rng::stream(cfg.seed, "init.disc")).iter() {
        params.insert(name.clone(), tensor.clone());
    }

    let seq_ex = SequenceExtractor::new(k, cfg.seed ^ 0x5eed, 64);
    let frame_ex = FrameExtractor::new(cfg.seed ^ 0x5eed, 64);
    let val_full: Vec<MotionSequence> =
        val_set.iter().map(|s| s.window(0, cfg.seq_len)).collect();

    let mut adam_g = AdamState::default();
    let mut adam_d = AdamState::default();
    let mut sched = LrSchedule::new(cfg.stall_window, cfg.decay_factor);
    let mut log = Vec::new();
    let mut last_losses;

    for iter in 0..cfg.max_iters {
        let mut it_rng = rng::substream(cfg.seed, "train.iter", iter as u64);
        let prefix_len = it_rng.gen_range(1..=cfg.prefix_max);
        let mut idx: Vec<usize> = (0..train_set.len()).collect();
        idx.shuffle(&mut it_rng);
        let pairs: Vec<SamplePair> = idx[..cfg.batch]
            .chunks_exact(2)
            .map(|c| {
                SamplePair::new(
                    train_set[c[0]].window(0, cfg.seq_len),
                    train_set[c[1]].window(0, cfg.seq_len),
                )
            })
            .collect::<Result<_>>()?;

        // ---- generator step ----
        let tape = Tape::new();
        let prefix = PairBatch::from_pairs(&pairs, prefix_len);
        let roll = gen.rollout_graph(&tape, &params, &prefix, cfg.seq_len)?;

        // L2 against the ground-truth continuation of the observed prefix
        let mut mse_terms = Vec::new();
        for m in 0..2 {
            let full = PairBatch::from_pairs(&pairs, cfg.seq_len);
            for t in prefix_len..cfg.seq_len {
                let target = tape.constant(full.pos[m][t].clone());
                let diff = roll.pos[m][t].sub(target);
                mse_terms.push(diff.mul(diff).mean());
            }
        }
        let l2 = mean_of(&mse_terms);
        let loss_l2 = finite(l2.item(), iter, "L2")?;

        let windows = draw_windows(cfg, &mut it_rng)?;
        let g_loss = if cfg.l2_only {
            l2
        } else {
            let rows = [
                Generator::kinematic_rows(&tape, &roll, 0),
                Generator::kinematic_rows(&tape, &roll, 1),
            ];
            let mut joint = Vec::new();
            let mut marginal = Vec::new();
            for w in &windows {
                if cfg.one_sample_d {
                    for r in &rows {
                        joint.push(disc.joint.score(&tape, &params, window_rows(r, *w))?);
                    }
                } else {
                    joint.push(disc.joint.score_joint(
                        &tape,
                        &params,
                        window_rows(&rows[0], *w),
                        window_rows(&rows[1], *w),
                    )?);
                }
                for r in &rows {
                    marginal.push(disc.marginal.score(&tape, &params, window_rows(r, *w))?);
                }
            }
            let mut frames = Vec::new();
            for r in &rows {
                frames.extend(disc.score_frames(&tape, &params, &r[prefix_len..]));
            }
            let adv = hinge_g_loss(&joint)
                .add(hinge_g_loss(&marginal))
                .add(hinge_g_loss(&frames));
            finite(adv.item(), iter, "G_adv")?;
            adv.add(l2.scale(cfg.lambda))
        };
        finite(g_loss.item(), iter, "G_total")?;
        let mut grads = tape.backward(g_loss, &params)?;
        clip_grad_norm(&mut grads, cfg.grad_clip, |n| n.starts_with("gen."));
        let fake_pairs: Vec<SamplePair> =
            (0..pairs.len()).map(|b| roll.to_pair(b, fps)).collect();
        let lr_g = cfg.lr_g * sched.multiplier();
        let loss_g = g_loss.item();
        adam_step(
            &mut params,
            &grads,
            &mut adam_g,
            lr_g,
            cfg.beta1,
            cfg.beta2,
            cfg.adam_eps,
            |n| n.starts_with("gen."),
        )?;

        // ---- discriminator step (fakes treated as constants) ----
        let loss_d = if cfg.l2_only {
            0.0
        } else {
            let tape = Tape::new();
            let real_m: [Vec<&MotionSequence>; 2] = [
                pairs.iter().map(|p| &p.first).collect(),
                pairs.iter().map(|p| &p.second).collect(),
            ];
            let fake_m: [Vec<&MotionSequence>; 2] = [
                fake_pairs.iter().map(|p| &p.first).collect(),
                fake_pairs.iter().map(|p| &p.second).collect(),
            ];
            let real_rows =
                [real_kinematic_rows(&tape, &real_m[0]), real_kinematic_rows(&tape, &real_m[1])];
            let fake_rows =
                [real_kinematic_rows(&tape, &fake_m[0]), real_kinematic_rows(&tape, &fake_m[1])];

            let windows = draw_windows(cfg, &mut it_rng)?;
            let mut joint_r = Vec::new();
            let mut joint_f = Vec::new();
            let mut marg_r = Vec::new();
            let mut marg_f = Vec::new();
            for w in &windows {
                if cfg.one_sample_d {
                    for rows in &real_rows {
                        joint_r.push(disc.joint.score(&tape, &params, window_rows(rows, *w))?);
                    }
                    for rows in &fake_rows {
                        joint_f.push(disc.joint.score(&tape, &params, window_rows(rows, *w))?);
                    }
                } else {
                    joint_r.push(disc.joint.score_joint(
                        &tape,
                        &params,
                        window_rows(&real_rows[0], *w),
                        window_rows(&real_rows[1], *w),
                    )?);
                    joint_f.push(disc.joint.score_joint(
                        &tape,
                        &params,
                        window_rows(&fake_rows[0], *w),
                        window_rows(&fake_rows[1], *w),
                    )?);
                }
                for rows in &real_rows {
                    marg_r.push(disc.marginal.score(&tape, &params, window_rows(rows, *w))?);
                }
                for rows in &fake_rows {
                    marg_f.push(disc.marginal.score(&tape, &params, window_rows(rows, *w))?);
                }
            }
            let mut frame_r = Vec::new();
            let mut frame_f = Vec::new();
            for rows in &real_rows {
                frame_r.extend(disc.score_frames(&tape, &params, rows));
            }
            for rows in &fake_rows {
                frame_f.extend(disc.score_frames(&tape, &params, &rows[prefix_len..]));
            }
            let d_loss = hinge_d_loss(&tape, &joint_r, &joint_f)
                .add(hinge_d_loss(&tape, &marg_r, &marg_f))
                .add(hinge_d_loss(&tape, &frame_r, &frame_f));
            let val = finite(d_loss.item(), iter, "D")?;
            let mut grads = tape.backward(d_loss, &params)?;
            clip_grad_norm(&mut grads, cfg.grad_clip, |n| n.starts_with("disc."));
            adam_step(
                &mut params,
                &grads,
                &mut adam_d,
                cfg.lr_d * sched.multiplier(),
                cfg.beta1,
                cfg.beta2,
                cfg.adam_eps,
                |n| n.starts_with("disc."),
            )?;
            val
        };
        last_losses = (loss_g, loss_d, loss_l2);

        if (iter + 1) % cfg.eval_interval == 0 || iter + 1 == cfg.max_iters {
            let fakes = generate_from_refs(
                &gen,
                &params,
                &val_set,
                cfg.seq_len,
                val_set.len().min(16),
                rng::substream(cfg.seed, "eval", iter as u64).gen(),
            )?;
            let fvd = fvd_like(&val_full, &fakes, cfg.seq_len.min(40), &seq_ex, 1)?;
            let tf = tfid(&val_full, &fakes, DEFAULT_ALPHA, &frame_ex, 1)?;
            sched.observe(fvd);
            log.push(MetricRow {
                iter: iter + 1,
                loss_g: last_losses.0,
                loss_d: last_losses.1,
                loss_l2: last_losses.2,
                fvd40: fvd,
                tfid: tf,
                lr_g: cfg.lr_g * sched.multiplier(),
                lr_d: cfg.lr_d * sched.multiplier(),
            });
        }
    }

    Ok(TrainOutcome { params, log, generator: gen })
}

fn draw_windows(cfg: &TrainConfig, it_rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<WindowSpec>> {
    if cfg.no_multiscale {
        Ok(vec![WindowSpec { start: 0, len: cfg.seq_len }])
    } else {
        sample_windows(cfg.seq_len, &cfg.scales, cfg.windows_per_seq, it_rng)
    }
}
