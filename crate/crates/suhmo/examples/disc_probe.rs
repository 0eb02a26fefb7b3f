//! Scratch harness: can the marginal discriminator learn to separate real
//! synthetic motion from a frozen fake population on its own?
//! cargo run --release -p suhmo --example disc_probe -- [iters] [lr]

use rand::seq::SliceRandom;
use rand::Rng;

use suhmo::autodiff::Tape;
use suhmo::data::{synth_dataset, MotionSequence, SynthConfig};
use suhmo::model::discriminator::{sample_windows, window_rows, DiscConfig, Discriminators};
use suhmo::model::generator::real_kinematic_rows;
use suhmo::model::Variant;
use suhmo::rng;
use suhmo::train::{adam_step, hinge_d_loss, AdamState};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let real: Vec<MotionSequence> = synth_dataset(&SynthConfig::desk(100))
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    // fakes: per-frame jitter around the first frame (wrong dynamics)
    let fakes: Vec<MotionSequence> = real
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::substream(7, "fake", i as u64);
            let mut data = Vec::new();
            for _ in 0..s.len() {
                data.extend(s.frame_coords(0).iter().map(|&v| v + r.gen_range(-0.02..0.02)));
            }
            MotionSequence::new(data, s.len(), s.n_landmarks(), s.fps)
        })
        .collect();

    let disc = Discriminators::new(DiscConfig::desk(Variant::Recurrent, 5));
    let mut params = disc.init_params(&mut rng::stream(1, "init.disc"));
    let mut adam = AdamState::default();

    for iter in 0..iters {
        let mut r = rng::substream(2, "iter", iter as u64);
        let mut idx: Vec<usize> = (0..real.len()).collect();
        idx.shuffle(&mut r);
        let batch = &idx[..16];
        let tape = Tape::new();
        let real_refs: Vec<&MotionSequence> = batch.iter().map(|&i| &real[i]).collect();
        let fake_refs: Vec<&MotionSequence> = batch.iter().map(|&i| &fakes[i]).collect();
        let rr = real_kinematic_rows(&tape, &real_refs);
        let fr = real_kinematic_rows(&tape, &fake_refs);
        let windows = sample_windows(40, &[10, 20, 40], 4, &mut r).unwrap();
        let mut sr = Vec::new();
        let mut sf = Vec::new();
        for w in &windows {
            sr.push(disc.marginal.score(&tape, &params, window_rows(&rr, *w)).unwrap());
            sf.push(disc.marginal.score(&tape, &params, window_rows(&fr, *w)).unwrap());
        }
        let loss = hinge_d_loss(&tape, &sr, &sf);
        let lv = loss.item();
        let grads = tape.backward(loss, &params).unwrap();
        if iter % 20 == 0 || iter + 1 == iters {
            let gn: f64 = grads.values().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
            let msr = sr.iter().map(|s| s.value().data().iter().sum::<f64>() / 16.0).sum::<f64>() / sr.len() as f64;
            let msf = sf.iter().map(|s| s.value().data().iter().sum::<f64>() / 16.0).sum::<f64>() / sf.len() as f64;
            println!("iter {iter:4}  loss {lv:.4}  |g| {gn:.5}  mean_real {msr:.4}  mean_fake {msf:.4}");
        }
        adam_step(&mut params, &grads, &mut adam, lr, 0.5, 0.999, 1e-8, |_| true).unwrap();
    }
}
