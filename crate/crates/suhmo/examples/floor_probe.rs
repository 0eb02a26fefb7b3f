//! Scratch: fvd of surrogate generators under the eval extractor.

use rand::Rng;
use suhmo::data::{synth_dataset, MotionSequence, SynthConfig};
use suhmo::metrics::{fvd_like, SequenceExtractor};
use suhmo::rng;

fn main() {
    let data: Vec<_> = synth_dataset(&SynthConfig::desk(100)).into_iter().collect();
    let val: Vec<MotionSequence> =
        data.iter()
            .enumerate()
            .filter(|(i, _)| suhmo::train::is_val_index(*i))
            .map(|(_, s)| s.0.clone())
            .collect();
    let ex = SequenceExtractor::new(5, 999, 8);

    // fresh draws from the true process (perfect generator)
    let fresh: Vec<MotionSequence> =
        synth_dataset(&SynthConfig { seed: 777, n_sequences: 64, ..SynthConfig::desk(777) })
            .into_iter()
            .map(|(s, _)| s)
            .collect();
    println!("perfect64      {:.4}", fvd_like(&val, &fresh, 40, &ex, 1).unwrap());

    // single-mode only (mode collapse, right dynamics)
    let one_mode: Vec<MotionSequence> = synth_dataset(&SynthConfig {
        seed: 778,
        n_sequences: 128,
        ..SynthConfig::desk(778)
    })
    .into_iter()
    .filter(|(_, m)| *m == 0)
    .map(|(s, _)| s)
    .take(64)
    .collect();
    println!("mode0-only     {:.4}", fvd_like(&val, &one_mode, 40, &ex, 1).unwrap());

    // amplitude-shrunk real (velocities scaled by c)
    for c in [0.32f64, 0.6, 0.8] {
        let shrunk: Vec<MotionSequence> = fresh
            .iter()
            .map(|s| {
                let k = s.n_landmarks();
                let mut out = s.frame_coords(0).to_vec();
                for t in 1..s.len() {
                    let prev: Vec<f64> = out[(t - 1) * k * 2..t * k * 2].to_vec();
                    for j in 0..k * 2 {
                        let v = s.frame_coords(t)[j] - s.frame_coords(t - 1)[j];
                        out.push(prev[j] + c * v);
                    }
                }
                MotionSequence::new(out, s.len(), k, 25.0)
            })
            .collect();
        println!("shrunk x{c:.2}   {:.4}", fvd_like(&val, &shrunk, 40, &ex, 1).unwrap());
    }

    // random walk with matched per-step velocity std
    let mut r = rng::stream(5, "probe");
    let mut vs = Vec::new();
    for s in &val {
        for t in 1..s.len() {
            for j in 0..s.n_landmarks() * 2 {
                vs.push(s.frame_coords(t)[j] - s.frame_coords(t - 1)[j]);
            }
        }
    }
    let std = (vs.iter().map(|v| v * v).sum::<f64>() / vs.len() as f64).sqrt();
    let walk: Vec<MotionSequence> = (0..64)
        .map(|i| {
            let s = &val[i % val.len()];
            let k = s.n_landmarks();
            let mut out = s.frame_coords(0).to_vec();
            for t in 1..40 {
                for j in 0..k * 2 {
                    let g: f64 = {
                        let (a, b): (f64, f64) = (r.gen(), r.gen());
                        (-2.0f64 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()
                    };
                    let prev = out[(t - 1) * k * 2 + j];
                    out.push(prev + std * g);
                }
            }
            MotionSequence::new(out, 40, k, 25.0)
        })
        .collect();
    println!("walk(std={std:.4}) {:.4}", fvd_like(&val, &walk, 40, &ex, 1).unwrap());

    // smooth sinusoid, wrong band (freq halfway off)
    let off_band: Vec<MotionSequence> = synth_dataset(&SynthConfig {
        seed: 779,
        n_sequences: 64,
        n_modes: 1,
        ..SynthConfig::desk(779)
    })
    .into_iter()
    .map(|(s, _)| s)
    .collect();
    println!("mode0-128seed  {:.4}", fvd_like(&val, &off_band, 40, &ex, 1).unwrap());
}
