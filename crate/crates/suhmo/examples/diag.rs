//! Scratch diagnostic: train briefly, then characterize the generated
//! trajectories (peak frequency, amplitude) against the real data.

use std::f64::consts::PI;

use suhmo::data::{synth_dataset, MotionSequence, SynthConfig};
use suhmo::metrics::{fvd_like, SequenceExtractor};
use suhmo::model::Variant;
use suhmo::train::{generate_from_refs, train, TrainConfig};

fn peak_freq(seq: &MotionSequence) -> f64 {
    // DFT of the mean landmark x-velocity
    let (t, k) = (seq.len(), seq.n_landmarks());
    let n = t - 1;
    let mut vx = vec![0.0; n];
    for ti in 1..t {
        let (a, b) = (seq.frame_coords(ti - 1), seq.frame_coords(ti));
        for ki in 0..k {
            vx[ti - 1] += (b[ki * 2] - a[ki * 2]) / k as f64;
        }
    }
    let mut best = (1usize, f64::NEG_INFINITY);
    for bin in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &v) in vx.iter().enumerate() {
            let a = 2.0 * PI * bin as f64 * j as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (bin, p);
        }
    }
    best.0 as f64 / n as f64
}

fn amp(seq: &MotionSequence) -> f64 {
    // std of landmark-0 x around its mean
    let xs: Vec<f64> = (0..seq.len()).map(|t| seq.frame_coords(t)[0]).collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn summarize(name: &str, seqs: &[MotionSequence]) {
    let mut hist = [0usize; 20];
    let mut amps = Vec::new();
    for s in seqs {
        let f = peak_freq(s);
        hist[((f * 40.0) as usize).min(19)] += 1;
        amps.push(amp(s));
    }
    amps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "{name}: freq-bin hist (bin = f*40) {:?}  amp p10/p50/p90 {:.3}/{:.3}/{:.3}",
        hist,
        amps[seqs.len() / 10],
        amps[seqs.len() / 2],
        amps[seqs.len() * 9 / 10]
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let data: Vec<_> =
        synth_dataset(&SynthConfig::desk(100)).into_iter().map(|(s, _)| s).collect();
    let val: Vec<_> =
        data.iter()
            .enumerate()
            .filter(|(i, _)| suhmo::train::is_val_index(*i))
            .map(|(_, s)| s.clone())
            .collect();
    summarize("real", &val);

    let mut cfg = TrainConfig { max_iters: iters, ..TrainConfig::desk(Variant::Recurrent, 1) };
    if let Ok(v) = std::env::var("PROBE_LAMBDA") {
        cfg.lambda = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("PROBE_LRG") {
        cfg.lr_g = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("PROBE_LRD") {
        cfg.lr_d = v.parse().unwrap();
    }
    if std::env::var("PROBE_L2ONLY").is_ok() {
        cfg.l2_only = true;
    }
    let out = train(&cfg, &data).unwrap();
    let refs: Vec<&MotionSequence> = val.iter().collect();
    let gens = generate_from_refs(&out.generator, &out.params, &refs, 40, 64, 7).unwrap();
    summarize("gen ", &gens);
    let ex = SequenceExtractor::new(5, 999, 8);
    println!("fvd40 {:.4}", fvd_like(&val, &gens, 40, &ex, 4).unwrap());
    // one raw trace: landmark-0 x over time for the first three draws
    for g in gens.iter().take(3) {
        let xs: Vec<String> =
            (0..g.len()).map(|t| format!("{:+.2}", g.frame_coords(t)[0])).collect();
        println!("trace {}", xs.join(" "));
    }
}
