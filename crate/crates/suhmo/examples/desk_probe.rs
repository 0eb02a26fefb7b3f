//! Scratch harness for sizing the desk training run; not part of the test
//! suite. cargo run --release -p suhmo --example desk_probe -- [iters] [variant]

use std::time::Instant;

use suhmo::data::{synth_dataset, SynthConfig};
use suhmo::metrics::{diversity, fvd_like, SequenceExtractor};
use suhmo::model::Variant;
use suhmo::train::{train, TrainConfig};

fn mean_disp(seqs: &[suhmo::data::MotionSequence]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in seqs {
        for t in 1..s.len() {
            let (a, b) = (s.frame_coords(t - 1), s.frame_coords(t));
            total += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            n += 1;
        }
    }
    total / n as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let variant = match args.get(2).map(|s| s.as_str()) {
        Some("attention") => Variant::Attention,
        _ => Variant::Recurrent,
    };
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1u64);

    let data: Vec<_> = synth_dataset(&SynthConfig::desk(100))
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    let real_disp = mean_disp(&data);
    let (_, val): (Vec<_>, Vec<_>) = {
        let mut tr = Vec::new();
        let mut va = Vec::new();
        for (i, s) in data.iter().enumerate() {
            if suhmo::train::is_val_index(i) {
                va.push(s.clone())
            } else {
                tr.push(s.clone())
            }
        }
        (tr, va)
    };

    let mut cfg = TrainConfig { max_iters: iters, ..TrainConfig::desk(variant, seed) };
    if let Ok(v) = std::env::var("PROBE_LAMBDA") {
        cfg.lambda = v.parse().unwrap();
    }
    if std::env::var("PROBE_L2ONLY").is_ok() {
        cfg.l2_only = true;
    }
    if let Ok(v) = std::env::var("PROBE_LRG") {
        cfg.lr_g = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("PROBE_LRD") {
        cfg.lr_d = v.parse().unwrap();
    }
    let ex = SequenceExtractor::new(5, 999, 8);

    // untrained baseline
    let init = train(&TrainConfig { max_iters: 0, ..cfg.clone() }, &data).unwrap();
    let refs: Vec<&suhmo::data::MotionSequence> = val.iter().collect();
    let base_gen =
        suhmo::train::generate_from_refs(&init.generator, &init.params, &refs, 40, 64, 7).unwrap();
    let base_fvd = fvd_like(&val, &base_gen, 40, &ex, 4).unwrap();
    println!("baseline fvd40 {base_fvd:.4}  disp {:.5} (real {:.5})", mean_disp(&base_gen), real_disp);

    let t0 = Instant::now();
    let out = train(&cfg, &data).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("trained {iters} iters in {dt:.1}s ({:.2} s/iter)", dt / iters as f64);
    for row in &out.log {
        println!(
            "iter {:4}  G {:8.4}  D {:8.4}  L2 {:8.5}  fvd40 {:9.4}  tfid {:9.4}",
            row.iter, row.loss_g, row.loss_d, row.loss_l2, row.fvd40, row.tfid
        );
    }

    let gens =
        suhmo::train::generate_from_refs(&out.generator, &out.params, &refs, 40, 64, 7).unwrap();
    let fvd = fvd_like(&val, &gens, 40, &ex, 4).unwrap();

    // prefix-5 seeded rollout: pair val sequences, keep both members
    let mut p5 = Vec::new();
    for i in (0..32).step_by(2) {
        let a = val[i % val.len()].clone();
        let b = val[(i + 1) % val.len()].clone();
        p5.push(suhmo::data::SamplePair::new(a, b).unwrap());
    }
    let rolled = out.generator.rollout(&out.params, &p5, 5, 40, 25.0).unwrap();
    let gen5: Vec<suhmo::data::MotionSequence> =
        rolled.into_iter().flat_map(|p| [p.first, p.second]).collect();
    let fvd5 = fvd_like(&val, &gen5, 40, &ex, 4).unwrap();
    let disp5 = mean_disp(&gen5);
    let (div5, cover5) = diversity(&gen5, 2).unwrap();
    println!(
        "prefix5: fvd40 {fvd5:.4} (ratio {:.2}x)  disp {:.5} ({:.0}% of real)  diversity {div5:.4}  coverage {cover5}",
        base_fvd / fvd5,
        disp5,
        100.0 * disp5 / real_disp
    );
    let disp = mean_disp(&gens);
    let (div, cover) = diversity(&gens, 2).unwrap();
    println!(
        "final: fvd40 {fvd:.4} (ratio {:.2}x)  disp {:.5} ({:.0}% of real)  diversity {div:.4}  coverage {cover}",
        base_fvd / fvd,
        disp,
        100.0 * disp / real_disp
    );
}
