//! Acceptance suite: each test prints one pass/fail line for its criterion
//! (visible with `--nocapture`) and asserts it.
//!
//! Criteria are property-based: gradient fidelity, exact rollout algebra,
//! Fréchet oracles, estimator consistency, determinism, and desk-scale
//! training trends on the synthetic dataset.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use suhmo::autodiff::{grad_check, ParamSet, Primitive, Tape, Tensor};
use suhmo::data::{synth_dataset, MotionSequence, SamplePair, SynthConfig, DEFAULT_FPS};
use suhmo::metrics::{
    diversity, frechet, fvd_like, motion_map, rasterize, sqrtm_spd, GaussianStats,
    SequenceExtractor,
};
use suhmo::model::discriminator::{BaseScorer, DiscConfig};
use suhmo::model::generator::real_kinematic_rows;
use suhmo::model::{all_windows, multiscale_estimate, GenConfig, Generator, PairBatch, Variant};
use suhmo::train::{
    generate_from_refs, hinge_d_loss, hinge_g_loss, train, TrainConfig, TrainOutcome,
};

fn verdict(n: usize, desc: &str, pass: bool) {
    println!("criterion {n:2}: {} -- {desc}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {desc}");
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape)
}

fn mean_disp(seqs: &[MotionSequence]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in seqs {
        for t in 1..s.len() {
            let (a, b) = (s.frame_coords(t - 1), s.frame_coords(t));
            total += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            n += 1;
        }
    }
    total / n.max(1) as f64
}

fn random_pair(rng: &mut ChaCha8Rng, t: usize, k: usize) -> SamplePair {
    let mk = |rng: &mut ChaCha8Rng| {
        let data = (0..t * k * 2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        MotionSequence::new(data, t, k, DEFAULT_FPS)
    };
    SamplePair::new(mk(rng), mk(rng)).unwrap()
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_gradient_fidelity() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = rng.gen_range(1..3usize);
        let m = rng.gen_range(1..4usize);
        let n = rng.gen_range(2..5usize);
        let k = rng.gen_range(1..4usize);

        let mut chk = |params: &ParamSet, f: &dyn for<'t> Fn(&'t Tape, &ParamSet) -> suhmo::autodiff::Var<'t>| {
            worst = worst.max(grad_check(f, params, 1e-5).unwrap());
        };

        let mut p = ParamSet::new();
        p.insert("a", randn(&mut rng, &[m, k]));
        p.insert("b", randn(&mut rng, &[k, n]));
        chk(&p, &|t, p| t.param(p, "a").matmul(t.param(p, "b")).mean());
        chk(&p, &|t, p| t.param(p, "a").matmul(t.param(p, "b")).transpose().sum());

        let mut p = ParamSet::new();
        p.insert("a", randn(&mut rng, &[b, m, k]));
        p.insert("b", randn(&mut rng, &[k, n]));
        chk(&p, &|t, p| t.param(p, "a").matmul(t.param(p, "b")).sum());

        let mut p = ParamSet::new();
        p.insert("a", randn(&mut rng, &[m, n]));
        p.insert("b", randn(&mut rng, &[m, n]));
        p.insert("r", randn(&mut rng, &[n]));
        chk(&p, &|t, p| t.param(p, "a").add(t.param(p, "b")).add(t.param(p, "r")).sum());
        chk(&p, &|t, p| t.param(p, "a").mul(t.param(p, "b")).mean());
        chk(&p, &|t, p| t.param(p, "a").emax(t.param(p, "b")).sum());
        chk(&p, &|t, p| {
            t.apply(Primitive::Concat { axis: 1 }, &[t.param(p, "a"), t.param(p, "b")])
                .unwrap()
                .tanh()
                .mean()
        });
        chk(&p, &|t, p| t.param(p, "a").slice(1, 1, n - 1).sum());
        chk(&p, &|t, p| t.param(p, "a").scale(-1.7).add_scalar(0.3).sigmoid().mean());
        chk(&p, &|t, p| t.param(p, "a").broadcast_batch(3).tanh().sum());
        let w = Tensor::new((0..m * n).map(|j| (j as f64 * 0.7).sin() + 2.0).collect(), &[m, n]);
        let wc = w.clone();
        chk(&p, &move |t, p| t.param(p, "a").softmax().mul(t.constant(wc.clone())).sum());
        let wc = w.clone();
        chk(&p, &move |t, p| t.param(p, "a").layer_norm().mul(t.constant(wc.clone())).sum());

        // full generator + discriminator loss graph on a tiny pair of networks
        for variant in [Variant::Recurrent, Variant::Attention] {
            let gen = Generator::new(GenConfig {
                variant,
                n_landmarks: 1,
                hidden: 2,
                embed: 2,
                head_depth: 1,
                delta_based: false,
                one_sample: false,
            });
            let scorer = BaseScorer::new(
                "disc.m",
                DiscConfig { variant, n_landmarks: 1, embed: 2, scales: vec![2], windows_per_seq: 1 },
            );
            let mut params = gen.init_params(&mut rng);
            scorer.init(&mut params, &mut rng);
            let pair = random_pair(&mut rng, 3, 1);
            let real = random_pair(&mut rng, 3, 1);
            fn gd_loss<'t>(
                t: &'t Tape,
                p: &ParamSet,
                gen: &Generator,
                scorer: &BaseScorer,
                pair: &SamplePair,
                real: &SamplePair,
            ) -> suhmo::autodiff::Var<'t> {
                let prefix = PairBatch::from_pairs(std::slice::from_ref(pair), 1);
                let roll = gen.rollout_graph(t, p, &prefix, 3).unwrap();
                let rows = Generator::kinematic_rows(t, &roll, 0);
                let s_f = scorer.score(t, p, &rows[1..3]).unwrap();
                let real_rows = real_kinematic_rows(t, &[&real.first]);
                let s_r = scorer.score(t, p, &real_rows[1..3]).unwrap();
                let l2 = roll.pos[0]
                    .iter()
                    .chain(roll.pos[1].iter())
                    .map(|x| x.mul(*x).mean())
                    .reduce(|a, b| a.add(b))
                    .unwrap();
                hinge_d_loss(t, &[s_r], &[s_f]).add(hinge_g_loss(&[s_f])).add(l2.scale(0.05))
            }
            // smaller step than for the primitives: layer-norm over tiny
            // widths makes the loss extremely curved, so central-difference
            // truncation error dominates at 1e-5
            worst = worst
                .max(grad_check(|t, p| gd_loss(t, p, &gen, &scorer, &pair, &real), &params, 1e-7).unwrap());
        }
    }

    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        &format!("max FD relative error {worst:.2e} over 100 seeds in {secs:.0}s"),
        worst < 1e-4 && secs < 120.0,
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_rollout_telescoping() {
    let mut failures = 0usize;
    for stub in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(stub);
        let k = rng.gen_range(1..3usize);
        let gen = Generator::new(GenConfig {
            variant: if stub % 2 == 0 { Variant::Recurrent } else { Variant::Attention },
            n_landmarks: k,
            hidden: 2,
            embed: 2,
            head_depth: 1,
            delta_based: false,
            one_sample: false,
        });
        let params = gen.init_params(&mut rng);
        let pair = random_pair(&mut rng, 1, k);
        let t_out = [1usize, 40, 80][(stub % 3) as usize];
        let tape = Tape::new();
        let prefix = PairBatch::from_pairs(std::slice::from_ref(&pair), 1);
        let roll = gen.rollout_graph(&tape, &params, &prefix, t_out).unwrap();
        for m in 0..2 {
            let anchor = roll.pos[m][0].value();
            let mut sum: Option<Vec<f64>> = None;
            for t in 1..t_out {
                let v = roll.vel[m][t].value();
                sum = Some(match sum {
                    None => v.data().to_vec(),
                    Some(s) => s.iter().zip(v.data()).map(|(a, b)| a + b).collect(),
                });
                let expect: Vec<f64> = anchor
                    .data()
                    .iter()
                    .zip(sum.as_ref().unwrap())
                    .map(|(a, s)| a + s)
                    .collect();
                let got = roll.pos[m][t].value();
                if got.data().iter().zip(&expect).any(|(g, e)| g.to_bits() != e.to_bits()) {
                    failures += 1;
                }
            }
        }
    }
    verdict(2, &format!("{failures} bit mismatches over 1000 stub generators, T in {{1,40,80}}"), failures == 0);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_frechet_oracle() {
    use nalgebra::{DMatrix, DVector};

    let g = |mean: &[f64], var: &[f64]| GaussianStats {
        mean: DVector::from_row_slice(mean),
        cov: DMatrix::from_diagonal(&DVector::from_row_slice(var)),
        n: 100,
    };
    let zero = frechet(&g(&[0.3, -0.2], &[0.5, 1.3]), &g(&[0.3, -0.2], &[0.5, 1.3])).unwrap();
    let one = frechet(&g(&[0.0], &[1.0]), &g(&[1.0], &[1.0])).unwrap();
    let two = frechet(&g(&[0.0, 0.0], &[1.0, 1.0]), &g(&[1.0, 1.0], &[1.0, 1.0])).unwrap();
    let closed = zero.abs() < 1e-6 && (one - 1.0).abs() < 1e-6 && (two - 2.0).abs() < 1e-6;

    let mut max_resid = 0.0f64;
    let d = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut spd = || {
            let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0f64));
            &m * m.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
        };
        let (a, b) = (spd(), spd());
        for mat in [&a, &b] {
            let s = sqrtm_spd(mat).unwrap();
            max_resid = max_resid.max((&s * &s - mat).amax());
        }
        // the inner product matrix that frechet() takes a root of
        let sa = sqrtm_spd(&a).unwrap();
        let inner = &sa * &b * &sa;
        let inner = (&inner + inner.transpose()) * 0.5;
        let s = sqrtm_spd(&inner).unwrap();
        max_resid = max_resid.max((&s * &s - &inner).amax());
    }
    verdict(
        3,
        &format!("closed forms ok={closed}, max sqrtm residual {max_resid:.2e} (d=64, 100 pairs)"),
        closed && max_resid < 1e-6,
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_multiscale_estimator() {
    // fixed ramp over x, window score = mean x over the window
    let t_len = 12;
    let data: Vec<f64> = (0..t_len).flat_map(|t| [t as f64 * 0.1 - 0.6, 0.0]).collect();
    let seq = MotionSequence::new(data, t_len, 1, DEFAULT_FPS);
    let score = |w: suhmo::model::discriminator::WindowSpec| {
        (w.start..w.start + w.len).map(|t| seq.frame_coords(t)[0]).sum::<f64>() / w.len as f64
    };

    let scales = [2usize, 4];
    // sampling is scale-uniform then start-uniform, so the exhaustive mean and
    // variance average per-scale first
    let (mut e1, mut e2) = (0.0, 0.0);
    for &s in &scales {
        let per: Vec<f64> =
            all_windows(t_len, &[s]).into_iter().map(score).collect();
        e1 += per.iter().sum::<f64>() / per.len() as f64 / scales.len() as f64;
        e2 += per.iter().map(|v| v * v).sum::<f64>() / per.len() as f64 / scales.len() as f64;
    }
    let sigma = ((e2 - e1 * e1) / 1e4).sqrt();

    let mc = multiscale_estimate(t_len, &scales, 10_000, 42, score).unwrap();
    verdict(
        4,
        &format!("MC {mc:.6} vs exhaustive {e1:.6}, sigma {sigma:.2e}"),
        (mc - e1).abs() <= 3.0 * sigma,
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_motion_map_closed_forms() {
    let frame_a = vec![-0.5, -0.5];
    let frame_b = vec![0.5, 0.5];

    // alpha = 1: only the last frame survives
    let seq = MotionSequence::new([frame_a.clone(), frame_b.clone()].concat(), 2, 1, DEFAULT_FPS);
    let map = motion_map(&seq, 1.0).unwrap();
    let last = rasterize(&frame_b);
    let alpha1 = map.pixels.iter().zip(&last.pixels).all(|(a, b)| (a - b).abs() < 1e-6);

    // static sequence: the map is the frame's raster at any alpha
    let stat = MotionSequence::new(frame_a.repeat(5), 5, 1, DEFAULT_FPS);
    let map = motion_map(&stat, 0.15).unwrap();
    let still = rasterize(&frame_a);
    let static_id = map.pixels.iter().zip(&still.pixels).all(|(a, b)| (a - b).abs() < 1e-6);

    // T = 2, alpha = 0.5: weights (1-alpha, 1) normalize to (1/3, 2/3)
    let map = motion_map(&seq, 0.5).unwrap();
    let ra = rasterize(&frame_a);
    let rb = rasterize(&frame_b);
    let impulse = map.pixels.iter().enumerate().all(|(i, &v)| {
        let expect = (ra.pixels[i] + 2.0 * rb.pixels[i]) / 3.0;
        (v - expect).abs() < 1e-6
    });

    verdict(
        5,
        &format!("alpha=1 last-frame {alpha1}, static identity {static_id}, T=2 impulse {impulse}"),
        alpha1 && static_id && impulse,
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_pair_symmetry() {
    let mut all_exact = true;
    for (i, variant) in [Variant::Recurrent, Variant::Attention].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21 + i as u64);

        // joint scorer invariant under member swap
        let scorer = BaseScorer::new("disc.joint", DiscConfig::desk(*variant, 2));
        let mut params = ParamSet::new();
        scorer.init(&mut params, &mut rng);
        let pair = random_pair(&mut rng, 8, 2);
        let tape = Tape::new();
        let a = real_kinematic_rows(&tape, &[&pair.first]);
        let b = real_kinematic_rows(&tape, &[&pair.second]);
        let ab = scorer.score_joint(&tape, &params, &a, &b).unwrap().item();
        let ba = scorer.score_joint(&tape, &params, &b, &a).unwrap().item();
        all_exact &= ab.to_bits() == ba.to_bits();

        // generator rollout equivariant under pair swap
        let gen = Generator::new(GenConfig::desk(*variant, 2));
        let gp = gen.init_params(&mut rng);
        let pair = random_pair(&mut rng, 4, 2);
        let out = &gen.rollout(&gp, &[pair.clone()], 2, 10, DEFAULT_FPS).unwrap()[0];
        let out_sw = &gen.rollout(&gp, &[pair.swapped()], 2, 10, DEFAULT_FPS).unwrap()[0];
        all_exact &= out.first.data() == out_sw.second.data()
            && out.second.data() == out_sw.first.data();
    }
    verdict(6, "joint-score swap invariance and rollout swap equivariance, both variants", all_exact);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_determinism() {
    let data: Vec<MotionSequence> = synth_dataset(&SynthConfig {
        n_sequences: 24,
        t: 12,
        k: 2,
        ..SynthConfig::desk(5)
    })
    .into_iter()
    .map(|(s, _)| s)
    .collect();
    let cfg = TrainConfig {
        batch: 4,
        seq_len: 12,
        hidden: 8,
        embed: 8,
        disc_embed: 8,
        scales: vec![4, 8],
        max_iters: 6,
        eval_interval: 3,
        prefix_max: 3,
        ..TrainConfig::desk(Variant::Recurrent, 9)
    };
    let run = |cfg: &TrainConfig| train(cfg, &data).unwrap();
    let (a, b) = (run(&cfg), run(&cfg));
    let meta = serde_json::json!({"v": 1});
    let ck_same = suhmo::checkpoint::encode(&meta, &a.params)
        == suhmo::checkpoint::encode(&meta, &b.params);
    let log_same = a.log.len() == b.log.len()
        && a.log.iter().zip(&b.log).all(|(x, y)| x.to_csv() == y.to_csv());

    let ex = SequenceExtractor::new(2, 3, 8);
    let (real, fake) = (&data[..12].to_vec(), &data[12..].to_vec());
    let f1 = fvd_like(real, fake, 8, &ex, 1).unwrap();
    let f4 = fvd_like(real, fake, 8, &ex, 4).unwrap();
    let threads_same = f1.to_bits() == f4.to_bits();

    verdict(
        7,
        &format!("checkpoint bytes {ck_same}, metric log {log_same}, 1 vs 4 threads {threads_same}"),
        ck_same && log_same && threads_same,
    );
}

// ------------------------------------------------------- criteria 8 and 9

fn desk_data() -> &'static Vec<MotionSequence> {
    static DATA: OnceLock<Vec<MotionSequence>> = OnceLock::new();
    DATA.get_or_init(|| {
        synth_dataset(&SynthConfig::desk(100)).into_iter().map(|(s, _)| s).collect()
    })
}

fn val_refs(data: &[MotionSequence]) -> Vec<&MotionSequence> {
    data.iter().enumerate().filter(|(i, _)| suhmo::train::is_val_index(*i)).map(|(_, s)| s).collect()
}

fn desk_rnn_seed1() -> &'static TrainOutcome {
    static MODEL: OnceLock<TrainOutcome> = OnceLock::new();
    MODEL.get_or_init(|| train(&TrainConfig::desk(Variant::Recurrent, 1), desk_data()).unwrap())
}

struct DeskRun {
    fvd: f64,
    base_fvd: f64,
    disp_frac: f64,
    coverage: usize,
    diversity: f64,
}

fn desk_run(outcome: &TrainOutcome, cfg: &TrainConfig) -> DeskRun {
    let data = desk_data();
    let refs = val_refs(data);
    let val: Vec<MotionSequence> = refs.iter().map(|s| (*s).clone()).collect();
    let ex = SequenceExtractor::new(5, 999, 8);
    let real_disp = mean_disp(&val);

    let base = train(&TrainConfig { max_iters: 0, ..cfg.clone() }, data).unwrap();
    let base_gen = generate_from_refs(&base.generator, &base.params, &refs, 40, 64, 7).unwrap();
    let base_fvd = fvd_like(&val, &base_gen, 40, &ex, 1).unwrap();

    let gens = generate_from_refs(&outcome.generator, &outcome.params, &refs, 40, 64, 7).unwrap();
    let fvd = fvd_like(&val, &gens, 40, &ex, 1).unwrap();
    let (diversity, coverage) = diversity(&gens, 2).unwrap();
    DeskRun { fvd, base_fvd, disp_frac: mean_disp(&gens) / real_disp, coverage, diversity }
}

#[test]
fn criterion_8_desk_training() {
    let t0 = Instant::now();
    let mut all_pass = true;
    let mut summary = String::new();

    for variant in [Variant::Recurrent, Variant::Attention] {
        for seed in [1u64, 2, 3] {
            let cfg = TrainConfig::desk(variant, seed);
            let fresh;
            let outcome = if variant == Variant::Recurrent && seed == 1 {
                desk_rnn_seed1()
            } else {
                fresh = train(&cfg, desk_data()).unwrap();
                &fresh
            };
            let r = desk_run(outcome, &cfg);
            let ok = r.disp_frac >= 0.25 && r.base_fvd / r.fvd >= 5.0 && r.coverage == 2;
            all_pass &= ok;
            summary.push_str(&format!(
                "\n  {variant:?} seed {seed}: fvd {:.3} (base {:.3}, {:.1}x) disp {:.0}% coverage {}",
                r.fvd,
                r.base_fvd,
                r.base_fvd / r.fvd,
                100.0 * r.disp_frac,
                r.coverage
            ));
        }
    }

    // one-sample-G ablation reported alongside (expected: full >= ablation)
    let abl_cfg =
        TrainConfig { one_sample_g: true, ..TrainConfig::desk(Variant::Recurrent, 1) };
    let abl = desk_run(&train(&abl_cfg, desk_data()).unwrap(), &abl_cfg);
    let full = desk_run(desk_rnn_seed1(), &TrainConfig::desk(Variant::Recurrent, 1));
    summary.push_str(&format!(
        "\n  one_sample_G ablation: coverage {} diversity {:.3} (full: coverage {} diversity {:.3})",
        abl.coverage, abl.diversity, full.coverage, full.diversity
    ));

    let mins = t0.elapsed().as_secs_f64() / 60.0;
    verdict(
        8,
        &format!("3 seeds x 2 variants in {mins:.1} min{summary}"),
        all_pass && mins < 30.0,
    );
}

#[test]
fn criterion_9_long_horizon_stability() {
    let out = desk_rnn_seed1();
    let data = desk_data();
    let refs = val_refs(data);
    let val: Vec<MotionSequence> = refs.iter().map(|s| (*s).clone()).collect();
    let ex = SequenceExtractor::new(5, 999, 8);

    let gens = generate_from_refs(&out.generator, &out.params, &refs, 80, 64, 7).unwrap();
    let head: Vec<MotionSequence> = gens.iter().map(|s| s.window(0, 40)).collect();
    let tail: Vec<MotionSequence> = gens.iter().map(|s| s.window(40, 40)).collect();
    let f_head = fvd_like(&val, &head, 40, &ex, 1).unwrap();
    let f_tail = fvd_like(&val, &tail, 40, &ex, 1).unwrap();

    let bounded = gens
        .iter()
        .all(|s| s.data().iter().all(|&c| (-1.5..=1.5).contains(&c)));

    verdict(
        9,
        &format!("fvd frames 1-40 {f_head:.3}, frames 41-80 {f_tail:.3}, coords bounded {bounded}"),
        f_tail <= 3.0 * f_head && bounded,
    );
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_end_to_end_pipeline() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let bin = env!("CARGO_BIN_EXE_suhmo");
    let run = |args: &[&str]| Command::new(bin).args(args).status().unwrap().success();

    let ok = run(&["synth-data", "--out", &p("data"), "--n", "64", "--seed", "4"])
        && run(&[
            "train",
            "--data",
            &p("data/manifest.json"),
            "--out",
            &p("run"),
            "--preset",
            "desk",
            "--iters",
            "20",
            "--seed",
            "4",
        ])
        && run(&[
            "generate",
            "--checkpoint",
            &p("run/checkpoint.suhm"),
            "--ref",
            &p("data/seq_0007.lmk"),
            "--length",
            "80",
            "--n",
            "4",
            "--out",
            &p("gen"),
        ])
        && run(&[
            "eval",
            "--real",
            &p("data"),
            "--fake",
            &p("gen"),
            "--metrics",
            "fvd40,tfid,diversity",
            "--out",
            &p("report.json"),
        ])
        && run(&["render", "--input", &p("gen/gen_000.lmk"), "--out", &p("maps"), "--motion-map"]);

    let report_exists = dir.path().join("report.json").exists();
    verdict(10, &format!("pipeline exit codes ok={ok}, report written={report_exists}"), ok && report_exists);
}
