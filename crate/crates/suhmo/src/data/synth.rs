//! Synthetic multi-modal landmark dataset: a fixed face template under a
//! smooth rigid trajectory whose oscillation frequency band is selected by
//! the mode label.

use std::f64::consts::PI;

use rand::Rng;

use super::{kinematics, MotionSequence};
use crate::rng;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_sequences: usize,
    pub t: usize,
    pub k: usize,
    pub n_modes: usize,
    pub seed: u64,
    /// Rotation amplitude in radians.
    pub rot_amp: f64,
    /// Translation amplitude per axis.
    pub trans_amp: f64,
    /// Relative scale oscillation amplitude.
    pub scale_amp: f64,
    pub fps: f32,
}

impl SynthConfig {
    pub fn desk(seed: u64) -> Self {
        SynthConfig {
            n_sequences: 256,
            t: 40,
            k: 5,
            n_modes: 2,
            seed,
            rot_amp: 0.3,
            trans_amp: 0.25,
            scale_amp: 0.1,
            fps: 25.0,
        }
    }

    pub fn static_modes(seed: u64) -> Self {
        SynthConfig { rot_amp: 0.0, trans_amp: 0.0, scale_amp: 0.0, ..SynthConfig::desk(seed) }
    }
}

/// Frequency band of mode `m`, in cycles per frame.
fn mode_band(m: usize) -> (f64, f64) {
    let lo = 0.05 + 0.08 * m as f64;
    (lo, lo + 0.015)
}

pub fn mode_band_center(m: usize) -> f64 {
    let (lo, hi) = mode_band(m);
    0.5 * (lo + hi)
}

/// Fixed K-point face template centered on the origin. Slightly asymmetric so
/// horizontal flips are visible.
fn template(k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / k as f64;
            (0.3 * a.cos() + 0.03 * (3.0 * a).sin(), 0.4 * a.sin())
        })
        .collect()
}

/// Deterministic in seed; mode labels are balanced (`i % n_modes`).
pub fn synth_dataset(cfg: &SynthConfig) -> Vec<(MotionSequence, usize)> {
    assert!(cfg.n_modes >= 1, "n_modes >= 1 required");
    let tmpl = template(cfg.k);
    (0..cfg.n_sequences)
        .map(|i| {
            let mode = i % cfg.n_modes;
            let mut rng = rng::substream(cfg.seed, "synth", i as u64);
            let (lo, hi) = mode_band(mode);
            let f = rng.gen_range(lo..hi);
            // one shared phase per sequence, with fixed per-channel offsets:
            // the first frame then nearly determines the whole trajectory, so
            // desk-scale models can actually learn the continuation
            let phase = rng.gen_range(0.0..2.0 * PI);
            let phase_rot = phase;
            let phase_tx = phase + 0.5 * PI;
            let phase_ty = phase + PI;
            let phase_s = phase + 1.5 * PI;
            let mut data = Vec::with_capacity(cfg.t * cfg.k * 2);
            for t in 0..cfg.t {
                let w = 2.0 * PI * f * t as f64;
                let theta = cfg.rot_amp * (w + phase_rot).sin();
                let tx = cfg.trans_amp * (w + phase_tx).sin();
                let ty = cfg.trans_amp * (w + phase_ty).sin();
                let s = 1.0 + cfg.scale_amp * (w + phase_s).sin();
                let (ct, st) = (theta.cos(), theta.sin());
                for &(px, py) in &tmpl {
                    data.push(s * (ct * px - st * py) + tx);
                    data.push(s * (st * px + ct * py) + ty);
                }
            }
            (MotionSequence::new(data, cfg.t, cfg.k, cfg.fps), mode)
        })
        .collect()
}

/// Frequency oracle: peak of the discrete spectrum of the mean landmark
/// velocity, assigned to the nearest mode band center.
pub fn classify_mode(seq: &MotionSequence, n_modes: usize) -> usize {
    assert!(n_modes >= 1);
    let kin = kinematics(seq);
    let (t, k) = (seq.len(), seq.n_landmarks());
    if t < 3 || n_modes == 1 {
        return 0;
    }
    // mean velocity per frame, skipping the v[0] = 0 boundary sample
    let n = t - 1;
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    for ti in 1..t {
        for ki in 0..k {
            let (x, y) = kin.velocity(ti, ki);
            vx[ti - 1] += x / k as f64;
            vy[ti - 1] += y / k as f64;
        }
    }
    // naive DFT; n is tiny
    let mut best_bin = 1usize;
    let mut best_power = f64::NEG_INFINITY;
    for bin in 1..=n / 2 {
        let mut p = 0.0;
        for signal in [&vx, &vy] {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in signal.iter().enumerate() {
                let a = 2.0 * PI * bin as f64 * j as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            p += re * re + im * im;
        }
        if p > best_power {
            best_power = p;
            best_bin = bin;
        }
    }
    let f_peak = best_bin as f64 / n as f64;
    (0..n_modes)
        .min_by(|&a, &b| {
            let da = (f_peak - mode_band_center(a)).abs();
            let db = (f_peak - mode_band_center(b)).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap()
}
