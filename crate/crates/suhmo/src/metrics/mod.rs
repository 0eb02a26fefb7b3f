//! Evaluation: rasterization, motion maps, Fréchet-style metrics over frozen
//! random-feature extractors, and diversity / mode-coverage measures.
//!
//! Absolute metric values are only meaningful relative to each other (same
//! extractor seed); they are discrepancy measures, not calibrated scores.

mod extractor;
mod frechet;

pub use extractor::{FeatureExtractor, FrameExtractor, SequenceExtractor};
pub use frechet::{feature_stats, frechet, sqrtm_spd, GaussianStats};

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{classify_mode, MotionSequence};
use crate::error::{Result, SuhmoError};

/// Canvas side for rasterized frames and motion maps.
pub const CANVAS: usize = 64;
/// Landmark disc radius in pixels.
pub const DISC_RADIUS: f64 = 1.0;
/// Default EMA weight for motion maps.
pub const DEFAULT_ALPHA: f64 = 0.15;
/// Metrics are computed over this many trailing frames by default.
pub const EVAL_TAIL: usize = 40;

/// Grayscale image with intensities in [0, 1]. Used both for single-frame
/// rasters and for motion maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub pixels: Vec<f64>,
    pub h: usize,
    pub w: usize,
}

impl Raster {
    pub fn zeros(h: usize, w: usize) -> Self {
        Raster { pixels: vec![0.0; h * w], h, w }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.w + col]
    }

    /// Write as a binary PGM (P5) image, 8-bit.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = format!("P5\n{} {}\n255\n", self.w, self.h).into_bytes();
        buf.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }
}

/// Splat each landmark as a filled disc of radius [`DISC_RADIUS`] onto a
/// CANVAS x CANVAS image; [-1, 1]^2 maps linearly onto the canvas and
/// out-of-range landmarks are clipped at the border.
pub fn rasterize(coords: &[f64]) -> Raster {
    let mut img = Raster::zeros(CANVAS, CANVAS);
    let side = CANVAS as f64;
    for p in coords.chunks_exact(2) {
        let cx = (p[0] + 1.0) * 0.5 * side;
        let cy = (p[1] + 1.0) * 0.5 * side;
        let lo = |c: f64| ((c - DISC_RADIUS).floor().max(0.0)) as usize;
        let hi = |c: f64| ((c + DISC_RADIUS).ceil().min(side - 1.0)).max(0.0) as usize;
        for row in lo(cy)..=hi(cy) {
            for col in lo(cx)..=hi(cx) {
                let d2 = (row as f64 - cy).powi(2) + (col as f64 - cx).powi(2);
                if d2 <= DISC_RADIUS * DISC_RADIUS {
                    img.pixels[row * CANVAS + col] = 1.0;
                }
            }
        }
    }
    img
}

/// Exponential-moving-average image over the sequence, weighted toward the
/// last frame: m = sum_t w_t I_t / sum_t w_t with w_t = (1 - alpha)^(T - t).
pub fn motion_map(seq: &MotionSequence, alpha: f64) -> Result<Raster> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SuhmoError::Invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let t_len = seq.len();
    let mut acc = Raster::zeros(CANVAS, CANVAS);
    let mut norm = 0.0;
    for t in 0..t_len {
        let w = (1.0 - alpha).powi((t_len - 1 - t) as i32);
        if w == 0.0 {
            continue;
        }
        let img = rasterize(seq.frame_coords(t));
        for (a, &v) in acc.pixels.iter_mut().zip(&img.pixels) {
            *a += w * v;
        }
        norm += w;
    }
    for a in acc.pixels.iter_mut() {
        *a /= norm;
    }
    Ok(acc)
}

/// Run `f` over `items` with up to `threads` workers; the output order always
/// matches the input order, so results are thread-count independent.
pub fn parallel_map<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let mut out: Vec<Option<U>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        for (inp, slot) in items.chunks(chunk).zip(out.chunks_mut(chunk)) {
            let f = &f;
            s.spawn(move || {
                for (x, y) in inp.iter().zip(slot.iter_mut()) {
                    *y = Some(f(x));
                }
            });
        }
    });
    out.into_iter().map(|v| v.unwrap()).collect()
}

fn tail_refs(seqs: &[MotionSequence]) -> Vec<MotionSequence> {
    seqs.iter().map(|s| s.tail(EVAL_TAIL)).collect()
}

/// Fréchet distance between sequence-extractor statistics over all length-`l`
/// windows (stride l/2) of the two populations.
pub fn fvd_like(
    real: &[MotionSequence],
    fake: &[MotionSequence],
    l: usize,
    ex: &SequenceExtractor,
    threads: usize,
) -> Result<f64> {
    let stats = |set: &[MotionSequence]| -> Result<GaussianStats> {
        let mut windows = Vec::new();
        for s in set {
            if s.len() < l {
                return Err(SuhmoError::Invalid(format!(
                    "sequence of length {} shorter than metric window {l}",
                    s.len()
                )));
            }
            let stride = (l / 2).max(1);
            let mut start = 0;
            while start + l <= s.len() {
                windows.push(s.window(start, l));
                start += stride;
            }
        }
        let feats = parallel_map(&windows, threads, |w| ex.features(w));
        feature_stats(&feats)
    };
    Ok(frechet(&stats(&tail_refs(real))?, &stats(&tail_refs(fake))?)?)
}

/// Fréchet distance between frame-extractor statistics of motion maps,
/// computed over the trailing [`EVAL_TAIL`] frames of each sequence.
pub fn tfid(
    real: &[MotionSequence],
    fake: &[MotionSequence],
    alpha: f64,
    ex: &FrameExtractor,
    threads: usize,
) -> Result<f64> {
    let stats = |set: &[MotionSequence]| -> Result<GaussianStats> {
        let maps = parallel_map(set, threads, |s| {
            motion_map(s, alpha).map(|m| ex.features(&m.pixels))
        });
        let feats = maps.into_iter().collect::<Result<Vec<_>>>()?;
        feature_stats(&feats)
    };
    Ok(frechet(&stats(&tail_refs(real))?, &stats(&tail_refs(fake))?)?)
}

/// FID-analog over individual rasterized frames of the evaluation tail.
pub fn fid_like(
    real: &[MotionSequence],
    fake: &[MotionSequence],
    ex: &FrameExtractor,
    threads: usize,
) -> Result<f64> {
    let stats = |set: &[MotionSequence]| -> Result<GaussianStats> {
        let frames: Vec<Vec<f64>> = tail_refs(set)
            .iter()
            .flat_map(|s| (0..s.len()).map(|t| s.frame_coords(t).to_vec()).collect::<Vec<_>>())
            .collect();
        let feats = parallel_map(&frames, threads, |c| ex.features(&rasterize(c).pixels));
        feature_stats(&feats)
    };
    Ok(frechet(&stats(real)?, &stats(fake)?)?)
}

/// Mean pairwise L2 distance between sequences plus the number of distinct
/// synthetic modes hit according to the frequency oracle.
pub fn diversity(seqs: &[MotionSequence], n_modes: usize) -> Result<(f64, usize)> {
    if seqs.len() < 2 {
        return Err(SuhmoError::Invalid("diversity needs at least 2 sequences".into()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            let (a, b) = (seqs[i].data(), seqs[j].data());
            let n = a.len().min(b.len());
            let d2: f64 = (0..n).map(|k| (a[k] - b[k]).powi(2)).sum();
            total += d2.sqrt();
            pairs += 1;
        }
    }
    let mut hit = vec![false; n_modes];
    for s in seqs {
        hit[classify_mode(s, n_modes)] = true;
    }
    Ok((total / pairs as f64, hit.iter().filter(|h| **h).count()))
}

/// One metric result as written into evaluation reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub value: f64,
    pub n_real: usize,
    pub n_fake: usize,
    pub extractor_seed: u64,
}
