//! Landmark sequences, kinematic features, reference-pose augmentation and
//! pairing.

mod lmk;
mod synth;

pub use lmk::{decode_lmk, encode_lmk, load_manifest, load_sequence, save_manifest, save_sequence,
              ManifestEntry};
pub use synth::{classify_mode, mode_band_center, synth_dataset, SynthConfig};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SuhmoError};
use crate::rng;

pub const DEFAULT_FPS: f32 = 25.0;
/// Slack beyond the [-1, 1] canvas tolerated for generated drift.
pub const COORD_SLACK: f64 = 1.5;
/// Input gains applied to velocity / acceleration channels wherever
/// kinematic rows feed a network: per-frame motion is one to two orders of
/// magnitude smaller than positions, and without the gains both the
/// discriminators and the frozen feature extractors are effectively blind
/// to dynamics.
pub const VEL_GAIN: f64 = 10.0;
pub const ACC_GAIN: f64 = 30.0;

/// K landmarks in normalized canvas coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkFrame {
    coords: Vec<f64>, // K * 2, (x, y) interleaved
}

impl LandmarkFrame {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(coords.len() % 2 == 0);
        LandmarkFrame { coords }
    }

    pub fn n_landmarks(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.coords[2 * k], self.coords[2 * k + 1])
    }

    pub fn centroid(&self) -> (f64, f64) {
        let k = self.n_landmarks() as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for p in self.coords.chunks_exact(2) {
            cx += p[0];
            cy += p[1];
        }
        (cx / k, cy / k)
    }
}

/// T frames of K 2-D landmark positions.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    data: Vec<f64>, // T * K * 2 in (t, k, xy) order
    t: usize,
    k: usize,
    pub fps: f32,
}

impl MotionSequence {
    pub fn new(data: Vec<f64>, t: usize, k: usize, fps: f32) -> Self {
        assert!(t >= 1, "T >= 1 required");
        assert_eq!(data.len(), t * k * 2);
        MotionSequence { data, t, k, fps }
    }

    pub fn from_frames(frames: &[LandmarkFrame], fps: f32) -> Self {
        let k = frames[0].n_landmarks();
        let mut data = Vec::with_capacity(frames.len() * k * 2);
        for f in frames {
            assert_eq!(f.n_landmarks(), k, "constant K across frames");
            data.extend_from_slice(f.coords());
        }
        MotionSequence::new(data, frames.len(), k, fps)
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn n_landmarks(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> LandmarkFrame {
        let s = t * self.k * 2;
        LandmarkFrame::new(self.data[s..s + self.k * 2].to_vec())
    }

    pub fn frame_coords(&self, t: usize) -> &[f64] {
        &self.data[t * self.k * 2..(t + 1) * self.k * 2]
    }

    /// Last `n` frames as a new sequence.
    pub fn tail(&self, n: usize) -> MotionSequence {
        let n = n.min(self.t);
        let s = (self.t - n) * self.k * 2;
        MotionSequence::new(self.data[s..].to_vec(), n, self.k, self.fps)
    }

    pub fn window(&self, start: usize, len: usize) -> MotionSequence {
        assert!(start + len <= self.t);
        let s = start * self.k * 2;
        MotionSequence::new(self.data[s..s + len * self.k * 2].to_vec(), len, self.k, self.fps)
    }
}

/// Two sequences generated or drawn together.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub first: MotionSequence,
    pub second: MotionSequence,
}

impl SamplePair {
    pub fn new(first: MotionSequence, second: MotionSequence) -> Result<Self> {
        if first.len() != second.len() || first.n_landmarks() != second.n_landmarks() {
            return Err(SuhmoError::Invalid(format!(
                "pair members must match: ({}, {}) vs ({}, {})",
                first.len(),
                first.n_landmarks(),
                second.len(),
                second.n_landmarks()
            )));
        }
        Ok(SamplePair { first, second })
    }

    pub fn swapped(&self) -> SamplePair {
        SamplePair { first: self.second.clone(), second: self.first.clone() }
    }
}

/// Per-timestep concatenation of positions, velocities and accelerations.
/// Row layout per timestep: positions (2K) | velocities (2K) | accelerations (2K).
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicTensor {
    data: Vec<f64>, // T x (K * 6)
    t: usize,
    k: usize,
}

impl KinematicTensor {
    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn n_landmarks(&self) -> usize {
        self.k
    }

    pub fn row_dim(&self) -> usize {
        self.k * 6
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Full kinematic row at timestep `t` (dim 6K).
    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.row_dim();
        &self.data[t * d..(t + 1) * d]
    }

    /// Positions-and-velocities part of the row (dim 4K), the generator input.
    pub fn row_pos_vel(&self, t: usize) -> &[f64] {
        let d = self.row_dim();
        &self.data[t * d..t * d + self.k * 4]
    }

    pub fn velocity(&self, t: usize, k: usize) -> (f64, f64) {
        let d = self.row_dim();
        let o = t * d + self.k * 2 + 2 * k;
        (self.data[o], self.data[o + 1])
    }
}

/// First and second differences with boundary convention
/// v[0] = 0, a[0] = a[1] = 0.
pub fn kinematics(seq: &MotionSequence) -> KinematicTensor {
    let (t, k) = (seq.len(), seq.n_landmarks());
    let w = k * 2;
    let mut data = vec![0.0; t * k * 6];
    for ti in 0..t {
        let row = &mut data[ti * k * 6..(ti + 1) * k * 6];
        row[..w].copy_from_slice(seq.frame_coords(ti));
    }
    for ti in 1..t {
        for j in 0..w {
            let v = seq.frame_coords(ti)[j] - seq.frame_coords(ti - 1)[j];
            data[ti * k * 6 + w + j] = v;
        }
    }
    for ti in 2..t {
        for j in 0..w {
            let a = data[ti * k * 6 + w + j] - data[(ti - 1) * k * 6 + w + j];
            data[ti * k * 6 + 2 * w + j] = a;
        }
    }
    KinematicTensor { data, t, k }
}

/// Deterministic affine transform: optional horizontal flip about the canvas
/// center, uniform scale about the landmark centroid, then translation.
pub fn apply_affine(frame: &LandmarkFrame, flip: bool, scale: f64, shift: (f64, f64)) -> LandmarkFrame {
    let flipped = if flip {
        LandmarkFrame::new(
            frame
                .coords()
                .chunks_exact(2)
                .flat_map(|p| [-p[0], p[1]])
                .collect(),
        )
    } else {
        frame.clone()
    };
    let (cx, cy) = flipped.centroid();
    // x + (s-1)(x-c) form keeps scale = 1, shift = 0 an exact identity
    let coords = flipped
        .coords()
        .chunks_exact(2)
        .flat_map(|p| {
            [
                p[0] + (scale - 1.0) * (p[0] - cx) + shift.0,
                p[1] + (scale - 1.0) * (p[1] - cy) + shift.1,
            ]
        })
        .collect();
    LandmarkFrame::new(coords)
}

/// Random flip (p = 0.5), uniform scale in [0.9, 1.1] and per-axis translation
/// in [-0.1, 0.1]; deterministic in `seed`.
pub fn augment_reference(frame: &LandmarkFrame, seed: u64) -> LandmarkFrame {
    augment_with(frame, &mut rng::stream(seed, "augment"))
}

pub fn augment_with(frame: &LandmarkFrame, rng: &mut ChaCha8Rng) -> LandmarkFrame {
    let flip = rng.gen::<f64>() < 0.5;
    let scale = rng.gen_range(0.9..=1.1);
    let shift = (rng.gen_range(-0.1..=0.1), rng.gen_range(-0.1..=0.1));
    apply_affine(frame, flip, scale, shift)
}

/// Random disjoint pairing of distinct dataset indices. An odd trailing item
/// is left unpaired for this shuffle.
pub fn pair_indices(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(SuhmoError::Invalid(format!("pairing requires >= 2 sequences, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Ok(idx.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Materialized pairs over a dataset, reshuffled per call; deterministic in seed.
pub fn make_pairs(dataset: &[MotionSequence], seed: u64) -> Result<Vec<SamplePair>> {
    let mut rng = rng::stream(seed, "pairs");
    pair_indices(dataset.len(), &mut rng)?
        .into_iter()
        .map(|(a, b)| SamplePair::new(dataset[a].clone(), dataset[b].clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn ramp_seq(t: usize, k: usize, c: f64) -> MotionSequence {
        let mut data = Vec::new();
        for ti in 0..t {
            for _ in 0..k {
                data.extend_from_slice(&[c * ti as f64, 0.1]);
            }
        }
        MotionSequence::new(data, t, k, DEFAULT_FPS)
    }

    #[test]
    fn kinematics_constant_sequence_is_still() {
        let seq = MotionSequence::new(vec![0.3; 4 * 2 * 2], 4, 2, DEFAULT_FPS);
        let kin = kinematics(&seq);
        for t in 0..4 {
            let row = kin.row(t);
            assert!(row[4..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn kinematics_linear_motion() {
        let seq = ramp_seq(5, 1, 0.25);
        let kin = kinematics(&seq);
        assert_eq!(kin.velocity(0, 0), (0.0, 0.0));
        for t in 1..5 {
            assert_eq!(kin.velocity(t, 0), (0.25, 0.0));
        }
        // acceleration column all zero for t >= 2 (and by convention before)
        for t in 0..5 {
            assert!(kin.row(t)[4..6].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn kinematics_quadratic_acceleration() {
        // x = t^2 on one coordinate: second difference is 2 for t >= 2
        let data: Vec<f64> = (0..6).flat_map(|t| [(t * t) as f64 * 0.01, 0.0]).collect();
        let seq = MotionSequence::new(data, 6, 1, DEFAULT_FPS);
        let kin = kinematics(&seq);
        assert_eq!(kin.row(0)[4], 0.0);
        assert_eq!(kin.row(1)[4], 0.0);
        for t in 2..6 {
            assert!((kin.row(t)[4] - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_cumsum_reconstructs_positions() {
        let ds = synth_dataset(&SynthConfig { n_sequences: 3, ..SynthConfig::desk(11) });
        for (seq, _) in &ds {
            let kin = kinematics(seq);
            let k2 = seq.n_landmarks() * 2;
            let mut pos = seq.frame_coords(0).to_vec();
            for t in 1..seq.len() {
                for j in 0..k2 {
                    pos[j] += kin.row(t)[k2 + j];
                }
                for j in 0..k2 {
                    // a + fl(b - a) = b is not an IEEE identity; allow ulp noise
                    assert!((pos[j] - seq.frame_coords(t)[j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn affine_identity() {
        let f = LandmarkFrame::new(vec![0.1, 0.2, -0.3, 0.4]);
        assert_eq!(apply_affine(&f, false, 1.0, (0.0, 0.0)), f);
    }

    #[test]
    fn affine_flip_negates_x() {
        let f = LandmarkFrame::new(vec![0.1, 0.2, -0.3, 0.4]);
        let g = apply_affine(&f, true, 1.0, (0.0, 0.0));
        assert_eq!(g.coords(), &[-0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn affine_composed_matches_hand_computation() {
        // flip + scale 1.1 + shift (0.05, 0) on a 3-point frame
        let f = LandmarkFrame::new(vec![0.0, 0.0, 0.2, 0.1, -0.1, 0.3]);
        let g = apply_affine(&f, true, 1.1, (0.05, 0.0));
        // after flip: (0,0), (-0.2,0.1), (0.1,0.3); centroid (-0.1/3, 0.4/3)
        let (cx, cy) = (-0.1 / 3.0, 0.4 / 3.0);
        let expect = |x: f64, y: f64| (cx + 1.1 * (x - cx) + 0.05, cy + 1.1 * (y - cy));
        for (k, (x, y)) in [(0.0, 0.0), (-0.2, 0.1), (0.1, 0.3)].iter().enumerate() {
            let (ex, ey) = expect(*x, *y);
            let (gx, gy) = g.point(k);
            assert!((gx - ex).abs() < 1e-12 && (gy - ey).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_preserves_distance_ratios_up_to_scale() {
        let f = LandmarkFrame::new(vec![0.0, 0.0, 0.4, 0.0, 0.0, 0.3, -0.2, -0.2]);
        let g = augment_reference(&f, 99);
        let dist = |fr: &LandmarkFrame, a: usize, b: usize| {
            let (ax, ay) = fr.point(a);
            let (bx, by) = fr.point(b);
            ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
        };
        let s = dist(&g, 0, 1) / dist(&f, 0, 1);
        assert!((0.9..=1.1).contains(&s));
        for (a, b) in [(0, 2), (1, 3), (2, 3)] {
            assert!((dist(&g, a, b) / dist(&f, a, b) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn pairing_uses_each_sequence_once() {
        let ds: Vec<MotionSequence> = (0..4).map(|i| ramp_seq(3, 2, i as f64 * 0.01)).collect();
        let pairs = make_pairs(&ds, 5).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(make_pairs(&ds, 5).unwrap(), pairs);
        assert!(make_pairs(&ds[..1], 5).is_err());
    }

    #[test]
    fn pairing_is_uniform_over_unordered_pairs() {
        // 10 items -> 45 unordered pairs, 5 pairs drawn per shuffle
        let n = 10usize;
        let shuffles = 1000usize;
        let mut counts = vec![vec![0u32; n]; n];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        for _ in 0..shuffles {
            for (a, b) in pair_indices(n, &mut rng).unwrap() {
                let (lo, hi) = (a.min(b), a.max(b));
                counts[lo][hi] += 1;
            }
        }
        // each unordered pair appears with prob (n/2) / C(n,2) = 1/(n-1)
        let p = 1.0 / (n as f64 - 1.0);
        let mean = shuffles as f64 * p;
        let sigma = (shuffles as f64 * p * (1.0 - p)).sqrt();
        for a in 0..n {
            for b in a + 1..n {
                let c = counts[a][b] as f64;
                assert!(
                    (c - mean).abs() <= 3.0 * sigma,
                    "pair ({a},{b}) count {c} outside 3 sigma of {mean}"
                );
            }
        }
    }
}
