use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{kinematics, MotionSequence, ACC_GAIN, VEL_GAIN};
use crate::rng;

/// Frozen random-feature networks standing in for pretrained InceptionV3/I3D.
/// The weights are a pure function of the seed and never change, so two
/// evaluations with the same seed are comparable.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;
    fn seed(&self) -> u64;
}

fn random_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let lim = (1.0 / rows as f64).sqrt();
    DMatrix::from_fn(cols, rows, |_, _| r.gen_range(-lim..lim)).transpose()
}

/// Feed-forward extractor over 64 x 64 grayscale images (rasters or motion
/// maps): one tanh hidden layer, linear output.
pub struct FrameExtractor {
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
    seed: u64,
    d: usize,
}

impl FrameExtractor {
    pub fn new(seed: u64, d: usize) -> Self {
        let input = super::CANVAS * super::CANVAS;
        let hidden = 2 * d;
        let mut r = rng::stream(seed, "extractor.frame");
        FrameExtractor {
            w1: random_matrix(input, hidden, &mut r),
            w2: random_matrix(hidden, d, &mut r),
            seed,
            d,
        }
    }

    pub fn features(&self, pixels: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(pixels);
        let h = (self.w1.transpose() * x).map(f64::tanh);
        (self.w2.transpose() * h).as_slice().to_vec()
    }
}

impl FeatureExtractor for FrameExtractor {
    fn dim(&self) -> usize {
        self.d
    }
    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Recurrent extractor over kinematic sequences: a frozen tanh RNN whose
/// final hidden state is the feature vector.
pub struct SequenceExtractor {
    wx: DMatrix<f64>,
    wh: DMatrix<f64>,
    seed: u64,
    d: usize,
    k: usize,
}

impl SequenceExtractor {
    pub fn new(n_landmarks: usize, seed: u64, d: usize) -> Self {
        let input = 6 * n_landmarks;
        let mut r = rng::stream(seed, "extractor.seq");
        SequenceExtractor {
            wx: random_matrix(input, d, &mut r),
            wh: random_matrix(d, d, &mut r),
            seed,
            d,
            k: n_landmarks,
        }
    }

    pub fn features(&self, seq: &MotionSequence) -> Vec<f64> {
        assert_eq!(seq.n_landmarks(), self.k, "extractor built for K={}", self.k);
        let kin = kinematics(seq);
        let mut h = DVector::zeros(self.d);
        for t in 0..seq.len() {
            let mut x = DVector::from_column_slice(kin.row(t));
            for i in 0..2 * self.k {
                x[2 * self.k + i] *= VEL_GAIN;
                x[4 * self.k + i] *= ACC_GAIN;
            }
            h = (self.wx.transpose() * x + self.wh.transpose() * h).map(f64::tanh);
        }
        h.as_slice().to_vec()
    }
}

impl FeatureExtractor for SequenceExtractor {
    fn dim(&self) -> usize {
        self.d
    }
    fn seed(&self) -> u64 {
        self.seed
    }
}
