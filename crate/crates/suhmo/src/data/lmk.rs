//! .lmk sequence files and dataset manifests.
//!
//! Layout: magic `LMK1`, u32 T, u32 K, f32 fps, then T*K*2 little-endian f32
//! in (t, k, xy) order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MotionSequence, COORD_SLACK};
use crate::error::{Result, SuhmoError};

pub const MAGIC: &[u8; 4] = b"LMK1";

pub fn encode_lmk(seq: &MotionSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + seq.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.n_landmarks() as u32).to_le_bytes());
    out.extend_from_slice(&seq.fps.to_le_bytes());
    for &v in seq.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_lmk(buf: &[u8], origin: &Path) -> Result<MotionSequence> {
    let path = origin.to_path_buf();
    if buf.len() < 16 {
        return Err(SuhmoError::Truncated { path, expected: 16, actual: buf.len() });
    }
    if &buf[..4] != MAGIC {
        return Err(SuhmoError::BadMagic { path, expected: "LMK1" });
    }
    let t = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let fps = f32::from_le_bytes(buf[12..16].try_into().unwrap());
    if t == 0 {
        return Err(SuhmoError::Malformed { path, reason: "T = 0".into() });
    }
    if !fps.is_finite() || fps <= 0.0 {
        return Err(SuhmoError::Malformed { path, reason: format!("bad fps {fps}") });
    }
    let n = t
        .checked_mul(k)
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| SuhmoError::Malformed { path: path.clone(), reason: "dims overflow".into() })?;
    let expected = 16 + 4 * n;
    if buf.len() != expected {
        return Err(SuhmoError::Truncated { path, expected, actual: buf.len() });
    }
    let data: Vec<f64> = buf[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(SuhmoError::NonFinite { path, index: i });
        }
        if v.abs() > COORD_SLACK {
            return Err(SuhmoError::Malformed {
                path,
                reason: format!("coordinate {v} at element {i} outside [-{COORD_SLACK}, {COORD_SLACK}]"),
            });
        }
    }
    Ok(MotionSequence::new(data, t, k, fps))
}

pub fn save_sequence(path: &Path, seq: &MotionSequence) -> Result<()> {
    fs::write(path, encode_lmk(seq))?;
    Ok(())
}

pub fn load_sequence(path: &Path) -> Result<MotionSequence> {
    let buf = fs::read(path)?;
    decode_lmk(&buf, path)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_label: Option<usize>,
    pub split: String,
}

pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(entries)?)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_FPS;
    use rand::{Rng, SeedableRng};

    fn random_seq(t: usize, k: usize, seed: u64) -> MotionSequence {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // draw at f32 precision so the on-disk round trip is exact
        let data: Vec<f64> = (0..t * k * 2).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect();
        MotionSequence::new(data, t, k, DEFAULT_FPS)
    }

    #[test]
    fn round_trip_bit_exact() {
        let seq = random_seq(12, 5, 3);
        let bytes = encode_lmk(&seq);
        let back = decode_lmk(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, seq);
        assert_eq!(encode_lmk(&back), bytes);
    }

    #[test]
    fn single_frame_is_valid() {
        let seq = random_seq(1, 3, 4);
        let back = decode_lmk(&encode_lmk(&seq), Path::new("mem")).unwrap();
        assert_eq!(back.len(), 1);
    }

    #[test]
    fn truncated_file_names_sizes() {
        let bytes = encode_lmk(&random_seq(4, 2, 5));
        match decode_lmk(&bytes[..bytes.len() - 5], Path::new("mem")) {
            Err(SuhmoError::Truncated { expected, actual, .. }) => {
                assert_eq!(expected, bytes.len());
                assert_eq!(actual, bytes.len() - 5);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode_lmk(&random_seq(4, 2, 6));
        bytes[1] = b'?';
        assert!(matches!(
            decode_lmk(&bytes, Path::new("mem")),
            Err(SuhmoError::BadMagic { .. })
        ));
    }

    #[test]
    fn non_finite_coordinate_rejected() {
        let mut bytes = encode_lmk(&random_seq(2, 1, 7));
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_lmk(&bytes, Path::new("mem")),
            Err(SuhmoError::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn out_of_canvas_coordinate_rejected() {
        let mut bytes = encode_lmk(&random_seq(2, 1, 8));
        bytes[16..20].copy_from_slice(&7.5f32.to_le_bytes());
        assert!(matches!(decode_lmk(&bytes, Path::new("mem")), Err(SuhmoError::Malformed { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        let entries = vec![
            ManifestEntry { path: "a.lmk".into(), mode_label: Some(0), split: "train".into() },
            ManifestEntry { path: "b.lmk".into(), mode_label: None, split: "val".into() },
        ];
        save_manifest(&p, &entries).unwrap();
        assert_eq!(load_manifest(&p).unwrap(), entries);
    }
}
