//! Binary window cache:
//!
//! ```text
//! "PCCW" | version u32 | source sha-256 [32] | count u64 |
//!   count × (scene_id str | pedestrian i64 | start_frame i64 | 40 × f64) | crc-64
//! ```
//! Strings are u32 length + UTF-8. All integers and reals little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{scene_files, TrackWindow};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::{OBS_LEN, PRED_LEN};

const MAGIC: &[u8; 4] = b"PCCW";
pub const CACHE_VERSION: u32 = 1;
pub const CACHE_FILE: &str = ".pccs_windows.bin";

/// SHA-256 over the relative path and contents of every scene file under `root`.
pub fn source_fingerprint(root: &Path) -> Result<[u8; 32]> {
    let mut h = Sha256::new();
    for (dataset, path) in scene_files(root)? {
        h.update(dataset.as_bytes());
        h.update([0]);
        h.update(path.file_name().unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        let bytes = fs::read(&path)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().into())
}

pub fn encode_windows(fingerprint: &[u8; 32], windows: &[TrackWindow]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(CACHE_VERSION);
    w.bytes(fingerprint);
    w.u64(windows.len() as u64);
    for win in windows {
        w.str(&win.scene_id);
        w.i64(win.pedestrian_id);
        w.i64(win.start_frame);
        for p in win.points() {
            w.f64(p[0]);
            w.f64(p[1]);
        }
    }
    w.finish_with_crc()
}

pub fn decode_windows(data: &[u8]) -> Result<([u8; 32], Vec<TrackWindow>)> {
    let mut r = ByteReader::checked(data)?;
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a window cache (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    let fingerprint: [u8; 32] = r.take(32)?.try_into().unwrap();
    let n = r.u64()? as usize;
    let mut windows = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let scene_id = r.str()?;
        let pedestrian_id = r.i64()?;
        let start_frame = r.i64()?;
        let mut obs = [[0.0; 2]; OBS_LEN];
        let mut fut = [[0.0; 2]; PRED_LEN];
        for p in obs.iter_mut().chain(fut.iter_mut()) {
            *p = [r.f64()?, r.f64()?];
        }
        windows.push(TrackWindow {
            scene_id,
            pedestrian_id,
            start_frame,
            obs,
            fut,
        });
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes in window cache".into()));
    }
    Ok((fingerprint, windows))
}

pub fn write_cache(path: &Path, fingerprint: &[u8; 32], windows: &[TrackWindow]) -> Result<()> {
    fs::write(path, encode_windows(fingerprint, windows))?;
    Ok(())
}

/// Cached windows if the file exists and matches `fingerprint`.
pub fn read_cache(path: &Path, fingerprint: &[u8; 32]) -> Result<Option<Vec<TrackWindow>>> {
    if !path.exists() {
        return Ok(None);
    }
    let (stored, windows) = decode_windows(&fs::read(path)?)?;
    Ok((&stored == fingerprint).then_some(windows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(seed: f64) -> TrackWindow {
        let mut obs = [[0.0; 2]; OBS_LEN];
        let mut fut = [[0.0; 2]; PRED_LEN];
        for (i, p) in obs.iter_mut().chain(fut.iter_mut()).enumerate() {
            *p = [seed * i as f64 + 0.1, -(i as f64).sqrt() * seed];
        }
        TrackWindow {
            scene_id: "zara1/crowds_zara01.txt".into(),
            pedestrian_id: 42,
            start_frame: 780,
            obs,
            fut,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let ws = vec![window(0.37), window(-1.0 / 3.0)];
        let bytes = encode_windows(&[9; 32], &ws);
        let (fp, back) = decode_windows(&bytes).unwrap();
        assert_eq!(fp, [9; 32]);
        assert_eq!(back, ws);
        assert_eq!(encode_windows(&fp, &back), bytes);
    }

    #[test]
    fn rejects_bad_header() {
        let mut bytes = encode_windows(&[0; 32], &[window(1.0)]);
        bytes[0] = b'X';
        // checksum catches it first
        assert!(matches!(decode_windows(&bytes), Err(Error::Checksum { .. })));
    }
}
