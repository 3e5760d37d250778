//! Model checkpoint files.
//!
//! Layout (little-endian): magic `PCCS`, `u32` version, config echo string,
//! `u64` seed, `u32` array count, then per array a name string, `u32` rows,
//! `u32` cols and `rows·cols` `f64` values; a CRC-64 of all preceding bytes
//! closes the file. Strings are a `u32` byte length followed by UTF-8.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::nn::{Matrix, ParamSet};
use crate::pipeline::{ModelBundle, TrainConfig};
use crate::REP_DIM;

pub const MAGIC: &[u8; 4] = b"PCCS";
pub const VERSION: u32 = 1;

fn components(b: &ModelBundle) -> [(&'static str, &ParamSet); 5] {
    [
        ("past", &b.past.params),
        ("future", &b.future.params),
        ("classifier", &b.classifier.params),
        ("synthesizer", &b.synthesizer.params),
        ("decoder", &b.decoder.params),
    ]
}

fn components_mut(b: &mut ModelBundle) -> [(&'static str, &mut ParamSet); 5] {
    [
        ("past", &mut b.past.params),
        ("future", &mut b.future.params),
        ("classifier", &mut b.classifier.params),
        ("synthesizer", &mut b.synthesizer.params),
        ("decoder", &mut b.decoder.params),
    ]
}

fn modality_arrays(b: &ModelBundle) -> Vec<(String, Matrix)> {
    let k = b.k();
    let ms = &b.modalities.modalities;
    let stack = |f: fn(&Modality) -> &Vec<f64>| {
        Matrix::from_vec(k, REP_DIM, ms.iter().flat_map(|m| f(m).iter().copied()).collect())
            .expect("centers are REP_DIM wide")
    };
    vec![
        ("modalities/center_history".into(), stack(|m| &m.center_history)),
        ("modalities/center_future".into(), stack(|m| &m.center_future)),
        (
            "modalities/member_count".into(),
            Matrix::from_vec(k, 1, ms.iter().map(|m| m.member_count as f64).collect()).unwrap(),
        ),
    ]
}

pub fn write_checkpoint(bundle: &ModelBundle) -> Vec<u8> {
    let mut arrays: Vec<(String, &Matrix)> = Vec::new();
    for (prefix, params) in components(bundle) {
        for (_, name, m) in params.iter() {
            arrays.push((format!("{prefix}/{name}"), m));
        }
    }
    let extra = modality_arrays(bundle);
    arrays.extend(extra.iter().map(|(n, m)| (n.clone(), m)));

    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.str(&bundle.config.echo());
    w.u64(bundle.seed);
    w.u32(arrays.len() as u32);
    for (name, m) in arrays {
        w.str(&name);
        w.u32(m.rows() as u32);
        w.u32(m.cols() as u32);
        for &v in m.as_slice() {
            w.f64(v);
        }
    }
    w.finish_with_crc()
}

pub fn read_checkpoint(data: &[u8]) -> Result<ModelBundle> {
    if data.len() < 8 || &data[..4] != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let mut r = ByteReader::checked(data)?;
    r.take(8)?;
    let config = TrainConfig::from_echo(&r.str()?)?;
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    let mut arrays: BTreeMap<String, Matrix> = BTreeMap::new();
    for _ in 0..count {
        let name = r.str()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format(format!("array `{name}` is too large")))?;
        let mut values = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            values.push(r.f64()?);
        }
        if arrays.insert(name.clone(), Matrix::from_vec(rows, cols, values)?).is_some() {
            return Err(Error::Format(format!("duplicate array `{name}`")));
        }
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after arrays".into()));
    }

    let mut take = |name: &str| {
        arrays
            .remove(name)
            .ok_or_else(|| Error::Format(format!("missing array `{name}`")))
    };
    let centers_h = take("modalities/center_history")?;
    let centers_f = take("modalities/center_future")?;
    let counts = take("modalities/member_count")?;
    let k = centers_h.rows();
    if centers_h.cols() != REP_DIM || centers_f.shape() != (k, REP_DIM) || counts.shape() != (k, 1) {
        return Err(Error::Format("inconsistent modality arrays".into()));
    }

    let mut bundle = ModelBundle::untrained(config, seed, k);
    for (prefix, params) in components_mut(&mut bundle) {
        let names: Vec<String> = params.iter().map(|(_, n, _)| n.to_string()).collect();
        for name in names {
            params.load(&name, take(&format!("{prefix}/{name}"))?)?;
        }
    }
    for (i, m) in bundle.modalities.modalities.iter_mut().enumerate() {
        m.center_history = centers_h.row(i).to_vec();
        m.center_future = centers_f.row(i).to_vec();
        m.member_count = counts.get(i, 0) as usize;
    }
    if let Some(name) = arrays.keys().next() {
        return Err(Error::Format(format!("unexpected array `{name}`")));
    }
    Ok(bundle)
}

pub fn save_checkpoint(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_checkpoint(bundle))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelBundle> {
    read_checkpoint(&fs::read(path)?)
}

pub fn bytes_hash(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn bundle_hash(bundle: &ModelBundle) -> String {
    bytes_hash(&write_checkpoint(bundle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> ModelBundle {
        let config = TrainConfig {
            k: 4,
            ..TrainConfig::default()
        };
        let mut b = ModelBundle::untrained(config, 9, 4);
        for (i, m) in b.modalities.modalities.iter_mut().enumerate() {
            m.center_history = (0..REP_DIM).map(|j| (i * j) as f64 * 0.013).collect();
            m.center_future = (0..REP_DIM).map(|j| -((i + j) as f64).sqrt()).collect();
            m.member_count = i + 1;
        }
        b
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let b = bundle();
        let bytes = write_checkpoint(&b);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        assert_eq!(back.modalities, b.modalities);
        assert_eq!(back.config, b.config);
        assert_eq!(back.seed, 9);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = write_checkpoint(&bundle());
        let mut bad = bytes.clone();
        bad[100] ^= 0x01;
        assert!(matches!(read_checkpoint(&bad), Err(Error::Checksum { .. })));
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(read_checkpoint(&magic), Err(Error::Format(_))));
        let mut version = bytes;
        version[4] = 7;
        assert!(matches!(read_checkpoint(&version), Err(Error::Version { found: 7, .. })));
    }
}
