//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "AEMODEL1"            8 bytes
//! version               u8 (= 1)
//! rank                  u8, then rank x u32 input shape
//! layer count           u32, then per layer:
//!     kind u8, in_channels u32, filters u32, kernel u32, pool u32
//! shortcut count        u32, then per shortcut: source u32, target u32
//! parameter count       u64, then that many f64 (weights then bias, per layer)
//! metadata count        u32, then per entry: key, value as u32 length + UTF-8
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::layers::{LayerKind, LayerSpec};
use super::model::AeModel;
use crate::binio::{write_atomic, Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AEMODEL1";
const VERSION: u8 = 1;

pub fn to_bytes(model: &AeModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    w.u8(model.input_shape().len() as u8);
    for &n in model.input_shape() {
        w.u32(n)?;
    }
    w.u32(model.layers().len())?;
    for l in model.layers() {
        w.u8(l.spec.kind.code());
        for v in [l.in_channels, l.spec.filters, l.spec.kernel, l.spec.pool_size] {
            w.u32(v)?;
        }
    }
    w.u32(model.shortcuts().len())?;
    for &(s, t) in model.shortcuts() {
        w.u32(s)?;
        w.u32(t)?;
    }
    let params = model.params();
    w.u64(params.len() as u64);
    params.iter().for_each(|&p| w.f64(p));
    w.u32(model.metadata.len())?;
    for (k, v) in &model.metadata {
        w.str(k)?;
        w.str(v)?;
    }
    Ok(w.buf)
}

pub fn from_bytes(buf: &[u8]) -> Result<AeModel> {
    let mut r = Reader::new(buf);
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not an AEMODEL1 file".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let rank = r.u8()? as usize;
    let input_shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n_layers = r.u32()?;
    let mut specs = Vec::new();
    let mut in_channels = Vec::new();
    for _ in 0..n_layers {
        let code = r.u8()?;
        let kind = LayerKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown layer kind {code}")))?;
        in_channels.push(r.u32()?);
        specs.push(LayerSpec { kind, filters: r.u32()?, kernel: r.u32()?, pool_size: r.u32()? });
    }
    let n_short = r.u32()?;
    let shortcuts = (0..n_short).map(|_| Ok((r.u32()?, r.u32()?))).collect::<Result<Vec<_>>>()?;
    let mut model = AeModel::unweighted(input_shape, specs, shortcuts)?;
    if model.layers().iter().zip(&in_channels).any(|(l, &c)| l.in_channels != c) {
        return Err(Error::Format("layer table channels are inconsistent".into()));
    }
    let n_params = r.u64()?;
    if n_params != model.num_params() as u64 {
        return Err(Error::Format(format!("{n_params} parameters stored, layer table needs {}", model.num_params())));
    }
    let params = (0..n_params).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    model.set_params(&params)?;
    let n_meta = r.u32()?;
    let mut metadata = BTreeMap::new();
    for _ in 0..n_meta {
        let k = r.str()?;
        metadata.insert(k, r.str()?);
    }
    model.metadata = metadata;
    r.finish()?;
    Ok(model)
}

/// Atomic write (temporary sibling, then rename).
pub fn save(model: &AeModel, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(model)?)
}

pub fn load(path: &Path) -> Result<AeModel> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ae::ArchConfig;

    #[test]
    fn round_trip() {
        let mut m = AeModel::standard(vec![2, 8, 4], &ArchConfig { filters: 3, ..ArchConfig::default() }, 5).unwrap();
        m.metadata.insert("input_kind".into(), "theta".into());
        let bytes = to_bytes(&m).unwrap();
        assert_eq!(&bytes[..8], b"AEMODEL1");
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(from_bytes(&bad).is_err());
    }
}
