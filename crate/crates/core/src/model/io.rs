//! Binary model file, little-endian:
//!
//! ```text
//! "DFSM" u32 version=1 u32 N u32 num_classes u32 stage_count
//! stage_count × (u32 in_ch, u32 out_ch, u32 stride, u32 shared)
//! u32 k_num u32 k_den u32 i_num u32 i_den u32 site_mask
//! u32 in_channels u32 frames u32 height u32 width
//! per parameter block in storage order: u64 len, len × f64
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::{InputDims, NetworkConfig, StageSpec};
use crate::model::params::ParamStore;
use crate::shift::{Fraction, ShiftConfig};

pub const MODEL_MAGIC: &[u8; 4] = b"DFSM";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serializes `params` and `cfg` into the model file layout.
pub fn encode_model(params: &ParamStore, cfg: &NetworkConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    params.check_config(cfg)?;
    let mut buf = Vec::with_capacity(64 + 8 * params.num_params());
    buf.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut buf, MODEL_VERSION as usize)?;
    put_u32(&mut buf, cfg.modalities)?;
    put_u32(&mut buf, cfg.num_classes)?;
    put_u32(&mut buf, cfg.stages.len())?;
    for s in &cfg.stages {
        put_u32(&mut buf, s.in_channels)?;
        put_u32(&mut buf, s.out_channels)?;
        put_u32(&mut buf, s.stride)?;
        put_u32(&mut buf, s.shared as usize)?;
    }
    let sh = &cfg.shift;
    for v in [sh.k_fraction.num, sh.k_fraction.den, sh.i_fraction.num, sh.i_fraction.den] {
        put_u32(&mut buf, v as usize)?;
    }
    put_u32(&mut buf, sh.site_mask() as usize)?;
    let d = cfg.input;
    for v in [d.channels, d.frames, d.height, d.width] {
        put_u32(&mut buf, v)?;
    }
    params.for_each_block(|_, b| {
        buf.extend_from_slice(&(b.len() as u64).to_le_bytes());
        for v in b {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    });
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated model file: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a model file image.
pub fn decode_model(bytes: &[u8]) -> Result<(ParamStore, NetworkConfig)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("bad model magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let modalities = r.usize()?;
    let num_classes = r.usize()?;
    let stage_count = r.usize()?;
    if stage_count > 64 {
        return Err(Error::Format(format!("implausible stage count {stage_count}")));
    }
    let mut stages = Vec::with_capacity(stage_count);
    for _ in 0..stage_count {
        let (cin, cout, stride, shared) = (r.usize()?, r.usize()?, r.usize()?, r.u32()?);
        if shared > 1 {
            return Err(Error::Format(format!("shared flag {shared}")));
        }
        stages.push(StageSpec::new(cin, cout, stride, shared == 1));
    }
    let (kn, kd, inum, iden) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let mask = r.u32()?;
    let input = InputDims {
        channels: r.usize()?,
        frames: r.usize()?,
        height: r.usize()?,
        width: r.usize()?,
    };
    let shift = ShiftConfig {
        k_fraction: Fraction::new(kn, kd).map_err(|e| Error::Format(e.to_string()))?,
        i_fraction: Fraction::new(inum, iden).map_err(|e| Error::Format(e.to_string()))?,
        sites: ShiftConfig::sites_from_mask(mask),
    };
    let cfg = NetworkConfig {
        modalities,
        num_classes,
        input,
        stages,
        shift,
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("header describes an invalid network: {e}")))?;

    let mut params = ParamStore::zeros(&cfg);
    let mut failure = None;
    params.for_each_block_mut(|name, block| {
        if failure.is_some() {
            return;
        }
        let res = (|| {
            let len = r.u64()?;
            if len != block.len() as u64 {
                return Err(Error::Format(format!(
                    "block {name} declares {len} values, network needs {}",
                    block.len()
                )));
            }
            let raw = r.take(block.len() * 8)?;
            for (v, chunk) in block.iter_mut().zip(raw.chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            Ok(())
        })();
        if let Err(e) = res {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    Ok((params, cfg))
}

pub fn save_model(params: &ParamStore, cfg: &NetworkConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(params, cfg)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ParamStore, NetworkConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
