use std::io::{Read, Write};

use super::{ModelError, ModelParams, TENSOR_NAMES};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TJUQCKPT";
const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64, ModelError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Little-endian layout: magic, version, hidden, dropout rate, tensor count,
/// then per tensor its name, shape and row-major values.
pub fn write_checkpoint(w: &mut impl Write, params: &ModelParams) -> Result<(), ModelError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, params.hidden as u32)?;
    put_f64(w, params.dropout_rate)?;
    put_u32(w, TENSOR_NAMES.len() as u32)?;
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors()) {
        put_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u32(w, t.rows as u32)?;
        put_u32(w, t.cols as u32)?;
        for &v in &t.data {
            put_f64(w, v)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<ModelParams, ModelError> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let hidden = get_u32(r)? as usize;
    if hidden == 0 || hidden > 1 << 16 {
        return Err(bad("implausible hidden size"));
    }
    let dropout = get_f64(r)?;
    let mut params = ModelParams::zeros(hidden, dropout);
    if get_u32(r)? as usize != TENSOR_NAMES.len() {
        return Err(bad("tensor count mismatch"));
    }
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
        let len = get_u32(r)? as usize;
        if len != name.len() {
            return Err(ModelError::Checkpoint(format!("expected tensor {name}")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        if buf != name.as_bytes() {
            return Err(ModelError::Checkpoint(format!("expected tensor {name}")));
        }
        let (rows, cols) = (get_u32(r)? as usize, get_u32(r)? as usize);
        if rows != t.rows || cols != t.cols {
            return Err(ModelError::Checkpoint(format!("shape mismatch for {name}")));
        }
        for v in &mut t.data {
            *v = get_f64(r)?;
        }
    }
    if !params.is_finite() {
        return Err(ModelError::NonFinite("checkpoint"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{init_model, ModelConfig};

    #[test]
    fn round_trip_is_exact() {
        let p = init_model(&ModelConfig { hidden: 5, dropout_rate: 0.25 }, 9);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let q = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(read_checkpoint(&mut &b"NOTACKPTxxxxxxxx"[..]).is_err());
        let p = init_model(&ModelConfig { hidden: 3, dropout_rate: 0.0 }, 1);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
