//! Binary checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `DIRCKPT\0`                       |
//! | 8      | 4    | format version (`1`)                    |
//! | 12     | 4    | variant (`0` decoupled, `1` direct IoU) |
//! | 16     | 4    | input dim                               |
//! | 20     | 4    | h1                                      |
//! | 24     | 4    | h2                                      |
//! | 28     | 8    | init seed                               |
//! | 36     | 8    | epochs trained                          |
//! | 44     | 8    | parameter count `n`                     |
//! | 52     | 8n   | parameters as `f64`                     |
//!
//! Parameters follow [`DirModelParams::tensors`] order.

use std::io::{Read, Write};

use crate::error::{ModelError, Result};

use super::network::{DirModelParams, Variant};

const MAGIC: &[u8; 8] = b"DIRCKPT\0";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, params: &DirModelParams, epoch: u64) -> Result<()> {
    let variant: u32 = match params.variant {
        Variant::Decoupled => 0,
        Variant::DirectIoU => 1,
    };
    let mut buf = Vec::with_capacity(52 + 8 * params.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&variant.to_le_bytes());
    for dim in [params.input_dim, params.h1, params.h2] {
        let dim = u32::try_from(dim).map_err(|_| ModelError::Checkpoint(format!("dimension {dim} too large")))?;
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&params.seed.to_le_bytes());
    buf.extend_from_slice(&epoch.to_le_bytes());
    buf.extend_from_slice(&(params.num_params() as u64).to_le_bytes());
    for v in params.tensors().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a checkpoint; returns the parameters and the number of epochs they were trained for.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(DirModelParams, u64)> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_owned());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 52 {
        return Err(bad("truncated header").into());
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic").into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(8) != VERSION {
        return Err(bad(&format!("unsupported version {}", u32_at(8))).into());
    }
    let variant = match u32_at(12) {
        0 => Variant::Decoupled,
        1 => Variant::DirectIoU,
        v => return Err(bad(&format!("unknown variant tag {v}")).into()),
    };
    let (input, h1, h2) = (u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize);
    let seed = u64_at(28);
    let epoch = u64_at(36);
    let count = u64_at(44) as usize;
    let mut params = DirModelParams::zeros(input, h1, h2, variant);
    params.seed = seed;
    if count != params.num_params() {
        return Err(bad(&format!("expected {} parameters, header says {count}", params.num_params())).into());
    }
    let body = &bytes[52..];
    if body.len() != 8 * count {
        return Err(bad(&format!("expected {} parameter bytes, found {}", 8 * count, body.len())).into());
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for v in params.tensors_mut().flat_map(|t| t.iter_mut()) {
        *v = values.next().expect("count checked");
    }
    Ok((params, epoch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for variant in [Variant::Decoupled, Variant::DirectIoU] {
            let m = DirModelParams::init(10, 6, 5, variant, 99);
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &m, 12).unwrap();
            assert_eq!(buf.len(), 52 + 8 * m.num_params());
            assert_eq!(&buf[..8], b"DIRCKPT\0");
            let (back, epoch) = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(epoch, 12);
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = DirModelParams::init(4, 3, 3, Variant::Decoupled, 1);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, 0).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        assert!(read_checkpoint(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[12] = 7;
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut bad = buf;
        bad[8] = 2;
        assert!(read_checkpoint(bad.as_slice()).is_err());
    }
}
