//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic `SIGNALNN`, u32 version, u8 variant
//! (0 single, 1 multi), u8 shared trunk, u32 hidden, u32 channels, u32 kernel,
//! u32 tensor count, then per tensor u32 rank, u32 extents and f64 values.

use std::io::{Read, Write};
use std::path::Path;

use super::net::PolicyValueNet;
use super::tensor::{ParameterSet, Tensor};
use super::{NetConfig, NnError, Variant};

pub const MAGIC: &[u8; 8] = b"SIGNALNN";
pub const VERSION: u32 = 1;

pub fn write_net<W: Write>(mut w: W, net: &PolicyValueNet) -> Result<(), NnError> {
    let cfg = net.config();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match cfg.variant {
        Variant::Single => 0,
        Variant::Multi => 1,
    }])?;
    w.write_all(&[cfg.shared_trunk as u8])?;
    for v in [cfg.hidden, cfg.channels, cfg.kernel, net.params().tensors.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for t in &net.params().tensors {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8, NnError> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub fn read_net<R: Read>(mut r: R) -> Result<PolicyValueNet, NnError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported format version {version}")));
    }
    let variant = match read_u8(&mut r)? {
        0 => Variant::Single,
        1 => Variant::Multi,
        v => return Err(NnError::Checkpoint(format!("unknown variant tag {v}"))),
    };
    let shared_trunk = match read_u8(&mut r)? {
        0 => false,
        1 => true,
        v => return Err(NnError::Checkpoint(format!("bad shared-trunk flag {v}"))),
    };
    let hidden = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let kernel = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let config = NetConfig { variant, hidden, channels, kernel, shared_trunk };
    let template = PolicyValueNet::zeros(config.clone())?;
    if count != template.params().tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "expected {} tensors, file has {count}",
            template.params().tensors.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for want in template.params().tensors.iter() {
        let rank = read_u32(&mut r)? as usize;
        if rank != want.shape().len() {
            return Err(NnError::Checkpoint(format!("tensor rank {rank}, expected {}", want.shape().len())));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        if shape != want.shape() {
            return Err(NnError::Checkpoint(format!("tensor shape {shape:?}, expected {:?}", want.shape())));
        }
        let mut data = vec![0.0; want.len()];
        let mut b = [0u8; 8];
        for x in &mut data {
            r.read_exact(&mut b)?;
            *x = f64::from_le_bytes(b);
        }
        tensors.push(Tensor::from_vec(shape, data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(NnError::Checkpoint("trailing bytes after last tensor".into()));
    }
    PolicyValueNet::from_params(config, ParameterSet { tensors })
}

pub fn to_bytes(net: &PolicyValueNet) -> Vec<u8> {
    let mut v = Vec::new();
    write_net(&mut v, net).expect("writing to memory");
    v
}

pub fn from_bytes(bytes: &[u8]) -> Result<PolicyValueNet, NnError> {
    read_net(bytes)
}

pub fn save(path: &Path, net: &PolicyValueNet) -> Result<(), NnError> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyValueNet, NnError> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for cfg in [NetConfig::single(8), NetConfig { shared_trunk: false, ..NetConfig::multi(3) }] {
            let net = PolicyValueNet::new(cfg, 17).unwrap();
            let bytes = to_bytes(&net);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, net);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn rejects_corruption() {
        let bytes = to_bytes(&PolicyValueNet::new(NetConfig::single(4), 1).unwrap());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(from_bytes(&long).is_err());
    }
}
