//! Checkpoint files.
//!
//! ```text
//! "QDQN1" | version: u8 | count: u32
//! per array: name_len: u32 | name | ndim: u32 | dims: u32 × ndim | f32 × Π dims
//! ```
//!
//! All integers and floats are little-endian. The first arrays are the
//! network layout (`spec`) and the observation normalizer; the rest are the
//! parameters in network order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::DqnError;
use crate::net::{ConvSpec, NetworkSpec, Normalizer, QNetwork};
use crate::tensor::{ParamSet, Real, Tensor};

pub const MAGIC: &[u8; 5] = b"QDQN1";
pub const VERSION: u8 = 1;

fn spec_to_array(spec: &NetworkSpec) -> Vec<f32> {
    let mut v = vec![spec.input as f32, spec.channels as f32, spec.conv.len() as f32];
    for c in &spec.conv {
        v.extend([c.kernel as f32, c.stride as f32, c.filters as f32]);
    }
    v.push(spec.hidden.len() as f32);
    v.extend(spec.hidden.iter().map(|&h| h as f32));
    v.extend([spec.advantage_hidden as f32, spec.value_hidden as f32, spec.actions as f32]);
    v
}

fn spec_from_array(a: &[f32]) -> Result<NetworkSpec, DqnError> {
    let mut it = a.iter().map(|&x| x as usize);
    let mut next = || it.next().ok_or_else(|| DqnError::Format("truncated spec array".into()));
    let input = next()?;
    let channels = next()?;
    let n_conv = next()?;
    let mut conv = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        conv.push(ConvSpec {
            kernel: next()?,
            stride: next()?,
            filters: next()?,
        });
    }
    let n_hidden = next()?;
    let hidden = (0..n_hidden).map(|_| next()).collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkSpec {
        input,
        channels,
        conv,
        hidden,
        advantage_hidden: next()?,
        value_hidden: next()?,
        actions: next()?,
    })
}

fn write_array<W: Write>(w: &mut W, name: &str, shape: &[usize], data: impl Iterator<Item = f32>) -> Result<(), DqnError> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DqnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_array<R: Read>(r: &mut R) -> Result<Tensor<f32>, DqnError> {
    let len = read_u32(r)? as usize;
    if len > 4096 {
        return Err(DqnError::Format(format!("array name length {len} too large")));
    }
    let mut name = vec![0u8; len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name).map_err(|e| DqnError::Format(e.to_string()))?;
    let ndim = read_u32(r)? as usize;
    if ndim > 8 {
        return Err(DqnError::Format(format!("{name}: {ndim} dimensions")));
    }
    let shape = (0..ndim).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let n: usize = shape.iter().product();
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(Tensor { name, shape, data })
}

pub fn write<T: Real, W: Write>(net: &QNetwork<T>, w: &mut W) -> Result<(), DqnError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let params = net.params();
    w.write_all(&((params.tensors.len() + 3) as u32).to_le_bytes())?;
    let spec = spec_to_array(net.spec());
    write_array(w, "spec", &[spec.len()], spec.into_iter())?;
    let cast = |v: &T| v.to_f32().unwrap_or(f32::NAN);
    let n = net.spec().input;
    write_array(w, "obs.shift", &[n], net.normalizer.shift.iter().map(cast))?;
    write_array(w, "obs.scale", &[n], net.normalizer.scale.iter().map(cast))?;
    for t in &params.tensors {
        write_array(w, &t.name, &t.shape, t.data.iter().map(cast))?;
    }
    Ok(())
}

pub fn read<T: Real, R: Read>(r: &mut R) -> Result<QNetwork<T>, DqnError> {
    let mut head = [0u8; 6];
    r.read_exact(&mut head)?;
    if &head[..5] != MAGIC {
        return Err(DqnError::Format("bad magic".into()));
    }
    if head[5] != VERSION {
        return Err(DqnError::Format(format!("unsupported version {}", head[5])));
    }
    let count = read_u32(r)? as usize;
    if count < 3 {
        return Err(DqnError::Format("missing header arrays".into()));
    }
    let spec_arr = read_array(r)?;
    let shift = read_array(r)?;
    let scale = read_array(r)?;
    if spec_arr.name != "spec" || shift.name != "obs.shift" || scale.name != "obs.scale" {
        return Err(DqnError::Format("header arrays out of order".into()));
    }
    let spec = spec_from_array(&spec_arr.data)?;
    let mut params = ParamSet::new();
    for _ in 3..count {
        params.push(read_array(r)?);
    }
    let conv = |v: Vec<f32>| v.into_iter().map(|x| T::from(x).unwrap()).collect::<Vec<T>>();
    QNetwork::from_params(
        spec,
        params.cast(),
        Normalizer {
            shift: conv(shift.data),
            scale: conv(scale.data),
        },
    )
}

pub fn save<T: Real>(net: &QNetwork<T>, path: &Path) -> Result<(), DqnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load<T: Real>(path: &Path) -> Result<QNetwork<T>, DqnError> {
    read(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in [NetworkSpec::small(5, &[16, 8], 6, 21), {
            let mut s = NetworkSpec::paper_conv(2, 300);
            s.conv.iter_mut().for_each(|c| c.filters = 4);
            s.hidden = vec![8];
            s.advantage_hidden = 4;
            s.value_hidden = 3;
            s
        }] {
            let mut net = QNetwork::<f32>::new(spec.clone(), &mut rng).unwrap();
            net.normalizer.scale.iter_mut().enumerate().for_each(|(i, s)| *s = 0.5 + i as f32);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("net.qdqn");
            save(&net, &path).unwrap();
            let back: QNetwork<f32> = load(&path).unwrap();
            assert_eq!(back.spec(), &spec);
            assert_eq!(back.params(), net.params());
            let x: Vec<f32> = (0..spec.input).map(|i| (i as f32 * 0.37).sin()).collect();
            let noise = net.sample_noise(&mut rng);
            let a = net.q_values(&x, &noise).unwrap();
            let b = back.q_values(&x, &noise).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn corrupt_headers_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = QNetwork::<f32>::new(NetworkSpec::small(3, &[4], 4, 2), &mut rng).unwrap();
        let mut buf = Vec::new();
        write(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read::<f32, _>(&mut bad.as_slice()), Err(DqnError::Format(_))));
        let mut bad = buf.clone();
        bad[5] = 9;
        assert!(matches!(read::<f32, _>(&mut bad.as_slice()), Err(DqnError::Format(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(read::<f32, _>(&mut &truncated[..]).is_err());
        assert_eq!(&buf[..5], b"QDQN1");
    }
}
