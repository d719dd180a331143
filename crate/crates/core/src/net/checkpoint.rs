//! Binary network checkpoints: magic, version, canonical JSON header, a tensor
//! manifest, then little-endian `f64` data in manifest order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DenseLayer, HedonicNetwork, NetworkConfig, NetworkParams, PriceTransform};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HNET";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    network: NetworkConfig,
    price_transform: PriceTransform,
}

struct Tensor {
    name: String,
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn tensors<T: Real>(net: &HedonicNetwork<T>) -> Vec<Tensor> {
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    let n = net.input_shift().len();
    let mut out = vec![
        Tensor {
            name: "input_shift".into(),
            dims: vec![n],
            data: f(net.input_shift()),
        },
        Tensor {
            name: "input_scale".into(),
            dims: vec![n],
            data: f(net.input_scale()),
        },
    ];
    for (l, layer) in net.params().layers.iter().enumerate() {
        out.push(Tensor {
            name: format!("layer{l}.weight"),
            dims: vec![layer.weights.rows(), layer.weights.cols()],
            data: f(layer.weights.as_slice()),
        });
        out.push(Tensor {
            name: format!("layer{l}.bias"),
            dims: vec![layer.bias.len()],
            data: f(&layer.bias),
        });
    }
    let h = &net.params().heads;
    out.push(Tensor {
        name: "heads".into(),
        dims: vec![h.rows(), h.cols()],
        data: f(h.as_slice()),
    });
    out
}

fn put_u32<W: Write>(out: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(input: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_checkpoint<T: Real, W: Write>(net: &HedonicNetwork<T>, mut out: W) -> Result<()> {
    let header = Header {
        network: net.config().clone(),
        price_transform: net.price_transform(),
    };
    // Value maps are sorted, which makes the JSON canonical.
    let json = serde_json::to_string(&serde_json::to_value(&header)?)?;
    out.write_all(CHECKPOINT_MAGIC)?;
    put_u32(&mut out, CHECKPOINT_VERSION as usize)?;
    put_u32(&mut out, json.len())?;
    out.write_all(json.as_bytes())?;
    let ts = tensors(net);
    put_u32(&mut out, ts.len())?;
    for t in &ts {
        put_u32(&mut out, t.name.len())?;
        out.write_all(t.name.as_bytes())?;
        put_u32(&mut out, t.dims.len())?;
        for &d in &t.dims {
            put_u32(&mut out, d)?;
        }
    }
    for t in &ts {
        for v in &t.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Real, R: Read>(mut input: R) -> Result<HedonicNetwork<T>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a network checkpoint (bad magic)".into()));
    }
    let version = get_u32(&mut input)?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let len = get_u32(&mut input)?;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    header.network.validate()?;

    let count = get_u32(&mut input)?;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let n = get_u32(&mut input)?;
        let mut name = vec![0u8; n];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let ndim = get_u32(&mut input)?;
        let dims = (0..ndim).map(|_| get_u32(&mut input)).collect::<Result<Vec<_>>>()?;
        manifest.push((name, dims));
    }
    let mut data = std::collections::BTreeMap::new();
    for (name, dims) in &manifest {
        let size: usize = dims.iter().product();
        let mut buf = vec![0u8; size * 8];
        input.read_exact(&mut buf)?;
        let values: Vec<T> = buf
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        data.insert(name.clone(), (dims.clone(), values));
    }
    let mut take = |name: &str| {
        data.remove(name)
            .ok_or_else(|| Error::Format(format!("checkpoint is missing tensor {name}")))
    };
    let cfg = header.network;
    let (_, shift) = take("input_shift")?;
    let (_, scale) = take("input_scale")?;
    let mut layers = Vec::new();
    for l in 0..cfg.hidden_layers() {
        let (wd, w) = take(&format!("layer{l}.weight"))?;
        let (_, b) = take(&format!("layer{l}.bias"))?;
        if wd.len() != 2 {
            return Err(Error::Format(format!("layer{l}.weight is not a matrix")));
        }
        layers.push(DenseLayer {
            weights: Matrix::from_vec(wd[0], wd[1], w)?,
            bias: b,
        });
    }
    let (hd, h) = take("heads")?;
    if hd.len() != 2 {
        return Err(Error::Format("heads is not a matrix".into()));
    }
    let params = NetworkParams {
        layers,
        heads: Matrix::from_vec(hd[0], hd[1], h)?,
    };
    HedonicNetwork::from_parts(cfg, params, shift, scale, header.price_transform)
}
