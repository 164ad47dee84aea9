//! Binary model file codec.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "SPCF" | u32 version=1 | u32 K | u32 N | u32 patch_k | u32 net_count
//! per net: u32 name_len | name (UTF-8) | u32 layer_count
//!          per layer: u32 kind | u32 in_w | u32 out_w | u32 graph_k
//!          parameter arrays in declaration order, raw f64
//! ```
//!
//! Round trips are byte-exact: every parameter bit is preserved.

use alloc::string::String;
use alloc::vec::Vec;

use super::{LayerKind, LayerSpec, Net, ParamStore};
use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

pub const MAGIC: [u8; 4] = *b"SPCF";
pub const VERSION: u32 = 1;

// Caps on declared counts so corrupt files cannot trigger huge allocations.
const MAX_NETS: u32 = 1 << 12;
const MAX_NAME: u32 = 1 << 12;
const MAX_LAYERS: u32 = 1 << 12;
const MAX_WIDTH: u32 = 1 << 20;

/// Named nets plus the pipeline metadata stored alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub couplings: u32,
    pub euler_steps: u32,
    pub patch_k: u32,
    pub nets: Vec<(String, Net)>,
}

/// Serializes nets and metadata into the model file format.
pub fn encode_nets(bundle: &ModelBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, bundle.couplings);
    put_u32(&mut out, bundle.euler_steps);
    put_u32(&mut out, bundle.patch_k);
    put_u32(&mut out, bundle.nets.len() as u32);
    for (name, net) in &bundle.nets {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, net.layers().len() as u32);
        for layer in net.layers() {
            put_u32(&mut out, layer.kind.code());
            put_u32(&mut out, layer.in_width as u32);
            put_u32(&mut out, layer.out_width as u32);
            put_u32(&mut out, layer.graph_k as u32);
        }
        for param in net.params().entries() {
            for &v in param.value.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Parses the model file format. Fails with distinct error kinds for bad
/// magic, unknown versions, truncation, and structural damage.
pub fn decode_nets(bytes: &[u8]) -> Result<ModelBundle> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let couplings = cur.u32()?;
    let euler_steps = cur.u32()?;
    let patch_k = cur.u32()?;
    let net_count = cur.u32()?;
    if net_count > MAX_NETS {
        return Err(Error::Malformed("net count out of range".into()));
    }

    let mut nets = Vec::with_capacity(net_count as usize);
    for _ in 0..net_count {
        let name_len = cur.u32()?;
        if name_len > MAX_NAME {
            return Err(Error::Malformed("net name too long".into()));
        }
        let name_bytes = cur.take(name_len as usize)?;
        let name = core::str::from_utf8(name_bytes)
            .map_err(|_| Error::Malformed("net name is not UTF-8".into()))?
            .into();

        let layer_count = cur.u32()?;
        if layer_count > MAX_LAYERS {
            return Err(Error::Malformed("layer count out of range".into()));
        }
        let mut layers = Vec::with_capacity(layer_count as usize);
        for _ in 0..layer_count {
            let kind = LayerKind::from_code(cur.u32()?)
                .ok_or_else(|| Error::Malformed("unknown layer kind".into()))?;
            let in_width = cur.u32()?;
            let out_width = cur.u32()?;
            let graph_k = cur.u32()?;
            if in_width > MAX_WIDTH || out_width > MAX_WIDTH || graph_k > MAX_WIDTH {
                return Err(Error::Malformed("layer width out of range".into()));
            }
            layers.push(LayerSpec {
                kind,
                in_width: in_width as usize,
                out_width: out_width as usize,
                graph_k: graph_k as usize,
            });
        }

        let mut params = ParamStore::new();
        for (li, layer) in layers.iter().enumerate() {
            for (pname, rows, cols) in layer.param_shapes(li) {
                let mut mat = Mat::zeros(rows, cols);
                for v in mat.as_mut_slice() {
                    *v = cur.f64()?;
                }
                params
                    .add(pname, mat)
                    .map_err(|_| Error::Malformed("duplicate parameter".into()))?;
            }
        }
        let net = Net::with_params(layers, params)
            .map_err(|e| Error::Malformed(alloc::format!("invalid net {name}: {e}")))?;
        nets.push((name, net));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Malformed("trailing bytes".into()));
    }
    Ok(ModelBundle {
        couplings,
        euler_steps,
        patch_k,
        nets,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}
