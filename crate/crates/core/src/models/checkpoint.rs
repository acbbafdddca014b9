//! `NNW1` checkpoints: little-endian, versioned, self-describing.
//!
//! ```text
//! "NNW1"  u32 version
//! u32 input rank, u32 dims…
//! u32 layer count, then per layer: u8 kind tag, kind fields, tap
//! per layer: u32 param count, tensors…; u32 state count, tensors…
//! tensor: u32 rank, u32 dims…, f64 values…
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{ActivationKind, LayerKind, LayerSpec, ModelGraph};
use crate::tensor::{Padding, Tensor};

pub const MAGIC: &[u8; 4] = b"NNW1";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("checkpoint fields fit in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, t: &Tensor) {
        self.u32(t.rank());
        for &d in t.shape() {
            self.u32(d);
        }
        self.0.reserve(t.len() * 8);
        for &v in t.data() {
            self.f64(v);
        }
    }
}

fn write_kind(w: &mut Writer, kind: &LayerKind) {
    match kind {
        LayerKind::Conv2D {
            filters,
            kernel,
            stride,
            padding,
        } => {
            w.u8(0);
            for v in [*filters, kernel.0, kernel.1, stride.0, stride.1] {
                w.u32(v);
            }
            w.u8(matches!(padding, Padding::Same) as u8);
        }
        LayerKind::Dense { units } => {
            w.u8(1);
            w.u32(*units);
        }
        LayerKind::MaxPool { window, stride } => {
            w.u8(2);
            for v in [window.0, window.1, stride.0, stride.1] {
                w.u32(v);
            }
        }
        LayerKind::Dropout { rate } => {
            w.u8(3);
            w.f64(*rate);
        }
        LayerKind::BatchNorm { momentum, epsilon } => {
            w.u8(4);
            w.f64(*momentum);
            w.f64(*epsilon);
        }
        LayerKind::Flatten => w.u8(5),
        LayerKind::GlobalAvgPool => w.u8(6),
        LayerKind::Activation(a) => {
            w.u8(7);
            match a {
                ActivationKind::Sigmoid => w.u8(0),
                ActivationKind::Relu => w.u8(1),
                ActivationKind::Elu { alpha } => {
                    w.u8(2);
                    w.f64(*alpha);
                }
                ActivationKind::Softmax => w.u8(3),
            }
        }
        LayerKind::Upsample { factor } => {
            w.u8(8);
            w.u32(*factor);
        }
        LayerKind::ConcatMerge { source } => {
            w.u8(9);
            w.str(source);
        }
    }
}

/// Serialize a model to checkpoint bytes.
pub fn encode_checkpoint(model: &ModelGraph) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(model.input_shape().len());
    for &d in model.input_shape() {
        w.u32(d);
    }
    w.u32(model.layers().len());
    for layer in model.layers() {
        write_kind(&mut w, &layer.kind);
        match &layer.tap {
            Some(t) => {
                w.u8(1);
                w.str(t);
            }
            None => w.u8(0),
        }
    }
    for (p, s) in model.params().iter().zip(model.state()) {
        w.u32(p.len());
        p.iter().for_each(|t| w.tensor(t));
        w.u32(s.len());
        s.iter().for_each(|t| w.tensor(t));
    }
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated: {what} needs {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let at = self.pos;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format {
            offset: at,
            message: format!("{what} is not UTF-8"),
        })
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32("tensor rank")?;
        if rank > 8 {
            return Err(self.fail(format!("implausible tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u32("tensor dim")).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| self.fail(format!("truncated: tensor {shape:?} exceeds remaining bytes")))?;
        let raw = self.take(count * 8, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape, data).map_err(|e| self.fail(e.to_string()))
    }

    fn kind(&mut self) -> Result<LayerKind> {
        let at = self.pos;
        Ok(match self.u8("layer tag")? {
            0 => {
                let f = self.u32("filters")?;
                let kh = self.u32("kernel")?;
                let kw = self.u32("kernel")?;
                let sh = self.u32("stride")?;
                let sw = self.u32("stride")?;
                let padding = match self.u8("padding")? {
                    0 => Padding::Valid,
                    1 => Padding::Same,
                    p => return Err(self.fail(format!("unknown padding tag {p}"))),
                };
                LayerKind::Conv2D {
                    filters: f,
                    kernel: (kh, kw),
                    stride: (sh, sw),
                    padding,
                }
            }
            1 => LayerKind::Dense {
                units: self.u32("units")?,
            },
            2 => {
                let v = (0..4).map(|_| self.u32("pool geometry")).collect::<Result<Vec<_>>>()?;
                LayerKind::MaxPool {
                    window: (v[0], v[1]),
                    stride: (v[2], v[3]),
                }
            }
            3 => LayerKind::Dropout {
                rate: self.f64("dropout rate")?,
            },
            4 => LayerKind::BatchNorm {
                momentum: self.f64("momentum")?,
                epsilon: self.f64("epsilon")?,
            },
            5 => LayerKind::Flatten,
            6 => LayerKind::GlobalAvgPool,
            7 => LayerKind::Activation(match self.u8("activation tag")? {
                0 => ActivationKind::Sigmoid,
                1 => ActivationKind::Relu,
                2 => ActivationKind::Elu {
                    alpha: self.f64("elu alpha")?,
                },
                3 => ActivationKind::Softmax,
                a => return Err(self.fail(format!("unknown activation tag {a}"))),
            }),
            8 => LayerKind::Upsample {
                factor: self.u32("upsample factor")?,
            },
            9 => LayerKind::ConcatMerge {
                source: self.str("merge source")?,
            },
            t => {
                return Err(Error::Format {
                    offset: at,
                    message: format!("unknown layer tag {t}"),
                })
            }
        })
    }
}

/// Parse checkpoint bytes. Nothing is returned unless the whole buffer is
/// well formed.
pub fn decode_checkpoint(buf: &[u8]) -> Result<ModelGraph> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, expected NNW1".into(),
        });
    }
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let rank = r.u32("input rank")?;
    if rank == 0 || rank > 8 {
        return Err(r.fail(format!("implausible input rank {rank}")));
    }
    let input = (0..rank).map(|_| r.u32("input dim")).collect::<Result<Vec<_>>>()?;
    let n = r.u32("layer count")?;
    // Every layer takes at least two bytes; reject absurd counts before allocating.
    if n > r.buf.len() {
        return Err(r.fail(format!("implausible layer count {n}")));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = r.kind()?;
        let tap = match r.u8("tap flag")? {
            0 => None,
            1 => Some(r.str("tap name")?),
            f => return Err(r.fail(format!("bad tap flag {f}"))),
        };
        layers.push(LayerSpec { kind, tap });
    }
    let mut params = Vec::with_capacity(n);
    let mut state = Vec::with_capacity(n);
    for _ in 0..n {
        let np = r.u32("param count")?;
        params.push((0..np).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?);
        let ns = r.u32("state count")?;
        state.push((0..ns).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?);
    }
    if r.pos != buf.len() {
        return Err(r.fail(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    ModelGraph::from_parts(&input, layers, params, state).map_err(|e| Error::Format {
        offset: buf.len(),
        message: e.to_string(),
    })
}

pub fn save_checkpoint(model: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelGraph> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&buf)
}

pub const TENSOR_MAGIC: &[u8; 4] = b"NNT1";

/// Single tensor file: `"NNT1"` followed by one tensor record.
pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut w = Writer(TENSOR_MAGIC.to_vec());
    w.tensor(t);
    w.0
}

pub fn decode_tensor(buf: &[u8]) -> Result<Tensor> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != TENSOR_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, expected NNT1".into(),
        });
    }
    let t = r.tensor()?;
    if r.pos != buf.len() {
        return Err(r.fail(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::factory::mini_fcn_layers;
    use crate::nn::Mode;
    use crate::rng::Prng;

    fn small() -> ModelGraph {
        let layers = vec![
            LayerSpec::conv(2, 3, 1, Padding::Same).with_tap("a"),
            LayerSpec::elu(),
            LayerSpec::batchnorm(),
            LayerSpec::concat("a"),
            LayerSpec::maxpool(2),
            LayerSpec::dropout(0.25),
            LayerSpec::flatten(),
            LayerSpec::dense(3),
            LayerSpec::softmax(),
        ];
        let mut p = Prng::new(9);
        let mut m = ModelGraph::new(&[1, 4, 4], layers, &mut p).unwrap();
        // Move the running statistics off their defaults.
        m.set_mode(Mode::Train);
        let x = Tensor::new(vec![2, 1, 4, 4], (0..32).map(|_| p.normal()).collect()).unwrap();
        m.forward(x, &mut p).unwrap();
        m.set_mode(Mode::Infer);
        m
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = small();
        let bytes = encode_checkpoint(&m);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.layers(), m.layers());
        assert_eq!(back.params(), m.params());
        assert_eq!(back.state(), m.state());
        assert_eq!(encode_checkpoint(&back), bytes);
        let x = Tensor::full(&[1, 1, 4, 4], 0.25);
        let (a, b) = (m.predict(&x).unwrap(), back.predict(&x).unwrap());
        assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn header_layout() {
        let bytes = encode_checkpoint(&small());
        assert_eq!(&bytes[..4], b"NNW1");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_checkpoint(&small());
        for cut in (0..bytes.len()).step_by(7) {
            match decode_checkpoint(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_checkpoint(&small());
        bytes[4] = 2;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format { offset: 0, .. })));
        let mut extra = encode_checkpoint(&small());
        extra.push(0);
        assert!(matches!(decode_checkpoint(&extra), Err(Error::Format { .. })));
    }

    #[test]
    fn fcn_round_trip_through_a_file() {
        let m = ModelGraph::new(&[3, 128, 128], mini_fcn_layers(), &mut Prng::new(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fcn.nnw");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.shape_trace(), m.shape_trace());
    }

    #[test]
    fn tensor_file_round_trip() {
        let t = Tensor::new(vec![2, 3], vec![1.5, -0.0, f64::MIN_POSITIVE, 7.0, -2.25, 1e300]).unwrap();
        let b = encode_tensor(&t);
        let back = decode_tensor(&b).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        for cut in 0..b.len() {
            assert!(decode_tensor(&b[..cut]).is_err());
        }
        assert!(decode_checkpoint(&b).is_err());
    }
}
