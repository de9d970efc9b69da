//! Versioned binary weight format.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "AVTQ"
//! 4       4           version (u32 LE, currently 1)
//! 8       4           input_dim (u32 LE)
//! 12      4           layer count L (u32 LE)
//! 16      8 * L       per layer: rows (outputs), cols (inputs), u32 LE each
//! ...                 per layer: rows*cols weights then rows biases, f64 LE,
//!                     weights row-major
//! ```

use super::{Dense, Mlp, NnError};

pub const BLOB_MAGIC: [u8; 4] = *b"AVTQ";
pub const BLOB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightBlob(pub Vec<u8>);

impl WeightBlob {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl Mlp {
    pub fn save_weights(&self) -> WeightBlob {
        let mut out = Vec::with_capacity(16 + 8 * self.layers.len() + 8 * self.parameter_count());
        out.extend_from_slice(&BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.input_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.outputs as u32).to_le_bytes());
            out.extend_from_slice(&(l.inputs as u32).to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        WeightBlob(out)
    }

    pub fn load_weights(blob: &WeightBlob) -> Result<Mlp, NnError> {
        let mut r = Reader { buf: &blob.0, pos: 0 };
        if r.take(4)? != BLOB_MAGIC {
            return Err(NnError::Blob("bad magic".into()));
        }
        let version = r.u32()?;
        if version != BLOB_VERSION {
            return Err(NnError::Blob(format!("unsupported version {version}")));
        }
        let input_dim = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(NnError::Blob(format!("implausible layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            shapes.push((rows, cols));
        }
        let mut expected_in = input_dim;
        for &(rows, cols) in &shapes {
            if cols != expected_in || rows == 0 {
                return Err(NnError::Blob(format!("layer shapes do not chain: {shapes:?}")));
            }
            expected_in = rows;
        }
        let needed: usize = shapes.iter().map(|(r, c)| 8 * (r * c + r)).sum();
        if r.remaining() != needed {
            return Err(NnError::Blob(format!(
                "payload is {} bytes, header implies {needed}",
                r.remaining()
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (rows, cols) in shapes {
            let mut d = Dense::zeros(cols, rows);
            for w in d.weights.iter_mut().chain(d.bias.iter_mut()) {
                *w = r.f64()?;
            }
            layers.push(d);
        }
        Ok(Mlp { layers })
    }

    /// Loads and checks the input width against what the caller needs.
    pub fn load_weights_expecting(blob: &WeightBlob, input_dim: usize) -> Result<Mlp, NnError> {
        let net = Self::load_weights(blob)?;
        if net.input_dim() != input_dim {
            return Err(NnError::InputDim {
                expected: input_dim,
                got: net.input_dim(),
            });
        }
        Ok(net)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Blob("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}
