//! Binary model container.
//!
//! Layout, all integers u64 little-endian unless noted:
//! magic `SOGTOK1`, d_s, d_h, d, d_r, K, beta (f64), strategy kind (u8) and
//! seed, flags (u8), max_nodes, embedder block, then W1, W2, Wd and the
//! codebook as row-major f64 blocks, the run seed, and a length-prefixed
//! JSON manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::attributes::{
    AttributeEmbedder, Embedder, HashingEmbedder, ImportanceStrategy, TableEmbedder,
};
use crate::model::{
    Codebook, DecoderParams, EncoderParams, LossOptions, ModelError, ReconstructionMode, VqParams,
};
use crate::train::TokenizerModel;

pub const MAGIC: &[u8; 7] = b"SOGTOK1";

const FLAG_STRAIGHT_THROUGH: u8 = 1;
const FLAG_LOGISTIC: u8 = 2;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.u64(b.len() as u64)?;
        self.0.write_all(b)
    }
    fn block(&mut self, a: &Array2<f64>) -> std::io::Result<()> {
        for row in a.rows() {
            for &v in row {
                self.f64(v)?;
            }
        }
        Ok(())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn exact<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.exact::<1>()?[0])
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.exact()?))
    }
    fn usize(&mut self, what: &str) -> Result<usize, ModelError> {
        let v = self.u64()?;
        if v > (1 << 24) {
            return Err(ModelError::Format(format!(
                "{what} {v} is implausibly large"
            )));
        }
        Ok(v as usize)
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.exact()?))
    }
    fn bytes(&mut self) -> Result<Vec<u8>, ModelError> {
        let len = self.usize("string length")?;
        let mut buf = vec![0u8; len];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf)
    }
    fn string(&mut self) -> Result<String, ModelError> {
        String::from_utf8(self.bytes()?).map_err(|e| ModelError::Format(e.to_string()))
    }
    fn block(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>, ModelError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let v = self.f64()?;
            if !v.is_finite() {
                return Err(ModelError::Format("non-finite weight".into()));
            }
            data.push(v);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
    }
}

fn truncated(e: std::io::Error) -> ModelError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        ModelError::Format("truncated checkpoint".into())
    } else {
        ModelError::Io(e)
    }
}

pub fn write_checkpoint<W: Write>(
    model: &TokenizerModel,
    manifest: &str,
    out: W,
) -> Result<(), ModelError> {
    let mut w = Writer(out);
    let p = &model.params;
    w.0.write_all(MAGIC)?;
    for d in [
        p.encoder.input_dim(),
        p.encoder.hidden_dim(),
        p.encoder.output_dim(),
        p.decoder.wd.ncols(),
        p.codebook.len(),
    ] {
        w.u64(d as u64)?;
    }
    w.f64(model.loss.beta)?;
    let (kind, seed) = model.strategy.code();
    w.u8(kind)?;
    w.u64(seed)?;
    let mut flags = 0;
    if model.loss.straight_through {
        flags |= FLAG_STRAIGHT_THROUGH;
    }
    if model.loss.mode == ReconstructionMode::Logistic {
        flags |= FLAG_LOGISTIC;
    }
    w.u8(flags)?;
    w.u64(model.max_nodes as u64)?;
    match &model.embedder {
        Embedder::Hashing(h) => {
            w.u8(0)?;
            w.u64(h.dim as u64)?;
            w.u64(h.seed)?;
        }
        Embedder::Table(t) => {
            w.u8(1)?;
            w.u64(t.dim() as u64)?;
            let entries: Vec<_> = t.entries().collect();
            w.u64(entries.len() as u64)?;
            for (key, v) in entries {
                w.bytes(key.as_bytes())?;
                for &x in v {
                    w.f64(x)?;
                }
            }
        }
    }
    w.block(&p.encoder.w1)?;
    w.block(&p.encoder.w2)?;
    w.block(&p.decoder.wd)?;
    w.block(&p.codebook.entries)?;
    w.u64(model.seed)?;
    w.bytes(manifest.as_bytes())?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(TokenizerModel, String), ModelError> {
    let mut r = Reader(input);
    if &r.exact::<7>()? != MAGIC {
        return Err(ModelError::Format("bad magic".into()));
    }
    let d_s = r.usize("d_s")?;
    let d_h = r.usize("d_h")?;
    let d = r.usize("d")?;
    let d_r = r.usize("d_r")?;
    let k = r.usize("K")?;
    let beta = r.f64()?;
    let kind = r.u8()?;
    let seed = r.u64()?;
    let strategy = ImportanceStrategy::from_code(kind, seed)
        .ok_or_else(|| ModelError::Format(format!("unknown strategy code {kind}")))?;
    let flags = r.u8()?;
    let max_nodes = r.usize("max_nodes")?;
    let embedder = match r.u8()? {
        0 => {
            let dim = r.usize("embedding dim")?;
            Embedder::Hashing(HashingEmbedder {
                dim,
                seed: r.u64()?,
            })
        }
        1 => {
            let dim = r.usize("embedding dim")?;
            let count = r.usize("table size")?;
            let mut table = BTreeMap::new();
            for _ in 0..count {
                let key = r.string()?;
                let v = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                table.insert(key, v);
            }
            Embedder::Table(
                TableEmbedder::new(dim, table).map_err(|e| ModelError::Format(e.to_string()))?,
            )
        }
        other => return Err(ModelError::Format(format!("unknown embedder kind {other}"))),
    };
    let w1 = r.block(d_s, d_h)?;
    let w2 = r.block(d_h, d)?;
    let wd = r.block(d, d_r)?;
    let cb = r.block(k, d)?;
    let run_seed = r.u64()?;
    let manifest = r.string()?;
    let model = TokenizerModel {
        strategy,
        embedder,
        params: VqParams {
            encoder: EncoderParams::new(w1, w2)?,
            decoder: DecoderParams { wd },
            codebook: Codebook::new(cb)?,
        },
        loss: LossOptions {
            beta,
            mode: if flags & FLAG_LOGISTIC != 0 {
                ReconstructionMode::Logistic
            } else {
                ReconstructionMode::Frobenius
            },
            straight_through: flags & FLAG_STRAIGHT_THROUGH != 0,
        },
        max_nodes,
        seed: run_seed,
    };
    Ok((model, manifest))
}

pub fn save_checkpoint(
    model: &TokenizerModel,
    manifest: &str,
    path: &Path,
) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    write_checkpoint(model, manifest, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(TokenizerModel, String), ModelError> {
    read_checkpoint(fs::File::open(path)?)
}
