//! Self-describing binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "TFPICKPT" | version u32 | vocab-hash len u32 + bytes
//! | model config 6 × u64 | layer count u32
//! | per layer: name len u32 + bytes, ndim u32, dims ndim × u64
//! | values f64 × total, in layer order (row-major)
//! | sha256 of everything above (32 bytes)
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{ModelConfig, PolicyParams};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TFPICKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab_hash: String,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn snapshot(params: &PolicyParams, vocab: &Vocabulary) -> Self {
        Checkpoint { vocab_hash: vocab.hash(), params: params.clone() }
    }

    /// Returns the parameters if the checkpoint was written for `vocab`.
    pub fn restore(&self, vocab: &Vocabulary) -> Result<PolicyParams> {
        if self.vocab_hash != vocab.hash() {
            return Err(Error::CorruptCheckpoint(format!(
                "vocabulary hash {} does not match {}",
                self.vocab_hash,
                vocab.hash()
            )));
        }
        if self.params.config().vocab_size != vocab.len() {
            return Err(Error::CorruptCheckpoint("vocabulary size mismatch".into()));
        }
        Ok(self.params.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let cfg = p.config();
        let mut out = Vec::with_capacity(p.len() * 8 + 1024);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_bytes(&mut out, self.vocab_hash.as_bytes());
        for v in [cfg.vocab_size, cfg.d_model, cfg.n_heads, cfg.n_blocks, cfg.d_ff, cfg.context] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&(p.layers().len() as u32).to_le_bytes());
        for layer in p.layers() {
            put_bytes(&mut out, layer.name.as_bytes());
            out.extend_from_slice(&(layer.shape.len() as u32).to_le_bytes());
            for &dim in &layer.shape {
                out.extend_from_slice(&(dim as u64).to_le_bytes());
            }
        }
        for x in p.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 {
            return Err(corrupt("file too short"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let vocab_hash =
            String::from_utf8(r.bytes()?.to_vec()).map_err(|_| corrupt("vocabulary hash is not utf-8"))?;
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u64()? as usize;
        }
        let config = ModelConfig {
            vocab_size: dims[0],
            d_model: dims[1],
            n_heads: dims[2],
            n_blocks: dims[3],
            d_ff: dims[4],
            context: dims[5],
        };
        let mut params =
            PolicyParams::zeros(config).map_err(|e| corrupt(&format!("bad model config: {e}")))?;
        let n_layers = r.u32()? as usize;
        if n_layers != params.layers().len() {
            return Err(corrupt("layer count does not match the model config"));
        }
        for layer in params.layers().to_vec() {
            let name = r.bytes()?;
            if name != layer.name.as_bytes() {
                return Err(corrupt(&format!("unexpected layer name for {}", layer.name)));
            }
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            if shape != layer.shape {
                return Err(corrupt(&format!("shape mismatch for {}", layer.name)));
            }
        }
        for x in params.as_mut_slice() {
            *x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        if !params.all_finite() {
            return Err(corrupt("non-finite parameter"));
        }
        Ok(Checkpoint { vocab_hash, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

fn corrupt(msg: &str) -> Error {
    Error::CorruptCheckpoint(msg.to_owned())
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(corrupt("unexpected end of data"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}
