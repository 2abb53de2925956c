//! Versioned binary checkpoint format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   8 bytes  b"RSIRMDL\0"
//! version u32      1
//! kind    u8       0 = seq_emb, 1 = markov
//! n_items u64
//! seq_emb: dim u64, gamma f64, then n_items*dim f64 row-major
//! markov:  alpha f64, nnz u64, then nnz x (from u32, to u32, count u64)
//! ```
//!
//! Round-trips are bit-exact for every field.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Backbone, MarkovModel, RankingModel, SeqEmbModel};

const MAGIC: &[u8; 8] = b"RSIRMDL\0";
const VERSION: u32 = 1;
const KIND_SEQ_EMB: u8 = 0;
const KIND_MARKOV: u8 = 1;

pub fn save(model: &Backbone, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    match model {
        Backbone::SeqEmb(m) => {
            buf.push(KIND_SEQ_EMB);
            buf.extend_from_slice(&(m.vocab_size() as u64).to_le_bytes());
            buf.extend_from_slice(&(m.dim() as u64).to_le_bytes());
            buf.extend_from_slice(&m.gamma().to_le_bytes());
            for v in m.embeddings() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Backbone::Markov(m) => {
            buf.push(KIND_MARKOV);
            buf.extend_from_slice(&(m.vocab_size() as u64).to_le_bytes());
            buf.extend_from_slice(&m.alpha().to_le_bytes());
            let entries = m.entries();
            buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
            for (from, to, count) in entries {
                buf.extend_from_slice(&from.to_le_bytes());
                buf.extend_from_slice(&to.to_le_bytes());
                buf.extend_from_slice(&count.to_le_bytes());
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Backbone> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let magic = r.take(8)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic header", path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let kind = r.u8()?;
    let n_items = r.u64()? as usize;
    let model = match kind {
        KIND_SEQ_EMB => {
            let dim = r.u64()? as usize;
            let gamma = r.f64()?;
            let mut emb = Vec::with_capacity(n_items * dim);
            for _ in 0..n_items * dim {
                emb.push(r.f64()?);
            }
            Backbone::SeqEmb(SeqEmbModel::from_parts(n_items, dim, gamma, emb))
        }
        KIND_MARKOV => {
            let alpha = r.f64()?;
            let nnz = r.u64()? as usize;
            let mut entries = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let from = r.u32()?;
                let to = r.u32()?;
                let count = r.u64()?;
                entries.push((from, to, count));
            }
            Backbone::Markov(MarkovModel::from_parts(n_items, alpha, entries))
        }
        other => {
            return Err(Error::Checkpoint(format!(
                "{}: unknown backbone kind tag {other}",
                path.display()
            )))
        }
    };
    if !r.at_end() {
        return Err(Error::Checkpoint(format!(
            "{}: trailing bytes after payload", path.display()
        )));
    }
    Ok(model)
}

/// Typed load that rejects checkpoints of the other kind.
pub fn load_seq_emb(path: &Path) -> Result<SeqEmbModel> {
    match load(path)? {
        Backbone::SeqEmb(m) => Ok(m),
        Backbone::Markov(_) => Err(Error::Checkpoint(format!(
            "{}: expected a seq_emb checkpoint, found markov",
            path.display()
        ))),
    }
}

pub fn load_markov(path: &Path) -> Result<MarkovModel> {
    match load(path)? {
        Backbone::Markov(m) => Ok(m),
        Backbone::SeqEmb(_) => Err(Error::Checkpoint(format!(
            "{}: expected a markov checkpoint, found seq_emb",
            path.display()
        ))),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::RankingModel;
    use crate::corpus::{SplitView, TrainSequence};

    fn sample_seq_emb() -> SeqEmbModel {
        SeqEmbModel::init(7, 4, 0.8, 42)
    }

    fn sample_markov() -> MarkovModel {
        let split = SplitView {
            training_sequences: vec![TrainSequence { user: 0, items: vec![0, 1, 2, 1, 0] }],
            eval_users: Vec::new(),
            vocab_size: 3,
        };
        MarkovModel::train(&split, 0.25).unwrap()
    }

    #[test]
    fn seq_emb_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = sample_seq_emb();
        save(&Backbone::SeqEmb(model.clone()), &path).unwrap();
        let loaded = load_seq_emb(&path).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(model.score_all(&[1, 2]), loaded.score_all(&[1, 2]));
    }

    #[test]
    fn markov_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = sample_markov();
        save(&Backbone::Markov(model.clone()), &path).unwrap();
        let loaded = load_markov(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn bad_magic_is_structured_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        std::fs::write(&path, b"NOTMODEL plus junk").unwrap();
        let err = load(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "got {err}");
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn truncated_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&Backbone::SeqEmb(sample_seq_emb()), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn cross_kind_load_is_kind_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&Backbone::Markov(sample_markov()), &path).unwrap();
        let err = load_seq_emb(&path).unwrap_err();
        assert!(err.to_string().contains("expected a seq_emb"));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&Backbone::SeqEmb(sample_seq_emb()), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 9; // bump version field
        std::fs::write(&path, bytes).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
