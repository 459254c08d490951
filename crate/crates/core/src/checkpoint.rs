//! Binary checkpoints.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "KINMO1"
//! tag length, tag bytes (UTF-8)
//! 32-byte SHA-256 config digest
//! config text length, config text bytes
//! blob count
//! per blob: name length, name bytes, ndim, dims..., f32 LE values
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{PipelineConfig, Section};
use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: &[u8; 6] = b"KINMO1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tag: String,
    pub config_digest: [u8; 32],
    /// The config section the weights were trained under, as `key=value` lines.
    pub config_text: String,
    pub blobs: BTreeMap<String, Tensor>,
}

fn bad(message: impl Into<String>) -> Error {
    Error::format("checkpoint", message)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated file"))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid UTF-8"))
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field exceeds u32").to_le_bytes());
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    push_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn new(tag: &str, config: &PipelineConfig, section: Section) -> Self {
        Self {
            tag: tag.to_string(),
            config_digest: config.digest(section),
            config_text: config.section_text(section),
            blobs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.blobs.insert(name.into(), value);
    }

    /// Every parameter of `store`, under its own name.
    pub fn insert_store(&mut self, store: &ParamStore) {
        for (_, name, value) in store.iter() {
            self.blobs.insert(name.to_string(), value.clone());
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.blobs.get(name).ok_or_else(|| bad(format!("{} checkpoint has no blob {name:?}", self.tag)))
    }

    /// Overwrites every parameter of `store` from the blob of the same name.
    pub fn load_store(&self, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let blob = self.get(store.name(id))?;
            if blob.shape() != store.get(id).shape() {
                return Err(bad(format!(
                    "blob {:?} has shape {:?}, model expects {:?}",
                    store.name(id),
                    blob.shape(),
                    store.get(id).shape()
                )));
            }
            *store.get_mut(id) = blob.clone();
        }
        Ok(())
    }

    /// Fails unless the tag matches and `config` has the digest this
    /// checkpoint was written under.
    pub fn verify(&self, tag: &str, config: &PipelineConfig, section: Section) -> Result<()> {
        if self.tag != tag {
            return Err(bad(format!("expected a {tag} checkpoint, found {}", self.tag)));
        }
        let expected = config.digest(section);
        if expected != self.config_digest {
            return Err(Error::ConfigMismatch { expected: hex::encode(expected), found: hex::encode(self.config_digest) });
        }
        Ok(())
    }

    /// The embedded config section parsed back into a full config (other
    /// sections at their defaults).
    pub fn config(&self) -> Result<PipelineConfig> {
        PipelineConfig::parse(&self.config_text)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        push_str(&mut out, &self.tag);
        out.extend_from_slice(&self.config_digest);
        push_str(&mut out, &self.config_text);
        push_u32(&mut out, self.blobs.len());
        for (name, t) in &self.blobs {
            push_str(&mut out, name);
            push_u32(&mut out, 2);
            push_u32(&mut out, t.rows());
            push_u32(&mut out, t.cols());
            for &x in t.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(bad("missing KINMO1 magic"));
        }
        let tag = r.string()?;
        let config_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let config_text = r.string()?;
        let count = r.u32()?;
        let mut blobs = BTreeMap::new();
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let (rows, cols) = match dims.as_slice() {
                [n] => (1, *n),
                [a, b] => (*a, *b),
                _ => return Err(bad(format!("blob {name:?} has unsupported rank {ndim}"))),
            };
            let len = rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or_else(|| bad("shape overflow"))?;
            let data = r.take(len)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
            if blobs.insert(name.clone(), Tensor::from_vec(rows, cols, data)).is_some() {
                return Err(bad(format!("duplicate blob {name:?}")));
            }
        }
        if r.at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { tag, config_digest, config_text, blobs })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    fn sample() -> Checkpoint {
        let config = PipelineConfig::default();
        let mut store = ParamStore::new();
        store.normal("enc.w", 3, 4, 1.0, &mut rng(1));
        store.zeros("enc.b", 1, 4);
        let mut ck = Checkpoint::new("align", &config, Section::Align);
        ck.insert_store(&store);
        ck
    }

    #[test]
    fn bytes_round_trip() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), ck.to_bytes());
        assert_eq!(back.tag, "align");
        assert_eq!(back.config().unwrap().align, PipelineConfig::default().align);
    }

    #[test]
    fn mismatched_config_fails_loudly() {
        let ck = sample();
        let mut other = PipelineConfig::default();
        assert!(ck.verify("align", &other, Section::Align).is_ok());
        other.align.latent_dim = 64;
        assert!(matches!(ck.verify("align", &other, Section::Align), Err(Error::ConfigMismatch { .. })));
        assert!(ck.verify("rqvae", &PipelineConfig::default(), Section::Align).is_err());
    }

    #[test]
    fn load_store_checks_shapes() {
        let ck = sample();
        let mut store = ParamStore::new();
        store.zeros("enc.w", 3, 4);
        ck.load_store(&mut store).unwrap();
        assert_eq!(store.get(store.id("enc.w").unwrap()), ck.get("enc.w").unwrap());
        let mut wrong = ParamStore::new();
        wrong.zeros("enc.w", 4, 3);
        assert!(ck.load_store(&mut wrong).is_err());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 2]).is_err());
        assert!(Checkpoint::from_bytes(b"KINMO2").is_err());
    }
}
