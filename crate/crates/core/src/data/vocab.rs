use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Bijection between opaque external ids and dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary that assigns index `i` to `ids[i]`.
    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        if ids.len() > u32::MAX as usize {
            return Err(Error::param("vocab", "more than 2^32 ids"));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i as u32).is_some() {
                return Err(Error::param("vocab", format!("duplicate id `{id}`")));
            }
        }
        Ok(Vocab { ids, index })
    }

    /// Builds a vocabulary in natural order: numerically when every id is an
    /// integer, lexicographically otherwise. Duplicates are collapsed.
    pub fn natural<I: IntoIterator<Item = String>>(ids: I) -> Self {
        let mut ids: Vec<String> = ids.into_iter().collect();
        ids.sort_by(natural_cmp);
        ids.dedup();
        Self::from_ids(ids).expect("deduplicated")
    }

    /// Dense ids `"0".."n-1"`, used for synthetic data.
    pub fn range(n: usize) -> Self {
        Self::from_ids((0..n).map(|i| i.to_string()).collect()).expect("unique")
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// SHA-256 over the ids in index order, newline-terminated.
    pub fn hash(&self) -> VocabHash {
        let mut hasher = Sha256::new();
        for id in &self.ids {
            hasher.update(id.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        VocabHash(out)
    }

    /// Sub-vocabulary of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self::from_ids(indices.iter().map(|&i| self.ids[i].clone()).collect())
            .expect("subset of a bijection is a bijection")
    }
}

fn natural_cmp(a: &String, b: &String) -> std::cmp::Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Fingerprint of an item vocabulary; models and histories must agree on it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VocabHash(pub [u8; 32]);

impl VocabHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(VocabHash(arr))
    }

    /// Errors unless `self == other`.
    pub fn ensure_eq(&self, other: &VocabHash) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::VocabMismatch {
                expected: self.to_hex(),
                found: other.to_hex(),
            })
        }
    }
}

impl fmt::Debug for VocabHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VocabHash({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for VocabHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for VocabHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for VocabHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        VocabHash::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}
