//! Reference scorers sharing the EASE ranking and exclusion path.

use crate::data::{InteractionMatrix, SparseRow, VocabHash};
use crate::error::Result;
use crate::gram::{build_gram, GramMatrix, GramMode};
use crate::ranking::Scorer;

/// Ranks every user's candidates by training-set item popularity (number of
/// users who interacted with the item).
#[derive(Clone, Debug, PartialEq)]
pub struct Popularity {
    counts: Vec<f64>,
    vocab_hash: VocabHash,
}

impl Popularity {
    pub fn fit(train: &InteractionMatrix) -> Self {
        Popularity {
            counts: train.item_activity().into_iter().map(|c| c as f64).collect(),
            vocab_hash: train.items().hash(),
        }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }
}

impl Scorer for Popularity {
    fn n_items(&self) -> usize {
        self.counts.len()
    }

    fn vocab_hash(&self) -> VocabHash {
        self.vocab_hash
    }

    fn score_into(&self, _history: SparseRow<'_>, out: &mut [f64]) {
        out.copy_from_slice(&self.counts);
    }
}

/// Item-item neighborhood scorer on cosine similarity of item columns:
/// `C_ij = G_ij / sqrt(G_ii G_jj)`, zero diagonal, `s = x · C`.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineItemItem {
    n_items: usize,
    similarity: Vec<f64>,
    vocab_hash: VocabHash,
}

impl CosineItemItem {
    pub fn fit(train: &InteractionMatrix) -> Result<Self> {
        Ok(Self::from_gram(&build_gram(train, GramMode::Cooccurrence)?))
    }

    pub fn from_gram(gram: &GramMatrix) -> Self {
        let n = gram.n_items();
        let norms: Vec<f64> = gram.diag().iter().map(|d| d.sqrt()).collect();
        let mut similarity = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && norms[i] > 0.0 && norms[j] > 0.0 {
                    similarity[i * n + j] = gram.get(i, j) / (norms[i] * norms[j]);
                }
            }
        }
        CosineItemItem {
            n_items: n,
            similarity,
            vocab_hash: gram.vocab_hash(),
        }
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.n_items + j]
    }
}

impl Scorer for CosineItemItem {
    fn n_items(&self) -> usize {
        self.n_items
    }

    fn vocab_hash(&self) -> VocabHash {
        self.vocab_hash
    }

    fn score_into(&self, history: SparseRow<'_>, out: &mut [f64]) {
        out.fill(0.0);
        let n = self.n_items;
        for (i, v) in history.iter() {
            let row = &self.similarity[i as usize * n..(i as usize + 1) * n];
            for (o, c) in out.iter_mut().zip(row) {
                *o += v * c;
            }
        }
    }
}
