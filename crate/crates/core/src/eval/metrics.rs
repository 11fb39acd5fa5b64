use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankedList;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recall,
    Ndcg,
}

/// A metric at a cutoff, written `recall@20` or `ndcg@100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub metric: Metric,
    pub k: usize,
}

impl MetricSpec {
    pub fn recall(k: usize) -> Self {
        MetricSpec { metric: Metric::Recall, k }
    }

    pub fn ndcg(k: usize) -> Self {
        MetricSpec { metric: Metric::Ndcg, k }
    }

    pub fn compute(&self, ranked: &RankedList, held_out: &[u32]) -> Result<f64> {
        match self.metric {
            Metric::Recall => recall_at_k(ranked, held_out, self.k),
            Metric::Ndcg => ndcg_at_k(ranked, held_out, self.k),
        }
    }

    /// Parses a comma-separated list such as `recall@20,ndcg@100`.
    pub fn parse_list(s: &str) -> Result<Vec<MetricSpec>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.metric {
            Metric::Recall => "recall",
            Metric::Ndcg => "ndcg",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("metric", format!("`{s}` is not of the form recall@K or ndcg@K"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        let metric = match name.to_ascii_lowercase().as_str() {
            "recall" => Metric::Recall,
            "ndcg" => Metric::Ndcg,
            _ => return Err(bad()),
        };
        Ok(MetricSpec { metric, k })
    }
}

fn hits<'a>(ranked: &'a RankedList, held_out: &'a [u32], k: usize) -> impl Iterator<Item = bool> + 'a {
    ranked
        .item_indices()
        .take(k)
        .map(move |i| held_out.binary_search(&i).is_ok())
}

fn sorted(held_out: &[u32]) -> std::borrow::Cow<'_, [u32]> {
    if held_out.windows(2).all(|w| w[0] < w[1]) {
        std::borrow::Cow::Borrowed(held_out)
    } else {
        let mut v = held_out.to_vec();
        v.sort_unstable();
        v.dedup();
        std::borrow::Cow::Owned(v)
    }
}

/// `|top-k ∩ held_out| / min(k, |held_out|)`.
pub fn recall_at_k(ranked: &RankedList, held_out: &[u32], k: usize) -> Result<f64> {
    if held_out.is_empty() {
        return Err(Error::EmptyHeldOut);
    }
    let held = sorted(held_out);
    let n_hits = hits(ranked, &held, k).filter(|&h| h).count();
    Ok(n_hits as f64 / k.min(held.len()) as f64)
}

/// Binary-relevance NDCG with `1 / log2(rank + 1)` discounts and the ideal
/// DCG truncated at `min(k, |held_out|)`.
pub fn ndcg_at_k(ranked: &RankedList, held_out: &[u32], k: usize) -> Result<f64> {
    if held_out.is_empty() {
        return Err(Error::EmptyHeldOut);
    }
    let held = sorted(held_out);
    let dcg: f64 = hits(ranked, &held, k)
        .enumerate()
        .filter(|&(_, h)| h)
        .map(|(pos, _)| discount(pos))
        .sum();
    let idcg: f64 = (0..k.min(held.len())).map(discount).sum();
    Ok(dcg / idcg)
}

// 0-based position -> 1 / log2(position + 2)
fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}
