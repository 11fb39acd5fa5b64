//! Dense item-item Gram matrix `G = XᵀX`, the only statistic training needs.
//!
//! Three column transforms are supported:
//!
//! * `cooccurrence`: plain `XᵀX`. For binary data this is the co-occurrence
//!   count matrix and every entry is an exact integer.
//! * `centered`: columns shifted to zero mean, computed as `XᵀX − n·μμᵀ`
//!   without densifying `X`.
//! * `standardized`: centered and scaled to unit (population) variance,
//!   `G_ij / (σ_i σ_j)`.
//!
//! Accumulation walks each user's sorted item list and adds outer products
//! into the upper triangle only; the lower triangle is a mirror copy, so the
//! result is exactly symmetric.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::format::{read_vocab_sidecar, write_vocab_sidecar};
use crate::data::{InteractionMatrix, SparseRow, Vocab, VocabHash};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramMode {
    Cooccurrence,
    Centered,
    Standardized,
}

impl GramMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GramMode::Cooccurrence => "cooccurrence",
            GramMode::Centered => "centered",
            GramMode::Standardized => "standardized",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(GramMode::Cooccurrence),
            1 => Some(GramMode::Centered),
            2 => Some(GramMode::Standardized),
            _ => None,
        }
    }
}

impl std::str::FromStr for GramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooccurrence" => Ok(GramMode::Cooccurrence),
            "centered" => Ok(GramMode::Centered),
            "standardized" => Ok(GramMode::Standardized),
            other => Err(Error::param("gram_mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for GramMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n_items: usize,
    /// Row-major `n_items x n_items`, exactly symmetric.
    values: Vec<f64>,
    mode: GramMode,
    column_means: Option<Vec<f64>>,
    column_stds: Option<Vec<f64>>,
    n_users_used: usize,
    items: Vocab,
}

impl GramMatrix {
    /// Wraps an explicit symmetric matrix (treated as a co-occurrence Gram).
    /// The lower triangle is overwritten with the upper one.
    pub fn from_dense(mut values: Vec<f64>, items: Vocab, n_users_used: usize) -> Result<Self> {
        let n = items.len();
        if values.len() != n * n {
            return Err(Error::param("values", format!("expected {} entries, got {}", n * n, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "non-finite entry"));
        }
        mirror_upper(&mut values, n);
        Ok(GramMatrix {
            n_items: n,
            values,
            mode: GramMode::Cooccurrence,
            column_means: None,
            column_stds: None,
            n_users_used,
            items,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_items + j]
    }

    pub fn mode(&self) -> GramMode {
        self.mode
    }

    pub fn column_means(&self) -> Option<&[f64]> {
        self.column_means.as_deref()
    }

    pub fn column_stds(&self) -> Option<&[f64]> {
        self.column_stds.as_deref()
    }

    pub fn n_users_used(&self) -> usize {
        self.n_users_used
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    pub fn vocab_hash(&self) -> VocabHash {
        self.items.hash()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n_items).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn mirror_upper(values: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
}

/// Upper bound on memory spent on per-thread partial Gram matrices.
const PARTIAL_BUDGET_BYTES: usize = 1 << 31;

fn cooccurrence_upper(x: &InteractionMatrix) -> Vec<f64> {
    let n = x.n_items();
    let n_users = x.n_users();
    let per_partial = n * n * std::mem::size_of::<f64>();
    let max_parts = (PARTIAL_BUDGET_BYTES / per_partial.max(1)).max(1);
    let parts = rayon::current_num_threads().min(max_parts).min(n_users.max(1)).max(1);

    let row_at = |u: usize| -> SparseRow<'_> { x.row(u) };
    if parts == 1 {
        let mut acc = vec![0.0; n * n];
        accumulate_rows(&mut acc, n, (0..n_users).map(row_at));
        return acc;
    }
    let chunk = n_users.div_ceil(parts);
    let partials: Vec<Vec<f64>> = (0..parts)
        .into_par_iter()
        .map(|p| {
            let mut acc = vec![0.0; n * n];
            let lo = p * chunk;
            let hi = ((p + 1) * chunk).min(n_users);
            accumulate_rows(&mut acc, n, (lo..hi).map(row_at));
            acc
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("at least one part");
    for part in iter {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

fn accumulate_rows<'a>(acc: &mut [f64], n: usize, rows: impl Iterator<Item = SparseRow<'a>>) {
    for row in rows {
        for (a, (&ia, &va)) in row.indices.iter().zip(row.values).enumerate() {
            let base = ia as usize * n;
            for (&ib, &vb) in row.indices[a..].iter().zip(&row.values[a..]) {
                acc[base + ib as usize] += va * vb;
            }
        }
    }
}

/// Builds the Gram matrix of `x` under the given column transform.
pub fn build_gram(x: &InteractionMatrix, mode: GramMode) -> Result<GramMatrix> {
    let n = x.n_items();
    if n == 0 {
        return Err(Error::param("n_items", "must be at least 1"));
    }
    let mut g = cooccurrence_upper(x);
    let n_users = x.n_users();

    let mut column_means = None;
    let mut column_stds = None;
    if mode != GramMode::Cooccurrence {
        let mut sums = vec![0.0; n];
        for row in x.rows() {
            for (i, v) in row.iter() {
                sums[i as usize] += v;
            }
        }
        let nu = n_users as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / nu).collect();
        for i in 0..n {
            for j in i..n {
                g[i * n + j] -= nu * means[i] * means[j];
            }
        }
        if mode == GramMode::Standardized {
            let mut stds = vec![0.0; n];
            for j in 0..n {
                let var = g[j * n + j] / nu;
                // A constant column leaves only round-off in its variance.
                let scale = means[j] * means[j];
                if !(var > 16.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)) {
                    return Err(Error::ZeroVariance {
                        item: x.items().id(j).to_string(),
                    });
                }
                stds[j] = var.sqrt();
            }
            for i in 0..n {
                for j in i..n {
                    g[i * n + j] /= stds[i] * stds[j];
                }
            }
            column_stds = Some(stds);
        }
        column_means = Some(means);
    }
    mirror_upper(&mut g, n);

    Ok(GramMatrix {
        n_items: n,
        values: g,
        mode,
        column_means,
        column_stds,
        n_users_used: n_users,
        items: x.items().clone(),
    })
}

/// Sums co-occurrence Gram matrices computed on disjoint user blocks.
pub fn merge_grams(parts: &[GramMatrix]) -> Result<GramMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::IncompatibleGram("no parts given".into()))?;
    let hash = first.vocab_hash();
    for (k, p) in parts.iter().enumerate() {
        if p.mode != GramMode::Cooccurrence {
            return Err(Error::IncompatibleGram(format!(
                "part {k} has mode {}; only co-occurrence Grams add up",
                p.mode
            )));
        }
        if p.n_items != first.n_items {
            return Err(Error::IncompatibleGram(format!(
                "part {k} has {} items, expected {}",
                p.n_items, first.n_items
            )));
        }
        if p.vocab_hash() != hash {
            return Err(Error::IncompatibleGram(format!("part {k} has a different item vocabulary")));
        }
    }
    let mut out = first.clone();
    for p in &parts[1..] {
        for (o, v) in out.values.iter_mut().zip(&p.values) {
            *o += v;
        }
        out.n_users_used += p.n_users_used;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Persistence: one JSON header line, then the row-major payload as
// little-endian f64. Item ids go to the `.vocab.json` sidecar.

const GRAM_FORMAT: &str = "ease-gram";
const GRAM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GramHeader {
    format: String,
    version: u32,
    n_items: usize,
    mode: GramMode,
    n_users_used: usize,
    vocab_hash: VocabHash,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    column_means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    column_stds: Option<Vec<f64>>,
}

impl GramMatrix {
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = GramHeader {
            format: GRAM_FORMAT.into(),
            version: GRAM_VERSION,
            n_items: self.n_items,
            mode: self.mode,
            n_users_used: self.n_users_used,
            vocab_hash: self.vocab_hash(),
            column_means: self.column_means.clone(),
            column_stds: self.column_stds.clone(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        write_f64s(&mut w, &self.values)?;
        w.flush()?;
        write_vocab_sidecar(path, None, &self.items)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (_, items) = read_vocab_sidecar(path)?;
        let mut r = BufReader::new(File::open(path)?);
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        let header: GramHeader =
            serde_json::from_slice(&line).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
        if header.format != GRAM_FORMAT || header.version != GRAM_VERSION {
            return Err(Error::format(path, "not a version-1 Gram file"));
        }
        header.vocab_hash.ensure_eq(&items.hash())?;
        if header.n_items != items.len() {
            return Err(Error::format(path, "item count disagrees with vocabulary"));
        }
        let n = header.n_items;
        let values = read_f64s(&mut r, n * n).map_err(|e| Error::format(path, e.to_string()))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::format(path, "trailing bytes after payload"));
        }
        Ok(GramMatrix {
            n_items: n,
            values,
            mode: header.mode,
            column_means: header.column_means,
            column_stds: header.column_stds,
            n_users_used: header.n_users_used,
            items,
        })
    }
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in values.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0u8; 8 * 4096];
    while out.len() < n {
        let take = (n - out.len()).min(4096);
        r.read_exact(&mut buf[..8 * take])?;
        out.extend(
            buf[..8 * take]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))),
        );
    }
    Ok(out)
}
