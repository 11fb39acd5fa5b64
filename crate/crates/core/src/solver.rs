//! Closed-form training of the zero-diagonal item-item weight matrix.
//!
//! Minimizing `‖X − XB‖²_F + λ‖B‖²_F` subject to `diag(B) = 0` has the
//! solution
//!
//! ```text
//! P = (G + λI)⁻¹
//! B_ij = −P_ij / P_jj   (i ≠ j),   B_jj = 0
//! ```
//!
//! where `G = XᵀX`. The Lagrange multipliers that enforce the constraint are
//! `γ̃ = 1 ⊘ diag(P)`; see [`solve_with_diagnostics`].
//!
//! Training consumes the Gram buffer in place: `G + λI` is overwritten by
//! its inverse and then by `B`. [`solve`] copies the Gram matrix first,
//! [`solve_owned`] does not.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::format::{read_vocab_sidecar, write_vocab_sidecar};
use crate::data::{Vocab, VocabHash};
use crate::error::{Error, Result};
use crate::gram::{read_f64s, write_f64s, GramMatrix, GramMode};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    /// Negative weights replaced by zero after solving.
    ClampedNonneg,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::ClampedNonneg => "clamped_nonneg",
        }
    }
}

/// Trained model: dense `n x n` weights with an exactly zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightModel {
    n_items: usize,
    weights: Vec<f64>,
    lambda: f64,
    gram_mode: GramMode,
    column_means: Option<Vec<f64>>,
    column_stds: Option<Vec<f64>>,
    items: Vocab,
    variant: Variant,
    transform: Option<ScoreTransform>,
}

/// Maps raw histories into the Gram's column space and scores back into the
/// original space: `score = out ⊙ ((x ⊙ in) · B) + offset`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ScoreTransform {
    pub input_scale: Option<Vec<f64>>,
    pub output_scale: Option<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl WeightModel {
    fn new(
        n_items: usize,
        weights: Vec<f64>,
        lambda: f64,
        gram_mode: GramMode,
        column_means: Option<Vec<f64>>,
        column_stds: Option<Vec<f64>>,
        items: Vocab,
        variant: Variant,
    ) -> Self {
        let mut model = WeightModel {
            n_items,
            weights,
            lambda,
            gram_mode,
            column_means,
            column_stds,
            items,
            variant,
            transform: None,
        };
        model.transform = model.build_transform();
        model
    }

    fn build_transform(&self) -> Option<ScoreTransform> {
        let means = self.column_means.as_ref()?;
        let n = self.n_items;
        let stds = self.column_stds.as_ref();
        // shift = (μ ⊘ σ) for standardized, μ for centered
        let shift: Vec<f64> = match stds {
            Some(s) => means.iter().zip(s).map(|(m, s)| m / s).collect(),
            None => means.clone(),
        };
        let mut shifted = vec![0.0; n];
        for (i, &c) in shift.iter().enumerate() {
            if c != 0.0 {
                let row = &self.weights[i * n..(i + 1) * n];
                for (o, w) in shifted.iter_mut().zip(row) {
                    *o += c * w;
                }
            }
        }
        let offset = match stds {
            Some(s) => (0..n).map(|j| means[j] - s[j] * shifted[j]).collect(),
            None => (0..n).map(|j| means[j] - shifted[j]).collect(),
        };
        Some(ScoreTransform {
            input_scale: stds.map(|s| s.iter().map(|v| 1.0 / v).collect()),
            output_scale: stds.cloned(),
            offset,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_items + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_items..(i + 1) * self.n_items]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram_mode(&self) -> GramMode {
        self.gram_mode
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    pub fn vocab_hash(&self) -> VocabHash {
        self.items.hash()
    }

    pub fn column_means(&self) -> Option<&[f64]> {
        self.column_means.as_deref()
    }

    pub fn column_stds(&self) -> Option<&[f64]> {
        self.column_stds.as_deref()
    }

    pub(crate) fn transform(&self) -> Option<&ScoreTransform> {
        self.transform.as_ref()
    }

    /// Share of strictly negative off-diagonal weights.
    pub fn negative_fraction(&self) -> f64 {
        let n = self.n_items;
        if n < 2 {
            return 0.0;
        }
        let negatives = self.off_diagonal().filter(|&w| w < 0.0).count();
        negatives as f64 / (n * (n - 1)) as f64
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_items;
        self.weights
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &w)| w)
    }

    /// Copy with every negative weight set to zero.
    pub fn clamp_nonneg(&self) -> WeightModel {
        let weights = self.weights.iter().map(|&w| if w < 0.0 { 0.0 } else { w }).collect();
        WeightModel::new(
            self.n_items,
            weights,
            self.lambda,
            self.gram_mode,
            self.column_means.clone(),
            self.column_stds.clone(),
            self.items.clone(),
            Variant::ClampedNonneg,
        )
    }
}

/// Intermediate quantities of the closed-form solution.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    /// `1 ⊘ diag(P)`: the multipliers that zero the diagonal.
    pub gamma_tilde: Vec<f64>,
    /// Smallest Cholesky pivot of `G + λI`.
    pub min_pivot: f64,
    /// Share of strictly negative off-diagonal weights.
    pub negative_fraction: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param("lambda", format!("must be a positive finite number, got {lambda}")))
    }
}

/// Trains from a borrowed Gram matrix (copied once).
pub fn solve(gram: &GramMatrix, lambda: f64) -> Result<WeightModel> {
    solve_with_diagnostics(gram.clone(), lambda).map(|(m, _)| m)
}

/// Trains reusing the Gram matrix's buffer.
pub fn solve_owned(gram: GramMatrix, lambda: f64) -> Result<WeightModel> {
    solve_with_diagnostics(gram, lambda).map(|(m, _)| m)
}

/// Diagnostics only; the weights are discarded.
pub fn solve_diagnostics(gram: &GramMatrix, lambda: f64) -> Result<SolveDiagnostics> {
    solve_with_diagnostics(gram.clone(), lambda).map(|(_, d)| d)
}

pub fn solve_with_diagnostics(gram: GramMatrix, lambda: f64) -> Result<(WeightModel, SolveDiagnostics)> {
    check_lambda(lambda)?;
    let n = gram.n_items();
    let mode = gram.mode();
    let means = gram.column_means().map(<[f64]>::to_vec);
    let stds = gram.column_stds().map(<[f64]>::to_vec);
    let items = gram.items().clone();
    let mut buf = gram.into_values();

    for j in 0..n {
        buf[j * n + j] += lambda;
    }
    let factorization = linalg::spd_inverse_in_place(&mut buf, n)
        .map_err(|e| Error::NotPositiveDefinite { index: e.index, pivot: e.pivot })?;

    let p_diag: Vec<f64> = (0..n).map(|j| buf[j * n + j]).collect();
    let inv_diag: Vec<f64> = p_diag.iter().map(|p| 1.0 / p).collect();
    for i in 0..n {
        let row = &mut buf[i * n..(i + 1) * n];
        for (w, p_jj) in row.iter_mut().zip(&p_diag) {
            *w = -*w / p_jj;
        }
        row[i] = 0.0;
    }
    if let Some(k) = buf.iter().position(|w| !w.is_finite()) {
        return Err(Error::NotPositiveDefinite {
            index: k % n,
            pivot: factorization.min_pivot,
        });
    }

    let model = WeightModel::new(n, buf, lambda, mode, means, stds, items, Variant::Full);
    let diagnostics = SolveDiagnostics {
        gamma_tilde: inv_diag,
        min_pivot: factorization.min_pivot,
        negative_fraction: model.negative_fraction(),
    };
    Ok((model, diagnostics))
}

// ---------------------------------------------------------------------------
// Model file:
//   b"EASR" | version u32 | n_items u64 | lambda f64 | gram_mode u8 |
//   variant u8 | item-vocab SHA-256 (32 bytes) | B (n², row-major f64) |
//   column means (n f64, non-cooccurrence modes) |
//   column stds (n f64, standardized mode)
// All integers and floats little-endian. Item ids go to the sidecar.

const MAGIC: &[u8; 4] = b"EASR";
const MODEL_VERSION: u32 = 1;

impl WeightModel {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_items as u64).to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&[self.gram_mode.to_byte(), self.variant as u8])?;
        w.write_all(&self.vocab_hash().0)?;
        write_f64s(w, &self.weights)?;
        if let Some(m) = &self.column_means {
            write_f64s(w, m)?;
        }
        if let Some(s) = &self.column_stds {
            write_f64s(w, s)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        write_vocab_sidecar(path, None, &self.items)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (_, items) = read_vocab_sidecar(path)?;
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r, items).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::format(path, "truncated model file")
            }
            other => other,
        })
    }

    pub fn read_from<R: Read>(r: &mut R, items: Vocab) -> Result<Self> {
        let bad = |reason: &str| Error::format("<model>", reason);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a model file (bad magic)"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported model version {version}")));
        }
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let lambda = f64::from_le_bytes(b8);
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let mode = GramMode::from_byte(flags[0]).ok_or_else(|| bad("unknown gram mode"))?;
        let variant = match flags[1] {
            0 => Variant::Full,
            1 => Variant::ClampedNonneg,
            _ => return Err(bad("unknown variant")),
        };
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        VocabHash(hash).ensure_eq(&items.hash())?;
        if n != items.len() {
            return Err(bad("item count disagrees with vocabulary"));
        }
        let weights = read_f64s(r, n * n)?;
        let means = if mode != GramMode::Cooccurrence { Some(read_f64s(r, n)?) } else { None };
        let stds = if mode == GramMode::Standardized { Some(read_f64s(r, n)?) } else { None };
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(bad("trailing bytes after payload"));
        }
        check_lambda(lambda)?;
        if (0..n).any(|j| weights[j * n + j] != 0.0) {
            return Err(bad("non-zero diagonal weight"));
        }
        Ok(WeightModel::new(n, weights, lambda, mode, means, stds, items, variant))
    }
}
