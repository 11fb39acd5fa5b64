//! Closed-form item-item autoencoder for implicit-feedback recommendation.
//!
//! The model is a single item-item weight matrix `B` with a zero diagonal,
//! fitted in one shot from the Gram matrix `G = XᵀX`:
//!
//! ```text
//! P = (G + λI)⁻¹
//! B_ij = -P_ij / P_jj   (i ≠ j),   B_jj = 0
//! ```
//!
//! A user's scores are `x · B`, where `x` is their interaction row.
//!
//! ```
//! use ease_core::{build_gram, solve, GramMode, InteractionMatrix, SparseVec, score_user};
//!
//! let x = InteractionMatrix::from_dense_binary(&[vec![1, 1], vec![1, 0]]).unwrap();
//! let gram = build_gram(&x, GramMode::Cooccurrence).unwrap();
//! let model = solve(&gram, 1.0).unwrap();
//! assert!((model.weight(0, 1) - 1.0 / 3.0).abs() < 1e-12);
//! let scores = score_user(SparseVec::ones(&[0, 1]).as_row(), &model).unwrap();
//! assert!((scores[0] - 0.5).abs() < 1e-12);
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod gram;
pub mod linalg;
pub mod ranking;
pub mod solver;

pub use data::{
    ingest, load_matrix, read_records, save_matrix, split_strong, split_weak, EvalSplit, EvalUser, IngestOptions,
    InteractionMatrix, Record, SparseRow, SparseVec, SplitManifest, SplitMode, Vocab, VocabHash,
};
pub use error::{Error, Result};
pub use eval::{evaluate, evaluate_split, CosineItemItem, MetricReport, MetricSpec, Popularity, Report};
pub use gram::{build_gram, merge_grams, GramMatrix, GramMode};
pub use ranking::{recommend, recommend_batch, score_user, top_k, RankedList, Scorer};
pub use solver::{solve, solve_owned, solve_with_diagnostics, SolveDiagnostics, Variant, WeightModel};
