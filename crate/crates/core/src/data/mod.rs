//! Interaction data: ingestion, the sparse matrix, file formats and splits.

pub mod format;
pub mod ingest;
pub mod matrix;
pub mod split;
pub mod synthetic;
pub mod vocab;

pub use format::{load_matrix, save_matrix};
pub use ingest::{ingest, read_records, IngestOptions, Record};
pub use matrix::{InteractionMatrix, SparseRow, SparseVec};
pub use split::{split_strong, split_weak, EvalSplit, EvalUser, SplitManifest, SplitMode};
pub use vocab::{Vocab, VocabHash};
