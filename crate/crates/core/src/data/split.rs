//! Train/validation/test partitions for strong and weak generalization.
//!
//! Strong: held-out users are removed from training entirely; each of their
//! histories is cut into a fold-in part (model input) and a held-out part
//! (ground truth). Weak: every user stays in training with a fraction of
//! their items, the rest is held out.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::format::{load_matrix, save_matrix};
use crate::data::matrix::{InteractionMatrix, SparseRow, SparseVec};
use crate::data::vocab::VocabHash;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Strong,
    Weak,
}

/// One evaluated user: the history fed to the model and the items to recover.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalUser {
    pub user: String,
    pub fold_in: SparseVec,
    /// Sorted, non-empty.
    pub held_out: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSplit {
    pub mode: SplitMode,
    pub seed: u64,
    pub train: InteractionMatrix,
    pub validation: Vec<EvalUser>,
    pub test: Vec<EvalUser>,
    /// Users left out of evaluation because their held-out set would be empty.
    pub skipped: Vec<String>,
}

impl EvalSplit {
    pub fn item_vocab_hash(&self) -> VocabHash {
        self.train.items().hash()
    }
}

fn check_fraction(name: &'static str, f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("{f} is not in (0, 1)")))
    }
}

/// Shuffled copy of a row's positions.
fn shuffled_positions(row: SparseRow<'_>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..row.len()).collect();
    pos.shuffle(rng);
    pos
}

fn partition(row: SparseRow<'_>, positions: &[usize], n_fold_in: usize) -> (SparseVec, Vec<u32>) {
    let mut fold_in: Vec<usize> = positions[..n_fold_in].to_vec();
    fold_in.sort_unstable();
    let mut held_out: Vec<u32> = positions[n_fold_in..].iter().map(|&p| row.indices[p]).collect();
    held_out.sort_unstable();
    let fold_in = SparseVec {
        indices: fold_in.iter().map(|&p| row.indices[p]).collect(),
        values: fold_in.iter().map(|&p| row.values[p]).collect(),
    };
    (fold_in, held_out)
}

/// Fold-in size for strong splits: `max(1, round(f * n))`.
pub fn strong_fold_in_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).max(1)
}

/// Training size for weak splits: `floor(f * n)`, at least 1 when `n >= 2`.
pub fn weak_train_size(fraction: f64, n: usize) -> usize {
    let k = (fraction * n as f64).floor() as usize;
    if n >= 2 {
        k.max(1)
    } else {
        n
    }
}

pub fn split_strong(
    x: &InteractionMatrix,
    n_val_users: usize,
    n_test_users: usize,
    fold_in_fraction: f64,
    seed: u64,
) -> Result<EvalSplit> {
    check_fraction("fold_in_fraction", fold_in_fraction)?;
    if n_val_users + n_test_users >= x.n_users() {
        return Err(Error::param(
            "n_val_users + n_test_users",
            format!(
                "{} held-out users leave no training users out of {}",
                n_val_users + n_test_users,
                x.n_users()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.n_users()).collect();
    order.shuffle(&mut rng);

    let mut val_users = order[..n_val_users].to_vec();
    let mut test_users = order[n_val_users..n_val_users + n_test_users].to_vec();
    let mut train_users = order[n_val_users + n_test_users..].to_vec();
    val_users.sort_unstable();
    test_users.sort_unstable();
    train_users.sort_unstable();

    let mut skipped = Vec::new();
    let mut fold = |users: &[usize], rng: &mut ChaCha8Rng| -> Vec<EvalUser> {
        let mut out = Vec::with_capacity(users.len());
        for &u in users {
            let row = x.row(u);
            let positions = shuffled_positions(row, rng);
            let n_fold_in = strong_fold_in_size(fold_in_fraction, row.len());
            if n_fold_in >= row.len() {
                skipped.push(x.users().id(u).to_string());
                continue;
            }
            let (fold_in, held_out) = partition(row, &positions, n_fold_in);
            out.push(EvalUser {
                user: x.users().id(u).to_string(),
                fold_in,
                held_out,
            });
        }
        out
    };
    let validation = fold(&val_users, &mut rng);
    let test = fold(&test_users, &mut rng);

    Ok(EvalSplit {
        mode: SplitMode::Strong,
        seed,
        train: x.select_users(&train_users),
        validation,
        test,
        skipped,
    })
}

pub fn split_weak(x: &InteractionMatrix, train_fraction: f64, seed: u64) -> Result<EvalSplit> {
    check_fraction("train_fraction", train_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::with_capacity(x.n_users());
    let mut test = Vec::new();
    let mut skipped = Vec::new();
    for (u, row) in x.rows().enumerate() {
        let positions = shuffled_positions(row, &mut rng);
        let n_train = weak_train_size(train_fraction, row.len());
        let (fold_in, held_out) = partition(row, &positions, n_train);
        train_rows.push(fold_in.clone());
        if held_out.is_empty() {
            skipped.push(x.users().id(u).to_string());
        } else {
            test.push(EvalUser {
                user: x.users().id(u).to_string(),
                fold_in,
                held_out,
            });
        }
    }
    let train = InteractionMatrix::from_rows(train_rows, x.users().clone(), x.items().clone())?;
    Ok(EvalSplit {
        mode: SplitMode::Weak,
        seed,
        train,
        validation: Vec::new(),
        test,
        skipped,
    })
}

// ---------------------------------------------------------------------------
// Persistence: a split directory holds
//   train.txt (+ train.txt.vocab.json)  canonical training matrix
//   validation.tsv, test.tsv            user<TAB>idx:val,...<TAB>idx,idx,...
//   manifest.json

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: SplitMode,
    pub seed: u64,
    pub n_train_users: usize,
    pub n_validation_users: usize,
    pub n_test_users: usize,
    pub n_items: usize,
    pub item_vocab_hash: VocabHash,
    /// Strong mode: train, validation and test user sets are pairwise disjoint.
    pub users_disjoint: bool,
    pub skipped: Vec<String>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl EvalSplit {
    pub fn manifest(&self, params: serde_json::Value) -> SplitManifest {
        use std::collections::HashSet;
        let train: HashSet<&str> = self.train.users().ids().iter().map(String::as_str).collect();
        let val: HashSet<&str> = self.validation.iter().map(|u| u.user.as_str()).collect();
        let test: HashSet<&str> = self.test.iter().map(|u| u.user.as_str()).collect();
        let users_disjoint =
            train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test);
        SplitManifest {
            mode: self.mode,
            seed: self.seed,
            n_train_users: self.train.n_users(),
            n_validation_users: self.validation.len(),
            n_test_users: self.test.len(),
            n_items: self.train.n_items(),
            item_vocab_hash: self.item_vocab_hash(),
            users_disjoint,
            skipped: self.skipped.clone(),
            params,
        }
    }

    pub fn save(&self, dir: &Path, params: serde_json::Value) -> Result<SplitManifest> {
        std::fs::create_dir_all(dir)?;
        save_matrix(&self.train, &dir.join("train.txt"))?;
        write_eval_users(&self.validation, &dir.join("validation.tsv"))?;
        write_eval_users(&self.test, &dir.join("test.tsv"))?;
        let manifest = self.manifest(params);
        let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<EvalSplit> {
        let manifest_path = dir.join("manifest.json");
        let manifest: SplitManifest = serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
            .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        let train = load_matrix(&dir.join("train.txt"))?;
        manifest.item_vocab_hash.ensure_eq(&train.items().hash())?;
        let n_items = train.n_items();
        let validation = read_eval_users(&dir.join("validation.tsv"), n_items)?;
        let test = read_eval_users(&dir.join("test.tsv"), n_items)?;
        Ok(EvalSplit {
            mode: manifest.mode,
            seed: manifest.seed,
            train,
            validation,
            test,
            skipped: manifest.skipped,
        })
    }
}

fn write_eval_users(users: &[EvalUser], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for u in users {
        let fold_in: Vec<String> = u
            .fold_in
            .as_row()
            .iter()
            .map(|(i, v)| format!("{i}:{v}"))
            .collect();
        let held_out: Vec<String> = u.held_out.iter().map(u32::to_string).collect();
        writeln!(w, "{}\t{}\t{}", u.user, fold_in.join(","), held_out.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn read_eval_users(path: &Path, n_items: usize) -> Result<Vec<EvalUser>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::format(path, format!("line {}: {reason}", n + 1));
        let mut fields = line.split('\t');
        let (Some(user), Some(fold_in), Some(held_out), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let mut pairs = Vec::new();
        for tok in fold_in.split(',').filter(|t| !t.is_empty()) {
            let (i, v) = tok.split_once(':').ok_or_else(|| bad("fold-in entry lacks `:`"))?;
            let i: u32 = i.parse().map_err(|_| bad("bad item index"))?;
            let v: f64 = v.parse().map_err(|_| bad("bad value"))?;
            if i as usize >= n_items {
                return Err(bad("item index out of range"));
            }
            pairs.push((i, v));
        }
        let mut held: Vec<u32> = Vec::new();
        for tok in held_out.split(',').filter(|t| !t.is_empty()) {
            let i: u32 = tok.parse().map_err(|_| bad("bad item index"))?;
            if i as usize >= n_items {
                return Err(bad("item index out of range"));
            }
            held.push(i);
        }
        held.sort_unstable();
        if held.is_empty() {
            return Err(bad("empty held-out set"));
        }
        out.push(EvalUser {
            user: user.to_string(),
            fold_in: SparseVec::from_pairs(pairs),
            held_out: held,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::vocab::Vocab;
    use std::collections::HashSet;

    fn matrix(items_per_user: &[usize], n_items: usize) -> InteractionMatrix {
        let rows = items_per_user
            .iter()
            .map(|&k| SparseVec::ones(&(0..k as u32).collect::<Vec<_>>()))
            .collect();
        InteractionMatrix::from_rows(rows, Vocab::range(items_per_user.len()), Vocab::range(n_items))
            .unwrap()
    }

    #[test]
    fn strong_split_sizes() {
        let x = matrix(&[10; 10], 10);
        let s = split_strong(&x, 2, 2, 0.8, 7).unwrap();
        assert_eq!(s.train.n_users(), 6);
        assert_eq!((s.validation.len(), s.test.len()), (2, 2));
        for u in s.validation.iter().chain(&s.test) {
            assert_eq!(u.fold_in.len(), 8);
            assert_eq!(u.held_out.len(), 2);
        }
    }

    #[test]
    fn strong_rounding_on_two_items() {
        let x = matrix(&[2, 2, 2, 2], 2);
        let s = split_strong(&x, 1, 1, 0.5, 1).unwrap();
        for u in s.validation.iter().chain(&s.test) {
            assert_eq!((u.fold_in.len(), u.held_out.len()), (1, 1));
        }
    }

    #[test]
    fn strong_skips_users_without_held_out_items() {
        // round(0.8 * 1) = 1 = n, so single-item users cannot be evaluated
        let x = matrix(&[1, 1, 5, 5, 5], 5);
        let s = split_strong(&x, 2, 2, 0.8, 3).unwrap();
        let evaluated = s.validation.len() + s.test.len();
        assert_eq!(evaluated + s.skipped.len(), 4);
        assert!(s.train.n_users() == 1);
        assert!(s.validation.iter().chain(&s.test).all(|u| !u.held_out.is_empty()));
    }

    #[test]
    fn strong_split_is_deterministic_and_disjoint() {
        let x = matrix(&[3, 4, 5, 6, 7, 8, 9, 10, 3, 4, 5, 6], 10);
        let a = split_strong(&x, 3, 3, 0.6, 42).unwrap();
        let b = split_strong(&x, 3, 3, 0.6, 42).unwrap();
        assert_eq!(a, b);
        let c = split_strong(&x, 3, 3, 0.6, 43).unwrap();
        assert_ne!(a, c);
        assert!(a.manifest(serde_json::Value::Null).users_disjoint);
        let train: HashSet<_> = a.train.users().ids().iter().cloned().collect();
        assert!(a.test.iter().all(|u| !train.contains(&u.user)));
    }

    #[test]
    fn strong_rejects_bad_parameters() {
        let x = matrix(&[3; 4], 3);
        assert!(split_strong(&x, 2, 2, 0.5, 0).is_err());
        assert!(split_strong(&x, 1, 1, 1.0, 0).is_err());
        assert!(split_strong(&x, 1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn weak_split_thirty_percent() {
        let x = matrix(&[10, 4, 1], 10);
        let s = split_weak(&x, 0.3, 5).unwrap();
        assert_eq!(s.test[0].fold_in.len(), 3);
        assert_eq!(s.test[0].held_out.len(), 7);
        // floor(1.2) = 1 for the 4-item user
        assert_eq!(s.test[1].fold_in.len(), 1);
        // single-item user: kept in training, not evaluated
        assert_eq!(s.skipped, vec!["2".to_string()]);
        assert_eq!(s.train.row(2).len(), 1);
        assert_eq!(s.train.n_users(), 3);
    }

    #[test]
    fn weak_split_partitions_each_user() {
        let x = matrix(&[4, 7, 9], 9);
        let s = split_weak(&x, 0.5, 11).unwrap();
        assert_eq!(s.test[0].fold_in.len(), 2);
        for (u, eu) in s.test.iter().enumerate() {
            let fold: HashSet<u32> = eu.fold_in.indices.iter().copied().collect();
            let held: HashSet<u32> = eu.held_out.iter().copied().collect();
            assert!(fold.is_disjoint(&held));
            let all: HashSet<u32> = x.row(u).indices.iter().copied().collect();
            assert_eq!(&fold | &held, all);
            assert_eq!(s.train.row(u).indices, &eu.fold_in.indices[..]);
        }
        assert!(split_weak(&x, 1.5, 0).is_err());
    }

    #[test]
    fn directory_round_trip() {
        let x = matrix(&[3, 4, 5, 6, 7, 8], 8);
        let s = split_strong(&x, 2, 2, 0.5, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = s.save(dir.path(), serde_json::json!({"fold_in_fraction": 0.5})).unwrap();
        assert!(manifest.users_disjoint);
        assert_eq!(EvalSplit::load(dir.path()).unwrap(), s);
    }
}
