//! Scoring (`s = x · B`) and top-k selection.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::data::{SparseRow, Vocab, VocabHash};
use crate::error::{Error, Result};
use crate::solver::WeightModel;

/// Anything that maps a user's history to one score per item.
pub trait Scorer: Sync {
    fn n_items(&self) -> usize;

    fn vocab_hash(&self) -> VocabHash;

    /// Writes the scores for `history` into `out` (length `n_items`).
    /// Indices are already validated.
    fn score_into(&self, history: SparseRow<'_>, out: &mut [f64]);
}

impl Scorer for WeightModel {
    fn n_items(&self) -> usize {
        WeightModel::n_items(self)
    }

    fn vocab_hash(&self) -> VocabHash {
        WeightModel::vocab_hash(self)
    }

    fn score_into(&self, history: SparseRow<'_>, out: &mut [f64]) {
        out.fill(0.0);
        let transform = self.transform();
        let input_scale = transform.and_then(|t| t.input_scale.as_deref());
        for (i, v) in history.iter() {
            let v = match input_scale {
                Some(s) => v * s[i as usize],
                None => v,
            };
            let row = self.row(i as usize);
            for (o, w) in out.iter_mut().zip(row) {
                *o += v * w;
            }
        }
        if let Some(t) = transform {
            match &t.output_scale {
                Some(scale) => {
                    for ((o, s), c) in out.iter_mut().zip(scale).zip(&t.offset) {
                        *o = *o * s + c;
                    }
                }
                None => {
                    for (o, c) in out.iter_mut().zip(&t.offset) {
                        *o += c;
                    }
                }
            }
        }
    }
}

fn check_history(history: SparseRow<'_>, n_items: usize) -> Result<()> {
    match history.indices.iter().find(|&&i| i as usize >= n_items) {
        Some(&i) => Err(Error::ItemOutOfRange {
            index: i as usize,
            n_items,
        }),
        None => Ok(()),
    }
}

/// Dense score vector for one history.
pub fn score_user<S: Scorer + ?Sized>(history: SparseRow<'_>, scorer: &S) -> Result<Vec<f64>> {
    check_history(history, scorer.n_items())?;
    let mut out = vec![0.0; scorer.n_items()];
    scorer.score_into(history, &mut out);
    Ok(out)
}

/// [`score_user`] for a history whose item vocabulary is identified by
/// `history_vocab`; fails if it differs from the scorer's.
pub fn score_user_checked<S: Scorer + ?Sized>(
    history: SparseRow<'_>,
    history_vocab: &VocabHash,
    scorer: &S,
) -> Result<Vec<f64>> {
    scorer.vocab_hash().ensure_eq(history_vocab)?;
    score_user(history, scorer)
}

/// Top-k list for one user, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub user: String,
    pub items: Vec<(u32, f64)>,
}

impl RankedList {
    pub fn item_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.items.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

// Higher score first, then lower index.
fn rank_order(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best items not in `exclude` (sorted indices), ties broken by
/// ascending item index.
pub fn top_k(scores: &[f64], exclude: &[u32], k: usize) -> Vec<(u32, f64)> {
    if k == 0 {
        return Vec::new();
    }
    let mut candidates: Vec<(u32, f64)> = Vec::with_capacity(scores.len());
    let mut ex = exclude.iter().peekable();
    for (i, &s) in scores.iter().enumerate() {
        let i = i as u32;
        while ex.peek().is_some_and(|&&e| e < i) {
            ex.next();
        }
        if ex.peek() == Some(&&i) {
            continue;
        }
        candidates.push((i, s));
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_order);
    candidates
}

/// Scores and ranks one history. With `exclude_history` the history's items
/// are never recommended.
pub fn recommend<S: Scorer + ?Sized>(
    user: &str,
    history: SparseRow<'_>,
    scorer: &S,
    k: usize,
    exclude_history: bool,
) -> Result<RankedList> {
    let scores = score_user(history, scorer).map_err(|e| Error::User {
        user: user.to_string(),
        source: Box::new(e),
    })?;
    let exclude: &[u32] = if exclude_history { history.indices } else { &[] };
    Ok(RankedList {
        user: user.to_string(),
        items: top_k(&scores, exclude, k),
    })
}

/// [`recommend`] over many users in parallel; output order matches input.
pub fn recommend_batch<S: Scorer + ?Sized>(
    users: &[(&str, SparseRow<'_>)],
    scorer: &S,
    k: usize,
    exclude_history: bool,
) -> Result<Vec<RankedList>> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    users
        .par_iter()
        .map(|(user, history)| recommend(user, *history, scorer, k, exclude_history))
        .collect()
}

/// `user<TAB>item:score,item:score,...` with external item ids and scores
/// to 6 significant digits.
pub fn write_ranked_lists<W: Write>(lists: &[RankedList], items: &Vocab, mut w: W) -> std::io::Result<()> {
    for list in lists {
        write!(w, "{}\t", list.user)?;
        for (n, &(i, s)) in list.items.iter().enumerate() {
            if n > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{}:{}", items.id(i as usize), sig6(s))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Formats with 6 significant digits (`%.6g`-style).
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    // exponent after rounding to 6 digits, so 9.9999996 counts as 1e1
    let s = format!("{:.5e}", x);
    let (mantissa, e) = s.split_once('e').expect("exponent");
    let e: i32 = e.parse().expect("integer exponent");
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseVec;
    use crate::gram::GramMatrix;
    use crate::solver::solve;

    fn toy_model() -> WeightModel {
        let g = GramMatrix::from_dense(vec![2.0, 1.0, 1.0, 1.0], Vocab::range(2), 2).unwrap();
        solve(&g, 1.0).unwrap()
    }

    #[test]
    fn scores_from_worked_model() {
        let model = toy_model();
        let h = SparseVec::ones(&[0, 1]);
        let s = score_user(h.as_row(), &model).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 1.0 / 3.0).abs() < 1e-15);
        let empty = SparseVec::default();
        assert_eq!(score_user(empty.as_row(), &model).unwrap(), vec![0.0, 0.0]);
        let unit = SparseVec::ones(&[1]);
        let s = score_user(unit.as_row(), &model).unwrap();
        assert_eq!(s, model.row(1).to_vec());
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn out_of_range_and_vocab_mismatch() {
        let model = toy_model();
        let h = SparseVec::ones(&[2]);
        assert!(matches!(score_user(h.as_row(), &model), Err(Error::ItemOutOfRange { index: 2, .. })));
        let other = Vocab::from_ids(vec!["a".into(), "b".into()]).unwrap().hash();
        let ok = SparseVec::ones(&[0]);
        assert!(matches!(
            score_user_checked(ok.as_row(), &other, &model),
            Err(Error::VocabMismatch { .. })
        ));
        assert!(score_user_checked(ok.as_row(), &model.vocab_hash(), &model).is_ok());
    }

    #[test]
    fn top_k_examples() {
        let scores = [0.5, 1.0 / 3.0];
        assert_eq!(top_k(&scores, &[], 1)[0].0, 0);
        assert_eq!(top_k(&scores, &[0], 1)[0].0, 1);
        let mut tied = vec![0.0; 10];
        tied[3] = 1.0;
        tied[7] = 1.0;
        assert_eq!(top_k(&tied, &[], 1)[0].0, 3);
        assert_eq!(top_k(&tied, &[], 3).iter().map(|p| p.0).collect::<Vec<_>>(), vec![3, 7, 0]);
        // candidates exhausted
        assert_eq!(top_k(&scores, &[0, 1], 5), vec![]);
        assert_eq!(top_k(&scores, &[1], 5).len(), 1);
    }

    #[test]
    fn batch_matches_single_calls_and_order() {
        let model = toy_model();
        let h0 = SparseVec::ones(&[0]);
        let h1 = SparseVec::ones(&[1]);
        let users = [("a", h0.as_row()), ("b", h1.as_row())];
        let batch = recommend_batch(&users, &model, 2, true).unwrap();
        assert_eq!(batch[0], recommend("a", h0.as_row(), &model, 2, true).unwrap());
        let rev = [users[1], users[0]];
        let batch_rev = recommend_batch(&rev, &model, 2, true).unwrap();
        assert_eq!(batch_rev[0], batch[1]);
        assert_eq!(batch_rev[1], batch[0]);
        assert!(recommend_batch(&users, &model, 0, true).is_err());
    }

    #[test]
    fn batch_error_names_user() {
        let model = toy_model();
        let bad = SparseVec::ones(&[5]);
        let err = recommend_batch(&[("zed", bad.as_row())], &model, 1, true).unwrap_err();
        assert!(matches!(&err, Error::User { user, .. } if user == "zed"), "{err}");
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(-2.0 / 3.0), "-0.666667");
        assert_eq!(sig6(123456789.0), "1.23457e8");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn output_line_format() {
        let model = toy_model();
        let h = SparseVec::ones(&[0]);
        let lists = vec![recommend("u1", h.as_row(), &model, 2, false).unwrap()];
        let mut buf = Vec::new();
        write_ranked_lists(&lists, model.items(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u1\t1:0.333333,0:0\n");
    }
}
