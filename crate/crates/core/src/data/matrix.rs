use crate::data::vocab::Vocab;
use crate::error::{Error, Result};

/// Borrowed view of one sparse row: strictly increasing item indices with
/// their positive values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_owned(&self) -> SparseVec {
        SparseVec {
            indices: self.indices.to_vec(),
            values: self.values.to_vec(),
        }
    }
}

/// Owned sparse vector with the same invariants as [`SparseRow`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    /// Sorts by index; panics on duplicates.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        assert!(
            pairs.windows(2).all(|w| w[0].0 < w[1].0),
            "duplicate index in sparse vector"
        );
        let (indices, values) = pairs.into_iter().unzip();
        SparseVec { indices, values }
    }

    /// Binary vector with ones at the given indices.
    pub fn ones(indices: &[u32]) -> Self {
        Self::from_pairs(indices.iter().map(|&i| (i, 1.0)).collect())
    }

    pub fn as_row(&self) -> SparseRow<'_> {
        SparseRow {
            indices: &self.indices,
            values: &self.values,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sparse user x item interaction matrix in compressed-row form, with
/// external id vocabularies for both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    users: Vocab,
    items: Vocab,
}

impl InteractionMatrix {
    /// Assembles a matrix from per-user rows, validating every invariant.
    pub fn from_rows(rows: Vec<SparseVec>, users: Vocab, items: Vocab) -> Result<Self> {
        if rows.len() != users.len() {
            return Err(Error::param(
                "rows",
                format!("{} rows for {} users", rows.len(), users.len()),
            ));
        }
        let nnz = rows.iter().map(SparseVec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (u, row) in rows.into_iter().enumerate() {
            if row.indices.len() != row.values.len() {
                return Err(Error::param("rows", format!("row {u}: length mismatch")));
            }
            if !row.indices.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::param(
                    "rows",
                    format!("row {u}: item indices not strictly increasing"),
                ));
            }
            if let Some(&last) = row.indices.last() {
                if last as usize >= items.len() {
                    return Err(Error::ItemOutOfRange {
                        index: last as usize,
                        n_items: items.len(),
                    });
                }
            }
            if let Some(v) = row.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::param(
                    "rows",
                    format!("row {u}: stored value {v} is not positive"),
                ));
            }
            indices.extend_from_slice(&row.indices);
            values.extend_from_slice(&row.values);
            indptr.push(indices.len());
        }
        Ok(InteractionMatrix {
            indptr,
            indices,
            values,
            users,
            items,
        })
    }

    /// Matrix with integer ids `0..n` on both axes from dense 0/1 rows.
    pub fn from_dense_binary(rows: &[Vec<u8>]) -> Result<Self> {
        let n_items = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| {
                let idx: Vec<u32> = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(i, _)| i as u32)
                    .collect();
                SparseVec::ones(&idx)
            })
            .collect();
        Self::from_rows(sparse, Vocab::range(rows.len()), Vocab::range(n_items))
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    pub fn row(&self, user: usize) -> SparseRow<'_> {
        let span = self.indptr[user]..self.indptr[user + 1];
        SparseRow {
            indices: &self.indices[span.clone()],
            values: &self.values[span],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = SparseRow<'_>> + '_ {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    /// Number of users with a stored entry for each item.
    pub fn item_activity(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_items()];
        for &i in &self.indices {
            counts[i as usize] += 1;
        }
        counts
    }

    /// True when every stored value equals 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// Rows for the given users, in the given order, over the same items.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let rows = users.iter().map(|&u| self.row(u).to_owned()).collect();
        Self::from_rows(rows, self.users.select(users), self.items.clone())
            .expect("rows of a valid matrix are valid")
    }

    /// Dense copy, row-major `n_users x n_items`. Test-scale only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|row| {
                let mut dense = vec![0.0; self.n_items()];
                for (i, v) in row.iter() {
                    dense[i as usize] = v;
                }
                dense
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_rows() {
        let rows = vec![SparseVec {
            indices: vec![2, 1],
            values: vec![1.0, 1.0],
        }];
        assert!(InteractionMatrix::from_rows(rows, Vocab::range(1), Vocab::range(3)).is_err());
    }

    #[test]
    fn rejects_nonpositive_values() {
        let rows = vec![SparseVec {
            indices: vec![0],
            values: vec![0.0],
        }];
        assert!(InteractionMatrix::from_rows(rows, Vocab::range(1), Vocab::range(1)).is_err());
    }

    #[test]
    fn activity_and_selection() {
        let x = InteractionMatrix::from_dense_binary(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 1, 0]])
            .unwrap();
        assert_eq!(x.item_activity(), vec![1, 3, 1]);
        let sub = x.select_users(&[2, 0]);
        assert_eq!(sub.users().ids(), &["2", "0"]);
        assert_eq!(sub.row(1).indices, &[0, 1]);
        assert_eq!(sub.nnz(), 3);
    }
}
