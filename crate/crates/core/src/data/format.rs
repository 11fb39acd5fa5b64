//! Canonical on-disk matrix format.
//!
//! ```text
//! # users=<n> items=<m> nnz=<k>
//! <user_idx> <item_idx> <value>
//! ...
//! ```
//!
//! Triples are sorted by (user, item). Values are written in shortest
//! round-trip form, so reading back reproduces the matrix exactly. The id
//! vocabularies live in a JSON sidecar next to the matrix, see
//! [`sidecar_path`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::ingest::Record;
use crate::data::matrix::{InteractionMatrix, SparseVec};
use crate::data::vocab::Vocab;
use crate::error::{Error, Result};

/// `<path>.vocab.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".vocab.json");
    PathBuf::from(name)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct VocabFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<String>>,
    pub items: Vec<String>,
}

pub(crate) fn write_vocab_sidecar(path: &Path, users: Option<&Vocab>, items: &Vocab) -> Result<()> {
    let file = VocabFile {
        users: users.map(|u| u.ids().to_vec()),
        items: items.ids().to_vec(),
    };
    let mut w = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn read_vocab_sidecar(path: &Path) -> Result<(Option<Vocab>, Vocab)> {
    let side = sidecar_path(path);
    let file: VocabFile = serde_json::from_reader(BufReader::new(File::open(&side)?))
        .map_err(|e| Error::format(&side, e.to_string()))?;
    let users = file
        .users
        .map(Vocab::from_ids)
        .transpose()
        .map_err(|e| Error::format(&side, e.to_string()))?;
    let items = Vocab::from_ids(file.items).map_err(|e| Error::format(&side, e.to_string()))?;
    Ok((users, items))
}

pub fn write_matrix<W: Write>(x: &InteractionMatrix, mut w: W) -> Result<()> {
    writeln!(
        w,
        "# users={} items={} nnz={}",
        x.n_users(),
        x.n_items(),
        x.nnz()
    )?;
    for (u, row) in x.rows().enumerate() {
        for (i, v) in row.iter() {
            writeln!(w, "{u} {i} {v}")?;
        }
    }
    Ok(())
}

/// Writes the matrix to `path` and both vocabularies to its sidecar.
pub fn save_matrix(x: &InteractionMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(x, &mut w)?;
    w.flush()?;
    write_vocab_sidecar(path, Some(x.users()), x.items())
}

pub fn load_matrix(path: &Path) -> Result<InteractionMatrix> {
    let (users, items) = read_vocab_sidecar(path)?;
    let users = users.ok_or_else(|| Error::format(sidecar_path(path), "missing user vocabulary"))?;
    let reader = BufReader::new(File::open(path)?);
    read_matrix(reader, users, items).map_err(|e| match e {
        Error::Format { reason, .. } => Error::format(path, reason),
        other => other,
    })
}

pub fn read_matrix<R: BufRead>(reader: R, users: Vocab, items: Vocab) -> Result<InteractionMatrix> {
    let bad = |reason: String| Error::format("<matrix>", reason);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let (n_users, n_items, nnz) = parse_header(&header).ok_or_else(|| bad(format!("bad header `{header}`")))?;
    if n_users != users.len() || n_items != items.len() {
        return Err(bad(format!(
            "header says {n_users}x{n_items}, vocabulary has {}x{}",
            users.len(),
            items.len()
        )));
    }

    let mut rows = vec![SparseVec::default(); n_users];
    let mut last: Option<(usize, u32)> = None;
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_ascii_whitespace();
        let parsed = (|| {
            let u: usize = parts.next()?.parse().ok()?;
            let i: u32 = parts.next()?.parse().ok()?;
            let v: f64 = parts.next()?.parse().ok()?;
            parts.next().is_none().then_some((u, i, v))
        })();
        let (u, i, v) = parsed.ok_or_else(|| bad(format!("line {}: malformed triple", lineno + 2)))?;
        if u >= n_users {
            return Err(bad(format!("line {}: user index {u} out of range", lineno + 2)));
        }
        if last.is_some_and(|prev| prev >= (u, i)) {
            return Err(bad(format!("line {}: triples not strictly sorted", lineno + 2)));
        }
        last = Some((u, i));
        rows[u].indices.push(i);
        rows[u].values.push(v);
        count += 1;
    }
    if count != nnz {
        return Err(bad(format!("header says nnz={nnz}, found {count}")));
    }
    InteractionMatrix::from_rows(rows, users, items)
}

fn parse_header(line: &str) -> Option<(usize, usize, usize)> {
    let rest = line.strip_prefix('#')?.trim();
    let mut users = None;
    let mut items = None;
    let mut nnz = None;
    for field in rest.split_ascii_whitespace() {
        let (key, value) = field.split_once('=')?;
        let value: usize = value.parse().ok()?;
        match key {
            "users" => users = Some(value),
            "items" => items = Some(value),
            "nnz" => nnz = Some(value),
            _ => return None,
        }
    }
    Some((users?, items?, nnz?))
}

/// The matrix as an interaction stream with external ids, suitable for
/// feeding back into [`crate::data::ingest`].
pub fn to_records(x: &InteractionMatrix) -> Vec<Record> {
    x.rows()
        .enumerate()
        .flat_map(|(u, row)| {
            row.iter().map(move |(i, v)| {
                Record::new(x.users().id(u), x.items().id(i as usize), Some(v))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest::{ingest, IngestOptions};
    use proptest::prelude::*;

    fn sample() -> InteractionMatrix {
        let rows = vec![
            SparseVec::from_pairs(vec![(0, 1.0), (2, 0.1)]),
            SparseVec::from_pairs(vec![(1, 3.5)]),
        ];
        let users = Vocab::from_ids(vec!["alice".into(), "bob".into()]).unwrap();
        let items = Vocab::from_ids(vec!["x".into(), "y".into(), "z".into()]).unwrap();
        InteractionMatrix::from_rows(rows, users, items).unwrap()
    }

    #[test]
    fn text_layout() {
        let mut buf = Vec::new();
        write_matrix(&sample(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# users=2 items=3 nnz=3\n0 0 1\n0 2 0.1\n1 1 3.5\n"
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_matrix(&sample(), &path).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(load_matrix(&path).unwrap(), sample());
    }

    #[test]
    fn rejects_nnz_mismatch() {
        let x = sample();
        let text = "# users=2 items=3 nnz=4\n0 0 1\n";
        let err = read_matrix(text.as_bytes(), x.users().clone(), x.items().clone());
        assert!(err.is_err());
    }

    #[test]
    fn rejects_unsorted_triples() {
        let x = sample();
        let text = "# users=2 items=3 nnz=2\n1 1 1\n0 0 1\n";
        assert!(read_matrix(text.as_bytes(), x.users().clone(), x.items().clone()).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = InteractionMatrix> {
        (1usize..8, 1usize..8).prop_flat_map(|(nu, ni)| {
            proptest::collection::vec(
                proptest::collection::btree_map(0..ni as u32, 1u32..1000, 1..=ni),
                nu,
            )
            .prop_map(move |mut rows| {
                // every item observed at least once
                for i in 0..ni {
                    rows[i % nu].entry(i as u32).or_insert(7);
                }
                let rows = rows
                    .into_iter()
                    .map(|m| SparseVec::from_pairs(m.into_iter().map(|(i, v)| (i, v as f64 / 7.0)).collect()))
                    .collect();
                InteractionMatrix::from_rows(rows, Vocab::range(nu), Vocab::range(ni)).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(x in arb_matrix()) {
            let mut buf = Vec::new();
            write_matrix(&x, &mut buf).unwrap();
            let back = read_matrix(&buf[..], x.users().clone(), x.items().clone()).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn ingest_of_emitted_records_is_identity(x in arb_matrix()) {
            let records = to_records(&x).into_iter().rev().map(Ok);
            let back = ingest(records, &IngestOptions::default()).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
