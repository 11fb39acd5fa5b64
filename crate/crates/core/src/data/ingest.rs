//! Raw interaction logs to [`InteractionMatrix`].
//!
//! Input lines are `user_id<SEP>item_id[<SEP>value][<SEP>timestamp]` with a
//! tab or comma separator. A leading header line is detected and skipped.
//! Timestamps are accepted and ignored.

use std::io::BufRead;

use crate::data::matrix::{InteractionMatrix, SparseVec};
use crate::data::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    /// 1-based source line, 0 when not read from text.
    pub line: usize,
    pub user: String,
    pub item: String,
    pub value: Option<f64>,
    pub timestamp: Option<String>,
}

impl Record {
    pub fn new(user: impl Into<String>, item: impl Into<String>, value: Option<f64>) -> Self {
        Record {
            line: 0,
            user: user.into(),
            item: item.into(),
            value,
            timestamp: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    pub min_user_activity: usize,
    pub min_item_activity: usize,
    pub binarize: bool,
    /// Records with a value below this are dropped before filtering.
    pub value_threshold: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_user_activity: 0,
            min_item_activity: 0,
            binarize: false,
            value_threshold: 0.0,
        }
    }
}

/// Streaming parser over delimited text.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    delimiter: Option<char>,
    line_no: usize,
    seen_data: bool,
}

/// Parses records from `reader`. With `delimiter == None` each line is split
/// on tabs if it contains one, on commas otherwise.
pub fn read_records<R: BufRead>(reader: R, delimiter: Option<char>) -> RecordReader<R> {
    RecordReader {
        lines: reader.lines(),
        delimiter,
        line_no: 0,
        seen_data: false,
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields = split_fields(trimmed, self.delimiter);
            let first = !self.seen_data;
            self.seen_data = true;
            if first && looks_like_header(&fields) {
                continue;
            }
            return Some(parse_fields(&fields, self.line_no));
        }
    }
}

fn split_fields(line: &str, delimiter: Option<char>) -> Vec<&str> {
    let sep = delimiter.unwrap_or(if line.contains('\t') { '\t' } else { ',' });
    line.split(sep).map(str::trim).collect()
}

fn looks_like_header(fields: &[&str]) -> bool {
    if fields.len() >= 3 && fields[2].parse::<f64>().is_err() {
        return true;
    }
    let first = fields[0].to_ascii_lowercase();
    let second = fields.get(1).map(|s| s.to_ascii_lowercase()).unwrap_or_default();
    first.contains("user") && (second.contains("item") || second.contains("id"))
}

fn parse_fields(fields: &[&str], line: usize) -> Result<Record> {
    let bad = |reason: String| Error::MalformedRecord { line, reason };
    if !(2..=4).contains(&fields.len()) {
        return Err(bad(format!("expected 2 to 4 fields, found {}", fields.len())));
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err(bad("empty user or item id".into()));
    }
    let value = match fields.get(2) {
        None => None,
        Some(s) if s.is_empty() => None,
        Some(s) => {
            let v: f64 = s
                .parse()
                .map_err(|_| bad(format!("value `{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("value `{s}` is not finite")));
            }
            Some(v)
        }
    };
    Ok(Record {
        line,
        user: fields[0].to_string(),
        item: fields[1].to_string(),
        value,
        timestamp: fields.get(3).map(|s| s.to_string()),
    })
}

/// Builds the interaction matrix from a record stream.
///
/// Values default to 1. Records with a value `<= 0` or below
/// `value_threshold` are dropped, duplicate (user, item) pairs keep their
/// maximum value, and the activity filters are re-applied until no user or
/// item falls below its threshold. Both vocabularies come out in natural id
/// order, so the result does not depend on record order.
pub fn ingest<I>(records: I, options: &IngestOptions) -> Result<InteractionMatrix>
where
    I: IntoIterator<Item = Result<Record>>,
{
    if !(options.value_threshold >= 0.0) {
        return Err(Error::param("value_threshold", "must be >= 0"));
    }

    let mut user_ids: Vec<String> = Vec::new();
    let mut item_ids: Vec<String> = Vec::new();
    let mut user_tmp = std::collections::HashMap::<String, u32>::new();
    let mut item_tmp = std::collections::HashMap::<String, u32>::new();
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();

    for record in records {
        let record = record?;
        let value = record.value.unwrap_or(1.0);
        if !value.is_finite() {
            return Err(Error::MalformedRecord {
                line: record.line,
                reason: format!("value {value} is not finite"),
            });
        }
        if value <= 0.0 || value < options.value_threshold {
            continue;
        }
        let u = *user_tmp.entry(record.user).or_insert_with_key(|k| {
            user_ids.push(k.clone());
            (user_ids.len() - 1) as u32
        });
        let i = *item_tmp.entry(record.item).or_insert_with_key(|k| {
            item_ids.push(k.clone());
            (item_ids.len() - 1) as u32
        });
        triples.push((u, i, value));
    }
    drop(user_tmp);
    drop(item_tmp);

    triples.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
    triples.dedup_by(|next, kept| next.0 == kept.0 && next.1 == kept.1);

    let (keep_user, keep_item) = activity_fixpoint(
        &triples,
        user_ids.len(),
        item_ids.len(),
        options.min_user_activity,
        options.min_item_activity,
    );
    triples.retain(|&(u, i, _)| keep_user[u as usize] && keep_item[i as usize]);
    if triples.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let users = Vocab::natural(
        user_ids
            .iter()
            .zip(&keep_user)
            .filter(|(_, &k)| k)
            .map(|(id, _)| id.clone()),
    );
    let items = Vocab::natural(
        item_ids
            .iter()
            .zip(&keep_item)
            .filter(|(_, &k)| k)
            .map(|(id, _)| id.clone()),
    );

    // temporary index -> final index
    let remap = |ids: &[String], vocab: &Vocab| -> Vec<u32> {
        ids.iter()
            .map(|id| vocab.index_of(id).unwrap_or(u32::MAX))
            .collect()
    };
    let user_of_tmp = remap(&user_ids, &users);
    let item_of_tmp = remap(&item_ids, &items);

    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); users.len()];
    for &(u, i, v) in &triples {
        let value = if options.binarize { 1.0 } else { v };
        rows[user_of_tmp[u as usize] as usize].push((item_of_tmp[i as usize], value));
    }
    let rows = rows.into_iter().map(SparseVec::from_pairs).collect();
    InteractionMatrix::from_rows(rows, users, items)
}

/// Iteratively drops users and items below their activity thresholds.
fn activity_fixpoint(
    triples: &[(u32, u32, f64)],
    n_users: usize,
    n_items: usize,
    min_user: usize,
    min_item: usize,
) -> (Vec<bool>, Vec<bool>) {
    let mut keep_user = vec![true; n_users];
    let mut keep_item = vec![true; n_items];
    loop {
        let mut user_count = vec![0usize; n_users];
        let mut item_count = vec![0usize; n_items];
        for &(u, i, _) in triples {
            if keep_user[u as usize] && keep_item[i as usize] {
                user_count[u as usize] += 1;
                item_count[i as usize] += 1;
            }
        }
        let mut changed = false;
        for (k, &c) in keep_user.iter_mut().zip(&user_count) {
            if *k && (c == 0 || c < min_user) {
                *k = false;
                changed = true;
            }
        }
        for (k, &c) in keep_item.iter_mut().zip(&item_count) {
            if *k && (c == 0 || c < min_item) {
                *k = false;
                changed = true;
            }
        }
        if !changed {
            return (keep_user, keep_item);
        }
    }
}
