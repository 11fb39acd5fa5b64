use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{Metric, MetricSpec};
use crate::data::{EvalSplit, EvalUser, SplitMode, VocabHash};
use crate::error::{Error, Result};
use crate::ranking::{recommend, Scorer};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub metric: Metric,
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
    pub n_users: usize,
    /// Per-user values in evaluation order.
    pub per_user: Option<Vec<f64>>,
}

impl MetricReport {
    pub fn spec(&self) -> MetricSpec {
        MetricSpec {
            metric: self.metric,
            k: self.k,
        }
    }

    fn from_values(spec: MetricSpec, values: Vec<f64>, keep_per_user: bool) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        MetricReport {
            metric: spec.metric,
            k: spec.k,
            mean,
            std_error,
            n_users: n,
            per_user: keep_per_user.then_some(values),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub keep_per_user: bool,
}

/// Ranks every user's candidates from their fold-in history (fold-in items
/// excluded) and averages each metric over users.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    users: &[EvalUser],
    items: &VocabHash,
    metrics: &[MetricSpec],
    opts: EvalOptions,
) -> Result<Vec<MetricReport>> {
    scorer.vocab_hash().ensure_eq(items)?;
    if users.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    if metrics.is_empty() {
        return Err(Error::param("metrics", "at least one metric is required"));
    }
    let k_max = metrics.iter().map(|m| m.k).max().unwrap_or(1);
    // collect keeps user order, so the sums below are reproducible
    let per_user: Vec<Vec<f64>> = users
        .par_iter()
        .map(|u| {
            let ranked = recommend(&u.user, u.fold_in.as_row(), scorer, k_max, true)?;
            assert!(
                ranked.item_indices().all(|i| u.fold_in.indices.binary_search(&i).is_err()),
                "fold-in item recommended to {}",
                u.user
            );
            metrics
                .iter()
                .map(|m| m.compute(&ranked, &u.held_out))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::User {
                    user: u.user.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    Ok(metrics
        .iter()
        .enumerate()
        .map(|(m, &spec)| {
            let values = per_user.iter().map(|row| row[m]).collect();
            MetricReport::from_values(spec, values, opts.keep_per_user)
        })
        .collect())
}

/// Evaluates on the split's test users.
pub fn evaluate_split<S: Scorer + ?Sized>(
    scorer: &S,
    split: &EvalSplit,
    metrics: &[MetricSpec],
) -> Result<Vec<MetricReport>> {
    evaluate(scorer, &split.test, &split.item_vocab_hash(), metrics, EvalOptions::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub mode: SplitMode,
    pub seed: u64,
    pub n_eval_users: usize,
    pub n_items: usize,
    pub item_vocab_hash: VocabHash,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub name: String,
    pub k: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_users: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: String,
    pub dataset: String,
    pub split: SplitInfo,
    pub metrics: Vec<MetricEntry>,
}

impl Report {
    pub fn new(model: &str, dataset: &str, split: &EvalSplit, reports: &[MetricReport]) -> Self {
        Report {
            model: model.to_string(),
            dataset: dataset.to_string(),
            split: SplitInfo {
                mode: split.mode,
                seed: split.seed,
                n_eval_users: split.test.len(),
                n_items: split.train.n_items(),
                item_vocab_hash: split.item_vocab_hash(),
            },
            metrics: reports
                .iter()
                .map(|r| MetricEntry {
                    name: match r.metric {
                        Metric::Recall => "recall".into(),
                        Metric::Ndcg => "ndcg".into(),
                    },
                    k: r.k,
                    mean: r.mean,
                    stderr: r.std_error,
                    n_users: r.n_users,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Aligned plain-text table, one metric per line.
    pub fn table(&self) -> String {
        let mut out = format!("model={} dataset={} users={}\n", self.model, self.dataset, self.split.n_eval_users);
        let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>7}", "metric", "mean", "stderr", "users");
        for m in &self.metrics {
            let name = format!("{}@{}", m.name, m.k);
            let _ = writeln!(out, "{:<12} {:>8.4} {:>8.4} {:>7}", name, m.mean, m.stderr, m.n_users);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_strong, InteractionMatrix, SparseVec};
    use crate::eval::baselines::Popularity;

    fn toy_split() -> EvalSplit {
        let rows: Vec<Vec<u8>> = (0..12)
            .map(|u| (0..6).map(|i| ((u + i) % 3 != 0) as u8).collect())
            .collect();
        let x = InteractionMatrix::from_dense_binary(&rows).unwrap();
        split_strong(&x, 2, 4, 0.5, 7).unwrap()
    }

    #[test]
    fn mean_and_standard_error() {
        let r = MetricReport::from_values(MetricSpec::recall(5), vec![1.0, 0.0, 1.0, 0.0], true);
        assert_eq!(r.mean, 0.5);
        // sample std of (1,0,1,0) is sqrt(1/3)
        assert!((r.std_error - (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(r.per_user.as_deref(), Some(&[1.0, 0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn popularity_on_a_split() {
        let split = toy_split();
        let pop = Popularity::fit(&split.train);
        let reports = evaluate_split(&pop, &split, &[MetricSpec::recall(2), MetricSpec::ndcg(6)]).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.n_users, split.test.len());
            assert!((0.0..=1.0).contains(&r.mean));
        }
        // every remaining candidate fits in the list, so recall at 6 is perfect
        let full = evaluate_split(&pop, &split, &[MetricSpec::recall(6)]).unwrap();
        assert_eq!(full[0].mean, 1.0);
    }

    #[test]
    fn errors() {
        let split = toy_split();
        let pop = Popularity::fit(&split.train);
        let metrics = [MetricSpec::recall(2)];
        assert!(matches!(
            evaluate(&pop, &[], &split.item_vocab_hash(), &metrics, EvalOptions::default()),
            Err(Error::NoEvaluableUsers)
        ));
        let other = crate::data::Vocab::range(6).hash();
        if other != split.item_vocab_hash() {
            assert!(matches!(
                evaluate(&pop, &split.test, &other, &metrics, EvalOptions::default()),
                Err(Error::VocabMismatch { .. })
            ));
        }
        let bad = vec![EvalUser {
            user: "x".into(),
            fold_in: SparseVec::ones(&[0]),
            held_out: vec![],
        }];
        assert!(evaluate(&pop, &bad, &split.item_vocab_hash(), &metrics, EvalOptions::default()).is_err());
    }

    #[test]
    fn report_round_trips() {
        let split = toy_split();
        let pop = Popularity::fit(&split.train);
        let reports = evaluate_split(&pop, &split, &MetricSpec::parse_list("recall@20,ndcg@100").unwrap()).unwrap();
        let report = Report::new("popularity", "toy", &split, &reports);
        let back = Report::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        let table = report.table();
        assert!(table.contains("recall@20") && table.contains("ndcg@100"), "{table}");
    }
}
