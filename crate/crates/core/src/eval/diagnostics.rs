//! Distribution summaries: learned-weight histogram and per-item
//! recommendation counts.

use std::io::Write;

use serde::Serialize;

use crate::ranking::RankedList;
use crate::solver::WeightModel;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightHistogram {
    pub bins: Vec<HistogramBin>,
    pub negative_fraction: f64,
    pub n_weights: usize,
    pub mean: f64,
}

/// Equal-width histogram of the off-diagonal weights between their minimum
/// and maximum. A constant weight matrix yields a single zero-width bin.
pub fn weight_histogram(model: &WeightModel, n_bins: usize) -> WeightHistogram {
    let n_bins = n_bins.max(1);
    let (mut min, mut max, mut sum, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for w in model.off_diagonal() {
        min = min.min(w);
        max = max.max(w);
        sum += w;
        count += 1;
    }
    let negative_fraction = model.negative_fraction();
    if count == 0 {
        return WeightHistogram {
            bins: Vec::new(),
            negative_fraction,
            n_weights: 0,
            mean: 0.0,
        };
    }
    let mean = sum / count as f64;
    if min == max {
        return WeightHistogram {
            bins: vec![HistogramBin { lo: min, hi: max, count }],
            negative_fraction,
            n_weights: count,
            mean,
        };
    }
    let width = (max - min) / n_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|b| HistogramBin {
            lo: min + b as f64 * width,
            hi: if b + 1 == n_bins { max } else { min + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for w in model.off_diagonal() {
        let b = (((w - min) / width) as usize).min(n_bins - 1);
        bins[b].count += 1;
    }
    WeightHistogram {
        bins,
        negative_fraction,
        n_weights: count,
        mean,
    }
}

impl WeightHistogram {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for b in &self.bins {
            writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecCount {
    /// 1-based rank by count.
    pub rank: usize,
    pub item: u32,
    pub count: usize,
}

/// Items sorted by how often they appear in the lists, most frequent first
/// (ties by item index). Items never recommended are included with count 0.
pub fn rec_count_curve(lists: &[RankedList], n_items: usize) -> Vec<RecCount> {
    let mut counts = vec![0usize; n_items];
    for list in lists {
        for i in list.item_indices() {
            counts[i as usize] += 1;
        }
    }
    let mut order: Vec<u32> = (0..n_items as u32).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    order
        .into_iter()
        .enumerate()
        .map(|(r, item)| RecCount {
            rank: r + 1,
            item,
            count: counts[item as usize],
        })
        .collect()
}

pub fn write_rec_counts_csv<W: Write>(curve: &[RecCount], mut w: W) -> std::io::Result<()> {
    writeln!(w, "rank,item,count")?;
    for c in curve {
        writeln!(w, "{},{},{}", c.rank, c.item, c.count)?;
    }
    Ok(())
}

/// Share of all recommendations that go to items outside the `head` most
/// recommended ones. Higher means a heavier tail.
pub fn tail_share(curve: &[RecCount], head: usize) -> f64 {
    let total: usize = curve.iter().map(|c| c.count).sum();
    if total == 0 {
        return 0.0;
    }
    let tail: usize = curve.iter().skip(head).map(|c| c.count).sum();
    tail as f64 / total as f64
}
