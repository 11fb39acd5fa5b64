//! Seeded synthetic interaction data with planted item clusters.
//!
//! Items are assigned round-robin to clusters and carry a Zipf-like
//! popularity. Each user prefers one cluster: every interaction is drawn
//! from that cluster with probability `in_cluster_prob`, otherwise from the
//! whole catalog, weighted by popularity in both cases.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::matrix::{InteractionMatrix, SparseVec};
use crate::data::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub in_cluster_prob: f64,
    pub min_items_per_user: usize,
    pub max_items_per_user: usize,
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 5_000,
            n_items: 500,
            n_clusters: 10,
            in_cluster_prob: 0.8,
            min_items_per_user: 5,
            max_items_per_user: 40,
            popularity_exponent: 0.8,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn cluster_of(&self, item: usize) -> usize {
        item % self.n_clusters
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<InteractionMatrix> {
    if cfg.n_items == 0 || cfg.n_users == 0 || cfg.n_clusters == 0 || cfg.n_clusters > cfg.n_items {
        return Err(Error::param("synthetic", "need users, items and 1..=n_items clusters"));
    }
    if cfg.min_items_per_user == 0 || cfg.min_items_per_user > cfg.max_items_per_user {
        return Err(Error::param("synthetic", "need 1 <= min_items_per_user <= max_items_per_user"));
    }
    let cluster_size = cfg.n_items / cfg.n_clusters;
    if cfg.max_items_per_user > cluster_size {
        return Err(Error::param("synthetic", "max_items_per_user exceeds cluster size"));
    }
    if !(0.0..=1.0).contains(&cfg.in_cluster_prob) {
        return Err(Error::param("in_cluster_prob", "must be in [0, 1]"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rank: Vec<usize> = (0..cfg.n_items).collect();
    rank.shuffle(&mut rng);
    let popularity: Vec<f64> = rank
        .iter()
        .map(|&r| 1.0 / (r as f64 + 1.0).powf(cfg.popularity_exponent))
        .collect();

    let global = WeightedIndex::new(&popularity).expect("positive weights");
    let clusters: Vec<(Vec<u32>, WeightedIndex<f64>)> = (0..cfg.n_clusters)
        .map(|c| {
            let members: Vec<u32> = (0..cfg.n_items)
                .filter(|&i| cfg.cluster_of(i) == c)
                .map(|i| i as u32)
                .collect();
            let w: Vec<f64> = members.iter().map(|&i| popularity[i as usize]).collect();
            (members, WeightedIndex::new(&w).expect("positive weights"))
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.n_users);
    let mut seen = vec![false; cfg.n_items];
    for _ in 0..cfg.n_users {
        let home = rng.random_range(0..cfg.n_clusters);
        let target = rng.random_range(cfg.min_items_per_user..=cfg.max_items_per_user);
        let mut items = Vec::with_capacity(target);
        let mut attempts = 0;
        while items.len() < target && attempts < 50 * target {
            attempts += 1;
            let item = if rng.random::<f64>() < cfg.in_cluster_prob {
                let (members, dist) = &clusters[home];
                members[dist.sample(&mut rng)]
            } else {
                global.sample(&mut rng) as u32
            };
            if !seen[item as usize] {
                seen[item as usize] = true;
                items.push(item);
            }
        }
        for &i in &items {
            seen[i as usize] = false;
        }
        rows.push(SparseVec::ones(&items));
    }
    InteractionMatrix::from_rows(rows, Vocab::range(cfg.n_users), Vocab::range(cfg.n_items))
}
