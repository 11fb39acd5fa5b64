//! Shared fixtures for the benchmarks in `benches/`.

use ease_core::data::synthetic::{generate, SyntheticConfig};
use ease_core::InteractionMatrix;

/// Clustered synthetic data with `n_items` items and 20 to 80 items per user.
pub fn dataset(n_users: usize, n_items: usize, seed: u64) -> InteractionMatrix {
    generate(&SyntheticConfig {
        n_users,
        n_items,
        n_clusters: (n_items / 80).clamp(1, 10),
        min_items_per_user: 20,
        max_items_per_user: 80,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic config")
}
