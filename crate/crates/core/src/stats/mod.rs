//! Numerical machinery for the single-, bi- and tri-factor analyses.

pub mod kde;
pub mod kmeans;
pub mod points;
pub mod rank;
pub mod validity;

pub use kde::{is_multimodal, kde, silverman_bandwidth, KdeProfile};
pub use kmeans::{kmeans, select_k, ClusteringResult, KScore, KmeansConfig, KmeansFit};
pub use points::Points;
pub use rank::{average_ranks, spearman, SpearmanResult};
pub use validity::{davies_bouldin, silhouette};

/// SplitMix64 finalizer, used to derive independent seeds for restarts and
/// candidate `k` values from one user-facing seed.
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
