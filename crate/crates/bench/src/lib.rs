//! Shared fixtures for the benchmarks.

use polar_core::metrics::{self, MetricOptions};
use polar_core::stats::Points;
use polar_core::synth::{self, SynthConfig};
use polar_core::{InteractionDataset, UserMetricVector};

/// Synthetic dataset from the built-in profile, scaled to `n_users`.
pub fn dataset(n_users: usize, seed: u64) -> InteractionDataset {
    let cfg = SynthConfig {
        n_users,
        seed,
        ..synth::paper_profile()
    };
    synth::generate(&cfg).expect("profile is valid").0
}

pub fn metric_vectors(ds: &InteractionDataset) -> Vec<UserMetricVector> {
    let opts = MetricOptions {
        positive_community: Some("pro".into()),
        ..MetricOptions::default()
    };
    metrics::compute_all(ds, &opts).expect("metrics")
}

/// Tri-factor feature matrix (oriented opinion, per-community source entropy).
pub fn tri_points(v: &[UserMetricVector]) -> Points {
    let rows: Vec<[f64; 3]> = v
        .iter()
        .map(|m| {
            [
                m.h_op_oriented.unwrap_or(0.5),
                m.h_so_per_community["pro"],
                m.h_so_per_community["anti"],
            ]
        })
        .collect();
    Points::from_rows(&rows).expect("finite features")
}
