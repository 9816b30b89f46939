//! Per-user polarization metrics.
//!
//! Single-factor metrics:
//! * polarization score `ρ(u) = max_c N_{u,c} / N_u`;
//! * Lack of Diversity `LD(u) = max_m N_{u,m} · ln(|U| / |U_m|)`, normalized by
//!   the population maximum.
//!
//! Entropy-based metrics all use `H' = 1 − H_N`, where `H_N` is Shannon
//! entropy divided by `ln n` over a fixed entity universe of size `n`, so that
//! concentrated (polarized) behavior scores high:
//! * `h_op`: over the communities;
//! * `h_so`: over all sources;
//! * `h_op_oriented = (±h_op + 1) / 2`, signed towards the positive community;
//! * `h_so_per_community`: over the sources of one community only.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::InteractionDataset;

pub use crate::stats::rank::{spearman, SpearmanResult};

/// How `N_{u,m}` enters Lack of Diversity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdWeighting {
    /// `N_{u,m} / N_u`: the user's share of interactions on the source.
    #[default]
    Proportions,
    /// Raw interaction counts.
    RawCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Community mapped towards 1 by the oriented opinion metric. Only used
    /// when the dataset has exactly two communities.
    pub positive_community: Option<String>,
    pub ld_weighting: LdWeighting,
}

/// All metrics for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetricVector {
    pub user_id: String,
    pub rho: f64,
    /// LD before population normalization, under the configured weighting.
    pub ld_raw: f64,
    pub ld: f64,
    pub h_op: f64,
    pub h_so: f64,
    pub h_op_oriented: Option<f64>,
    pub h_so_per_community: BTreeMap<String, f64>,
}

/// `max_c N_{u,c} / N_u`.
pub fn polarization_score(counts_by_community: &[u64]) -> Result<f64> {
    if counts_by_community.len() < 2 {
        return Err(Error::Unsupported(format!(
            "polarization score needs at least 2 communities, got {}",
            counts_by_community.len()
        )));
    }
    let total: u64 = counts_by_community.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedInput("all community counts are zero".into()));
    }
    let max = counts_by_community.iter().copied().max().unwrap_or(0);
    Ok(max as f64 / total as f64)
}

/// `max_m N_{u,m} · ln(|U| / |U_m|)` over the sources the user touched.
///
/// `user_counts[m]` and `populations[m]` are aligned by source.
pub fn lack_of_diversity_raw(
    user_counts: &[u64],
    populations: &[usize],
    total_users: usize,
) -> Result<f64> {
    ld_weighted(user_counts, populations, total_users, |c| c as f64)
}

fn ld_weighted(
    user_counts: &[u64],
    populations: &[usize],
    total_users: usize,
    weight: impl Fn(u64) -> f64,
) -> Result<f64> {
    if total_users == 0 {
        return Err(Error::UndefinedInput("|U| must be at least 1".into()));
    }
    if user_counts.len() != populations.len() {
        return Err(Error::Inconsistent(format!(
            "{} counts but {} source populations",
            user_counts.len(),
            populations.len()
        )));
    }
    let mut best = 0.0f64;
    for (m, (&n, &pop)) in user_counts.iter().zip(populations).enumerate() {
        if n == 0 {
            continue;
        }
        if pop == 0 || pop > total_users {
            return Err(Error::Inconsistent(format!(
                "source {m}: |U_m| = {pop} with |U| = {total_users}"
            )));
        }
        let v = weight(n) * (total_users as f64 / pop as f64).ln();
        best = best.max(v);
    }
    Ok(best)
}

/// Divide every value by the population maximum. All zeros stay zero.
pub fn normalize_ld(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::UndefinedInput("no LD values to normalize".into()));
    }
    let max = raw.iter().copied().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|v| v / max).collect())
}

/// `1 − H_N` over a universe of `universe` entities; entities absent from
/// `counts` have zero mass. Uses `0 · ln 0 = 0`, and a universe of one entity
/// scores 1.
pub fn inverted_normalized_entropy(counts: &[u64], universe: usize) -> Result<f64> {
    if universe == 0 {
        return Err(Error::UndefinedInput("entity universe is empty".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedInput("all counts are zero".into()));
    }
    let support = counts.iter().filter(|&&c| c > 0).count();
    if support > universe {
        return Err(Error::Inconsistent(format!(
            "{support} non-zero entities in a universe of {universe}"
        )));
    }
    if universe == 1 {
        return Ok(1.0);
    }
    let total = total as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    let h_n = entropy / (universe as f64).ln();
    Ok((1.0 - h_n).clamp(0.0, 1.0))
}

/// `(±h_op + 1) / 2` with `+` when the positive community is predominant
/// (ties resolve to `+`; they force `h_op = 0` anyway).
pub fn orient(h_op: f64, positive_is_predominant: bool) -> f64 {
    if positive_is_predominant {
        (h_op + 1.0) / 2.0
    } else {
        (1.0 - h_op) / 2.0
    }
}

/// `h_op` of a user: inverted normalized entropy over all communities.
pub fn opinion_entropy(ds: &InteractionDataset, user_id: &str) -> Result<f64> {
    let u = ds.user_index(user_id)?;
    opinion_entropy_at(ds, u)
}

/// `h_so` of a user: inverted normalized entropy over every source.
pub fn source_entropy(ds: &InteractionDataset, user_id: &str) -> Result<f64> {
    let u = ds.user_index(user_id)?;
    source_entropy_at(ds, u)
}

/// Oriented opinion metric. Requires exactly two communities.
pub fn oriented_opinion(
    ds: &InteractionDataset,
    user_id: &str,
    positive_community: &str,
) -> Result<f64> {
    let u = ds.user_index(user_id)?;
    let pos = positive_index(ds, positive_community)?;
    oriented_opinion_at(ds, u, pos)
}

/// Source metric restricted to one community's sources. A user without any
/// interaction in that community scores 1.
pub fn split_source_entropy(
    ds: &InteractionDataset,
    user_id: &str,
    community_id: &str,
) -> Result<f64> {
    let u = ds.user_index(user_id)?;
    let c = ds.community_index(community_id)?;
    split_source_entropy_at(ds, u, c)
}

fn opinion_entropy_at(ds: &InteractionDataset, u: usize) -> Result<f64> {
    inverted_normalized_entropy(&ds.community_totals(u), ds.n_communities())
}

fn source_entropy_at(ds: &InteractionDataset, u: usize) -> Result<f64> {
    inverted_normalized_entropy(ds.row(u), ds.n_sources())
}

fn oriented_opinion_at(ds: &InteractionDataset, u: usize, positive: usize) -> Result<f64> {
    let totals = ds.community_totals(u);
    let h_op = inverted_normalized_entropy(&totals, ds.n_communities())?;
    let other = 1 - positive;
    Ok(orient(h_op, totals[positive] >= totals[other]))
}

fn split_source_entropy_at(ds: &InteractionDataset, u: usize, c: usize) -> Result<f64> {
    let row = ds.row(u);
    let restricted: Vec<u64> = ds.sources_in(c).iter().map(|&m| row[m]).collect();
    if restricted.iter().all(|&n| n == 0) {
        return Ok(1.0);
    }
    inverted_normalized_entropy(&restricted, restricted.len())
}

fn positive_index(ds: &InteractionDataset, positive_community: &str) -> Result<usize> {
    if ds.n_communities() != 2 {
        return Err(Error::Unsupported(format!(
            "oriented opinion needs exactly 2 communities, dataset has {}",
            ds.n_communities()
        )));
    }
    ds.community_index(positive_community)
}

/// Compute every metric for every user, in user registry order.
pub fn compute_all(ds: &InteractionDataset, opts: &MetricOptions) -> Result<Vec<UserMetricVector>> {
    let positive = opts
        .positive_community
        .as_deref()
        .map(|p| positive_index(ds, p))
        .transpose()?;
    let populations: Vec<usize> = (0..ds.n_sources()).map(|m| ds.source_population(m)).collect();
    let n_users = ds.n_users();

    let mut vectors = (0..n_users)
        .into_par_iter()
        .map(|u| -> Result<UserMetricVector> {
            let totals = ds.community_totals(u);
            let n_u = ds.user_total(u);
            let ld_raw = match opts.ld_weighting {
                LdWeighting::RawCounts => lack_of_diversity_raw(ds.row(u), &populations, n_users)?,
                LdWeighting::Proportions => {
                    ld_weighted(ds.row(u), &populations, n_users, |c| c as f64 / n_u as f64)?
                }
            };
            let rho = if ds.n_communities() >= 2 {
                polarization_score(&totals)?
            } else {
                1.0
            };
            let h_so_per_community = ds
                .communities()
                .iter()
                .enumerate()
                .map(|(c, name)| Ok((name.clone(), split_source_entropy_at(ds, u, c)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(UserMetricVector {
                user_id: ds.users()[u].clone(),
                rho,
                ld_raw,
                ld: 0.0,
                h_op: inverted_normalized_entropy(&totals, ds.n_communities())?,
                h_so: source_entropy_at(ds, u)?,
                h_op_oriented: positive.map(|p| oriented_opinion_at(ds, u, p)).transpose()?,
                h_so_per_community,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let raw: Vec<f64> = vectors.iter().map(|v| v.ld_raw).collect();
    for (v, ld) in vectors.iter_mut().zip(normalize_ld(&raw)?) {
        v.ld = ld;
    }
    Ok(vectors)
}

/// Fixed header for metric CSV output. Split source columns follow the
/// community registry order.
pub fn csv_header(communities: &[String]) -> Vec<String> {
    let mut header: Vec<String> = ["user_id", "rho", "ld_raw", "ld", "h_op", "h_so", "h_op_oriented"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(communities.iter().map(|c| format!("h_so_{c}")));
    header
}

/// Write metric vectors as CSV, one row per user.
pub fn write_csv<W: std::io::Write>(
    writer: W,
    communities: &[String],
    vectors: &[UserMetricVector],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(communities))?;
    for v in vectors {
        let mut row = vec![
            v.user_id.clone(),
            v.rho.to_string(),
            v.ld_raw.to_string(),
            v.ld.to_string(),
            v.h_op.to_string(),
            v.h_so.to_string(),
            v.h_op_oriented.map(|x| x.to_string()).unwrap_or_default(),
        ];
        row.extend(
            communities
                .iter()
                .map(|c| v.h_so_per_community.get(c).map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
    Ok(())
}
