//! Lloyd's k-means with k-means++ seeding, restarts, and model selection over
//! a range of `k` by Silhouette (higher is better) with Davies-Bouldin (lower
//! is better) as tie-breaker.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::points::{sq_dist, Points};
use super::validity::{davies_bouldin, silhouette};
use super::derive_seed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iters: 300,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Best run of k-means for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansFit {
    pub k: usize,
    /// Cluster index per input row. Clusters are numbered by the
    /// lexicographic order of their centroids.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after every Lloyd iteration of the winning run.
    #[serde(skip)]
    pub wcss_trace: Vec<f64>,
}

impl KmeansFit {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub wcss: f64,
}

/// Selected clustering plus the score table it was chosen from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub per_k_scores: BTreeMap<usize, KScore>,
    /// Candidate `k` values whose validity indices were undefined.
    pub skipped_k: BTreeMap<usize, String>,
    pub seed: u64,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Run k-means `cfg.restarts` times and keep the run with the lowest WCSS.
pub fn kmeans(points: &Points, k: usize, cfg: &KmeansConfig) -> Result<KmeansFit> {
    kmeans_stream(points, k, cfg, cfg.seed)
}

fn kmeans_stream(points: &Points, k: usize, cfg: &KmeansConfig, seed: u64) -> Result<KmeansFit> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    if points.len() < k {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    if cfg.restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("restarts and max_iters must be positive".into()));
    }

    let best = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (r, lloyd(points, k, cfg, &mut rng))
        })
        .min_by(|(ra, a), (rb, b)| a.wcss.total_cmp(&b.wcss).then(ra.cmp(rb)))
        .map(|(_, fit)| fit)
        .expect("at least one restart");
    Ok(canonicalize(best))
}

fn lloyd(points: &Points, k: usize, cfg: &KmeansConfig, rng: &mut ChaCha8Rng) -> KmeansFit {
    let n = points.len();
    let d = points.dim();
    let mut centroids = plus_plus_seeds(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut changed = false;
        for (a, row) in assignments.iter_mut().zip(points.rows()) {
            let c = nearest(row, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        repair_empty(points, &mut assignments, &centroids, k);

        let mut next = vec![vec![0.0; d]; k];
        let mut sizes = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sizes[a] += 1;
            for (acc, v) in next[a].iter_mut().zip(points.row(i)) {
                *acc += v;
            }
        }
        for (c, &s) in next.iter_mut().zip(&sizes) {
            for v in c.iter_mut() {
                *v /= s as f64;
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        trace.push(wcss(points, &assignments, &centroids));
        if !changed || shift < cfg.tol {
            break;
        }
    }

    KmeansFit {
        k,
        wcss: *trace.last().expect("one iteration"),
        assignments,
        centroids,
        iterations,
        wcss_trace: trace,
    }
}

fn plus_plus_seeds(points: &Points, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can leave `target` just above the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass"))
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Give every empty cluster the point farthest from its centroid among
/// clusters that can spare one.
fn repair_empty(points: &Points, assignments: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("n >= k leaves a cluster with two points");
        sizes[assignments[i]] -= 1;
        assignments[i] = empty;
        sizes[empty] = 1;
    }
}

fn wcss(points: &Points, assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(points.row(i), &centroids[a]))
        .sum()
}

/// Renumber clusters by lexicographic centroid order.
fn canonicalize(mut fit: KmeansFit) -> KmeansFit {
    let mut order: Vec<usize> = (0..fit.k).collect();
    order.sort_by(|&a, &b| {
        fit.centroids[a]
            .iter()
            .zip(&fit.centroids[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut relabel = vec![0; fit.k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    fit.centroids = order.iter().map(|&old| fit.centroids[old].clone()).collect();
    for a in fit.assignments.iter_mut() {
        *a = relabel[*a];
    }
    fit
}

/// Fit every `k` in `k_range` and keep the one with the highest Silhouette;
/// ties go to the lower Davies-Bouldin index, then the lower `k`.
///
/// A `k` whose indices are undefined (clusters with coinciding centroids) is
/// recorded in `skipped_k` instead of failing the whole selection.
pub fn select_k(
    points: &Points,
    k_range: RangeInclusive<usize>,
    cfg: &KmeansConfig,
) -> Result<ClusteringResult> {
    let n = points.len();
    if k_range.is_empty() || *k_range.start() < 2 || *k_range.end() + 1 > n {
        return Err(Error::InvalidConfig(format!(
            "k range {}..={} must lie within 2..={}",
            k_range.start(),
            k_range.end(),
            n.saturating_sub(1)
        )));
    }

    let mut per_k_scores = BTreeMap::new();
    let mut skipped_k = BTreeMap::new();
    let mut best: Option<(KmeansFit, KScore)> = None;

    for k in k_range {
        let fit = kmeans_stream(points, k, cfg, derive_seed(cfg.seed, k as u64, 0))?;
        let score = match (
            silhouette(points, &fit.assignments),
            davies_bouldin(points, &fit.assignments),
        ) {
            (Ok(s), Ok(db)) => KScore {
                silhouette: s,
                davies_bouldin: db,
                wcss: fit.wcss,
            },
            (Err(e), _) | (_, Err(e)) => {
                skipped_k.insert(k, e.to_string());
                continue;
            }
        };
        per_k_scores.insert(k, score);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                score.silhouette > b.silhouette
                    || (score.silhouette == b.silhouette && score.davies_bouldin < b.davies_bouldin)
            }
        };
        if better {
            best = Some((fit, score));
        }
    }

    let (fit, score) = best.ok_or_else(|| {
        Error::Degenerate("validity indices are undefined for every candidate k".into())
    })?;
    Ok(ClusteringResult {
        k: fit.k,
        assignments: fit.assignments,
        centroids: fit.centroids,
        silhouette: score.silhouette,
        davies_bouldin: score.davies_bouldin,
        per_k_scores,
        skipped_k,
        seed: cfg.seed,
    })
}
