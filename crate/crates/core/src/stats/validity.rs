//! Internal cluster validity indices over Euclidean distance.

use rayon::prelude::*;

use super::points::{dist, Points};
use crate::error::{Error, Result};

/// Cluster count, after checking that labels are dense and every cluster is
/// populated.
fn cluster_count(points: &Points, assignments: &[usize]) -> Result<usize> {
    if assignments.len() != points.len() {
        return Err(Error::Inconsistent(format!(
            "{} assignments for {} points",
            assignments.len(),
            points.len()
        )));
    }
    let k = assignments.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if k < 2 {
        return Err(Error::Degenerate("validity indices need at least 2 clusters".into()));
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Inconsistent(format!("cluster {empty} is empty")));
    }
    Ok(k)
}

/// Mean Silhouette coefficient. Points in singleton clusters score 0.
pub fn silhouette(points: &Points, assignments: &[usize]) -> Result<f64> {
    let k = cluster_count(points, assignments)?;
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let n = points.len();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let p = points.row(i);
            for (j, &c) in assignments.iter().enumerate() {
                if j != i {
                    sums[c] += dist(p, points.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / n as f64)
}

/// Davies-Bouldin index. Errors when two centroids coincide.
pub fn davies_bouldin(points: &Points, assignments: &[usize]) -> Result<f64> {
    let k = cluster_count(points, assignments)?;
    let d = points.dim();
    let mut centroids = vec![vec![0.0; d]; k];
    let mut sizes = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        sizes[a] += 1;
        for (c, v) in centroids[a].iter_mut().zip(points.row(i)) {
            *c += v;
        }
    }
    for (c, &s) in centroids.iter_mut().zip(&sizes) {
        for v in c.iter_mut() {
            *v /= s as f64;
        }
    }
    let mut scatter = vec![0.0; k];
    for (i, &a) in assignments.iter().enumerate() {
        scatter[a] += dist(points.row(i), &centroids[a]);
    }
    for (s, &n) in scatter.iter_mut().zip(&sizes) {
        *s /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist(&centroids[i], &centroids[j]);
            if sep == 0.0 {
                return Err(Error::Degenerate(format!(
                    "clusters {i} and {j} have identical centroids"
                )));
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for t in 0..a.len() {
            s += (a[t] - b[t]).powi(2);
        }
        s.sqrt()
    }

    // Naive reference implementations, written out directly from the
    // textbook definitions.
    fn silhouette_ref(x: &[Vec<f64>], lab: &[usize]) -> f64 {
        let k = lab.iter().max().unwrap() + 1;
        let mut acc = 0.0;
        for i in 0..x.len() {
            let same: Vec<usize> = (0..x.len()).filter(|&j| j != i && lab[j] == lab[i]).collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| euclid(&x[i], &x[j])).sum::<f64>() / same.len() as f64;
            let mut b = f64::MAX;
            for c in 0..k {
                if c == lab[i] {
                    continue;
                }
                let other: Vec<usize> = (0..x.len()).filter(|&j| lab[j] == c).collect();
                let m = other.iter().map(|&j| euclid(&x[i], &x[j])).sum::<f64>() / other.len() as f64;
                if m < b {
                    b = m;
                }
            }
            if a.max(b) > 0.0 {
                acc += (b - a) / a.max(b);
            }
        }
        acc / x.len() as f64
    }

    fn davies_bouldin_ref(x: &[Vec<f64>], lab: &[usize]) -> f64 {
        let k = lab.iter().max().unwrap() + 1;
        let cent: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let members: Vec<&Vec<f64>> = x.iter().zip(lab).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                (0..x[0].len())
                    .map(|t| members.iter().map(|p| p[t]).sum::<f64>() / members.len() as f64)
                    .collect()
            })
            .collect();
        let s: Vec<f64> = (0..k)
            .map(|c| {
                let d: Vec<f64> = x.iter().zip(lab).filter(|(_, &l)| l == c).map(|(p, _)| euclid(p, &cent[c])).collect();
                d.iter().sum::<f64>() / d.len() as f64
            })
            .collect();
        (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| j != i)
                    .map(|j| (s[i] + s[j]) / euclid(&cent[i], &cent[j]))
                    .fold(f64::MIN, f64::max)
            })
            .sum::<f64>()
            / k as f64
    }

    #[test]
    fn square_corners_by_side() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let lab = [0, 0, 1, 1];
        let pts = Points::from_rows(&x).unwrap();
        let s = silhouette(&pts, &lab).unwrap();
        // a = 1, b = (1 + √2) / 2 for every corner
        let expected = 3.0 - 2.0 * 2f64.sqrt();
        assert!((s - expected).abs() < 1e-12);
        assert!((s - silhouette_ref(&x, &lab)).abs() < 1e-12);
        // scatter 1/2 per side, centroids 1 apart
        assert!((davies_bouldin(&pts, &lab).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tight_far_blobs() {
        let mut x = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.001;
            x.push(vec![e, -e]);
            x.push(vec![10.0 + e, 10.0 - e]);
        }
        let lab: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let pts = Points::from_rows(&x).unwrap();
        assert!(silhouette(&pts, &lab).unwrap() > 0.9);
        assert!(davies_bouldin(&pts, &lab).unwrap() < 0.2);
    }

    #[test]
    fn identical_points_have_no_separation() {
        let pts = Points::from_rows(&vec![vec![0.3, 0.3]; 6]).unwrap();
        let lab = [0, 1, 0, 1, 0, 1];
        assert!(matches!(davies_bouldin(&pts, &lab), Err(Error::Degenerate(_))));
        assert_eq!(silhouette(&pts, &lab).unwrap(), 0.0);
    }

    #[test]
    fn single_cluster_or_empty_label_rejected() {
        let pts = Points::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(silhouette(&pts, &[0, 0, 0]).is_err());
        assert!(davies_bouldin(&pts, &[0, 2, 0]).is_err());
        assert!(silhouette(&pts, &[0, 1]).is_err());
    }

    #[test]
    fn singletons_score_zero() {
        let x = vec![vec![0.0], vec![0.1], vec![5.0]];
        let pts = Points::from_rows(&x).unwrap();
        let s = silhouette(&pts, &[0, 0, 1]).unwrap();
        let a = 0.1;
        let b0 = 5.0;
        let b1 = 4.9;
        let expected = ((b0 - a) / b0 + (b1 - a) / b1) / 3.0;
        assert!((s - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_reference(
            raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..3), 3..=8),
        ) {
            let x: Vec<Vec<f64>> = raw.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let mut lab: Vec<usize> = raw.iter().map(|&(_, _, l)| l).collect();
            // make labels dense
            let mut seen: Vec<usize> = lab.clone();
            seen.sort();
            seen.dedup();
            prop_assume!(seen.len() >= 2);
            for l in lab.iter_mut() {
                *l = seen.iter().position(|s| s == l).unwrap();
            }
            let pts = Points::from_rows(&x).unwrap();
            prop_assert!((silhouette(&pts, &lab).unwrap() - silhouette_ref(&x, &lab)).abs() < 1e-9);
            prop_assert!((davies_bouldin(&pts, &lab).unwrap() - davies_bouldin_ref(&x, &lab)).abs() < 1e-9);
        }
    }
}
