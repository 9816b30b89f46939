//! Rank statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub coefficient: f64,
    /// Fraction of items whose rank moves by more than 5% of the sequence
    /// length between the two orderings.
    pub displacement_fraction: f64,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<SpearmanResult> {
    if a.len() != b.len() {
        return Err(Error::Inconsistent(format!(
            "sequences differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedInput("Spearman needs at least 2 items".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedInput("non-finite value in Spearman input".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("constant sequence has no rank variance".into()));
    }
    let coefficient = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let threshold = 0.05 * n;
    let moved = ra.iter().zip(&rb).filter(|(x, y)| (*x - *y).abs() > threshold).count();
    Ok(SpearmanResult {
        coefficient,
        displacement_fraction: moved as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn anchors() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = spearman(&a, &a).unwrap();
        assert_eq!(r.coefficient, 1.0);
        assert_eq!(r.displacement_fraction, 0.0);
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&a, &rev).unwrap().coefficient, -1.0);
    }

    #[test]
    fn hand_evaluated_swap() {
        // d = [0,1,1,1,1], 1 − 6·4 / (5·24) = 0.8
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert!((r.coefficient - 0.8).abs() < 1e-12);
        // every swapped item moves by one rank, above 5% of 5
        assert_eq!(r.displacement_fraction, 0.8);
    }

    #[test]
    fn errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_anchors(mut xs in prop::collection::vec(-1e6f64..1e6, 2..200)) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 2);
            let rev: Vec<f64> = xs.iter().rev().copied().collect();
            prop_assert!((spearman(&xs, &xs).unwrap().coefficient - 1.0).abs() < 1e-12);
            prop_assert!((spearman(&xs, &rev).unwrap().coefficient + 1.0).abs() < 1e-12);
        }

        #[test]
        fn coefficient_is_bounded(a in prop::collection::vec(0u8..6, 3..60), seed in 0u64..1000) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, _)| ((i as u64 * 31 + seed) % 7) as f64).collect();
            let a: Vec<f64> = a.iter().map(|&x| x as f64).collect();
            if let Ok(r) = spearman(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r.coefficient));
                prop_assert!((0.0..=1.0).contains(&r.displacement_fraction));
            }
        }
    }
}
