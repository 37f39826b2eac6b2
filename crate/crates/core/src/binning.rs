//! Equidistant binning of the confounder range and sparse-bin merging.
//!
//! The confounder axis is split into `m` equal-width intervals over the
//! sample range; interval j is [e_j, e_{j+1}) except the last, which is
//! closed on the right so the sample maximum is assigned. Bins too sparse
//! to support a regression are merged into a neighbor until every bin
//! meets the occupancy floor.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A partition of the confounder range with per-observation assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    /// Bin edges, strictly increasing, length = number of bins + 1.
    pub edges: Vec<f64>,
    /// Bin index of each observation, in input order.
    pub assignments: Vec<usize>,
    /// Observation count per bin.
    pub counts: Vec<usize>,
    /// Bin midpoints, (edges[j] + edges[j+1]) / 2.
    pub midpoints: Vec<f64>,
}

impl BinPartition {
    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    fn from_edges(edges: Vec<f64>, assignments: Vec<usize>) -> Self {
        let m = edges.len() - 1;
        let mut counts = vec![0usize; m];
        for &a in &assignments {
            counts[a] += 1;
        }
        let midpoints = (0..m).map(|j| 0.5 * (edges[j] + edges[j + 1])).collect();
        BinPartition {
            edges,
            assignments,
            counts,
            midpoints,
        }
    }
}

/// Index of the bin containing `u`, right-open except the last bin.
fn locate(edges: &[f64], u: f64) -> usize {
    let m = edges.len() - 1;
    // first index with edges[idx] > u, minus one; clamp into [0, m-1]
    let idx = edges.partition_point(|&e| e <= u);
    idx.saturating_sub(1).min(m - 1)
}

/// Partition the sample range of `u_values` into `m` equidistant bins.
pub fn make_bins(u_values: &[f64], m: usize) -> Result<BinPartition> {
    if u_values.is_empty() {
        return Err(Error::InvalidInput("no confounder values".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if u_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite confounder value".into()));
    }
    let n = u_values.len();
    if m > n {
        return Err(Error::TooManyBins { m, n });
    }
    let lo = u_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        if m > 1 {
            return Err(Error::DegenerateRange { m });
        }
        // single bin on a zero-width range
        return Ok(BinPartition {
            edges: vec![lo, hi],
            assignments: vec![0; n],
            counts: vec![n],
            midpoints: vec![lo],
        });
    }
    let width = (hi - lo) / m as f64;
    let mut edges: Vec<f64> = (0..=m).map(|i| lo + width * i as f64).collect();
    edges[m] = hi; // exact right endpoint
    let assignments: Vec<usize> = u_values.iter().map(|&u| locate(&edges, u)).collect();
    Ok(BinPartition::from_edges(edges, assignments))
}

/// Merge bins with fewer than `min_bin_size` observations into a neighbor.
///
/// Scans left to right; the first sparse bin is merged into the neighbor
/// with the smaller count, ties broken leftward. Repeats until every bin
/// meets the floor or only one bin remains. Empty bins are sparse like any
/// other. Each final bin is a contiguous union of original intervals.
pub fn merge_sparse_bins(partition: &BinPartition, min_bin_size: usize) -> Result<BinPartition> {
    if min_bin_size == 0 {
        return Err(Error::InvalidInput("min_bin_size must be at least 1".into()));
    }
    let n = partition.n();
    if n < min_bin_size {
        return Err(Error::CannotSatisfy { min_bin_size, n });
    }

    let mut edges = partition.edges.clone();
    let mut counts = partition.counts.clone();
    // original bin index -> current bin index
    let mut owner: Vec<usize> = (0..counts.len()).collect();

    while counts.len() > 1 {
        let Some(j) = counts.iter().position(|&c| c < min_bin_size) else {
            break;
        };
        let neighbor = if j == 0 {
            1
        } else if j == counts.len() - 1 || counts[j - 1] <= counts[j + 1] {
            j - 1
        } else {
            j + 1
        };
        let (keep, gone) = (j.min(neighbor), j.max(neighbor));
        counts[keep] += counts[gone];
        counts.remove(gone);
        edges.remove(gone); // drops the shared interior edge
        for o in owner.iter_mut() {
            if *o > keep {
                *o -= 1;
            }
        }
    }

    let assignments: Vec<usize> = partition.assignments.iter().map(|&a| owner[a]).collect();
    let merged = BinPartition::from_edges(edges, assignments);
    debug_assert_eq!(merged.counts, counts);
    Ok(merged)
}

/// Default bin count when none is requested: round(2·√n), at least 1.
pub fn default_num_bins(n: usize) -> usize {
    ((2.0 * (n as f64).sqrt()).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edge_inclusion_convention() {
        // interior points are left-inclusive, the maximum lands in the last
        // bin by right-closure, and a point exactly on an interior edge
        // belongs to the bin starting there
        let p = make_bins(&[0.0, 0.4, 1.0], 2).unwrap();
        assert_eq!(p.counts, vec![2, 1]);
        assert_eq!(p.assignments, vec![0, 0, 1]);
        let q = make_bins(&[0.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(q.assignments, vec![0, 1, 1]);
    }

    #[test]
    fn single_bin_holds_everything() {
        let u = [3.0, 1.0, 2.0, 5.0];
        let p = make_bins(&u, 1).unwrap();
        assert_eq!(p.counts, vec![4]);
        assert_eq!(p.edges, vec![1.0, 5.0]);
        assert_eq!(p.midpoints, vec![3.0]);
    }

    #[test]
    fn uniform_draws_equal_widths_and_full_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..1000).map(|_| 2.0 + 4.0 * rng.random::<f64>()).collect();
        let m = 20;
        let p = make_bins(&u, m).unwrap();
        let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = (hi - lo) / m as f64;
        for j in 0..m {
            assert!(((p.edges[j + 1] - p.edges[j]) - w).abs() < 1e-12);
        }
        assert_eq!(p.counts.iter().sum::<usize>(), 1000);
        // direct counting oracle over the sample
        for j in 0..m {
            let direct = u
                .iter()
                .filter(|&&v| {
                    if j == m - 1 {
                        v >= p.edges[j] && v <= p.edges[j + 1]
                    } else {
                        v >= p.edges[j] && v < p.edges[j + 1]
                    }
                })
                .count();
            assert_eq!(p.counts[j], direct);
            assert!(p.counts[j] >= 20 && p.counts[j] <= 80, "count {}", p.counts[j]);
        }
    }

    #[test]
    fn too_many_bins_rejected() {
        match make_bins(&[1.0, 2.0], 3) {
            Err(Error::TooManyBins { m: 3, n: 2 }) => {}
            other => panic!("expected TooManyBins, got {:?}", other),
        }
    }

    #[test]
    fn zero_range_rejected_for_multiple_bins() {
        match make_bins(&[2.0, 2.0, 2.0], 2) {
            Err(Error::DegenerateRange { m: 2 }) => {}
            other => panic!("expected DegenerateRange, got {:?}", other),
        }
        // but a single bin is fine
        let p = make_bins(&[2.0, 2.0, 2.0], 1).unwrap();
        assert_eq!(p.counts, vec![3]);
    }

    /// Build a partition with prescribed counts on [0, k) with unit-width bins.
    fn partition_with_counts(counts: &[usize]) -> BinPartition {
        let mut u = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            for i in 0..c {
                u.push(j as f64 + (i as f64 + 0.5) / (c as f64 + 1.0));
            }
        }
        // ensure the full range is spanned even if an end bin is empty
        let m = counts.len();
        let edges: Vec<f64> = (0..=m).map(|i| i as f64).collect();
        let assignments: Vec<usize> = u.iter().map(|&v| locate(&edges, v)).collect();
        BinPartition::from_edges(edges, assignments)
    }

    #[test]
    fn forced_merge_prefers_smaller_neighbor_tie_left() {
        let p = partition_with_counts(&[5, 1, 5]);
        let merged = merge_sparse_bins(&p, 3).unwrap();
        assert_eq!(merged.counts, vec![6, 5]);
        assert_eq!(merged.edges, vec![0.0, 2.0, 3.0]);
    }

    #[test]
    fn merge_is_noop_when_all_bins_large() {
        let p = partition_with_counts(&[10, 10]);
        let merged = merge_sparse_bins(&p, 3).unwrap();
        assert_eq!(merged.counts, vec![10, 10]);
        assert_eq!(merged.edges, p.edges);
    }

    #[test]
    fn merge_into_strictly_smaller_neighbor() {
        let p = partition_with_counts(&[4, 2, 9]);
        let merged = merge_sparse_bins(&p, 3).unwrap();
        assert_eq!(merged.counts, vec![6, 9]);
    }

    #[test]
    fn empty_bins_are_merged_like_sparse_ones() {
        let p = partition_with_counts(&[6, 0, 7]);
        let merged = merge_sparse_bins(&p, 3).unwrap();
        assert_eq!(merged.counts, vec![6, 7]);
    }

    #[test]
    fn cannot_satisfy_with_too_few_observations() {
        let p = partition_with_counts(&[2]);
        match merge_sparse_bins(&p, 5) {
            Err(Error::CannotSatisfy {
                min_bin_size: 5,
                n: 2,
            }) => {}
            other => panic!("expected CannotSatisfy, got {:?}", other),
        }
    }

    #[test]
    fn merging_preserves_counts_and_contiguity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = 60 + (rng.random::<u32>() % 100) as usize;
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
            let m = 2 + (rng.random::<u32>() % 20) as usize;
            let p = make_bins(&u, m).unwrap();
            let merged = merge_sparse_bins(&p, 4).unwrap();
            assert_eq!(merged.counts.iter().sum::<usize>(), n);
            if merged.num_bins() > 1 {
                assert!(merged.counts.iter().all(|&c| c >= 4));
            }
            // final edges are a subset of the original edges: contiguous unions
            for e in &merged.edges {
                assert!(p.edges.iter().any(|o| o == e));
            }
            // midpoints invariant
            for j in 0..merged.num_bins() {
                assert_eq!(
                    merged.midpoints[j],
                    0.5 * (merged.edges[j] + merged.edges[j + 1])
                );
            }
            // observations stay in the bin that covers their original interval
            for (i, &a) in merged.assignments.iter().enumerate() {
                assert!(u[i] >= merged.edges[a]);
                assert!(u[i] <= merged.edges[a + 1]);
            }
        }
    }

    #[test]
    fn binning_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 7.0).collect();
        let a = make_bins(&u, 12).unwrap();
        let b = make_bins(&u, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            merge_sparse_bins(&a, 4).unwrap(),
            merge_sparse_bins(&b, 4).unwrap()
        );
    }

    /// Occupancy statistics comparable to a moderately sized observational
    /// study: a right-skewed body-mass-index-like sample, 36 initial bins,
    /// occupancy floor 3. Merging the sparse tail bins lands on 34 bins
    /// averaging ~15 points.
    #[test]
    fn observational_scale_merge_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 508;
        let u: Vec<f64> = (0..n)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                let z = (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos();
                27.0 + 4.0 * z
            })
            .collect();
        let p = make_bins(&u, 36).unwrap();
        let merged = merge_sparse_bins(&p, 3).unwrap();
        assert_eq!(merged.num_bins(), 34);
        let avg = n as f64 / merged.num_bins() as f64;
        assert!((avg - 14.9).abs() < 0.5, "avg occupancy {}", avg);
        assert!(merged.counts.iter().all(|&c| c >= 3));
    }
}
