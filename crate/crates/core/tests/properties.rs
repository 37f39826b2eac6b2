//! Property tests for the binning and interval invariants.

use carfit_core::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn binning_partitions_every_observation(
        u in prop::collection::vec(-50.0f64..50.0, 2..200),
        m_frac in 0.01f64..1.0,
    ) {
        let m = ((u.len() as f64 * m_frac).ceil() as usize).clamp(1, u.len());
        let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(lo < hi || m == 1);
        let p = make_bins(&u, m).unwrap();
        prop_assert_eq!(p.counts.iter().sum::<usize>(), u.len());
        prop_assert_eq!(p.assignments.len(), u.len());
        for (i, &a) in p.assignments.iter().enumerate() {
            prop_assert!(u[i] >= p.edges[a] && u[i] <= p.edges[a + 1]);
        }
        // equal widths
        if m > 1 {
            let w = (hi - lo) / m as f64;
            for j in 0..m {
                prop_assert!(((p.edges[j + 1] - p.edges[j]) - w).abs() < 1e-9 * (1.0 + w.abs()));
            }
        }
    }

    #[test]
    fn merging_preserves_mass_and_respects_floor(
        u in prop::collection::vec(0.0f64..10.0, 10..150),
        m in 2usize..25,
        min_bin in 1usize..8,
    ) {
        prop_assume!(m <= u.len());
        prop_assume!(min_bin <= u.len());
        let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(lo < hi);
        let p = make_bins(&u, m).unwrap();
        let merged = merge_sparse_bins(&p, min_bin).unwrap();
        prop_assert_eq!(merged.counts.iter().sum::<usize>(), u.len());
        if merged.num_bins() > 1 {
            prop_assert!(merged.counts.iter().all(|&c| c >= min_bin));
        }
        // merged edges are a subset of the original edges
        for e in &merged.edges {
            prop_assert!(p.edges.iter().any(|o| o == e));
        }
    }

    #[test]
    fn intervals_are_symmetric_and_scale(
        est in -100.0f64..100.0,
        var in 0.0f64..50.0,
        n in 1usize..100_000,
        level in 0.001f64..0.999,
    ) {
        let ci = confidence_interval(est, var, n, level).unwrap();
        prop_assert!(ci.lower <= ci.estimate && ci.estimate <= ci.upper);
        prop_assert!(((ci.estimate - ci.lower) - (ci.upper - ci.estimate)).abs() <= 1e-12);
        let z = standard_normal_quantile(0.5 + level / 2.0);
        prop_assert!((ci.width() - 2.0 * z * ci.std_error).abs() <= 1e-12 * (1.0 + ci.width()));
        // quadrupling n halves the width
        let wide = confidence_interval(est, var, 4 * n, level).unwrap();
        prop_assert!((ci.width() - 2.0 * wide.width()).abs() <= 1e-10 * (1.0 + ci.width()));
    }

    #[test]
    fn quantile_inverts_the_gaussian_tail_bound(p in 0.0005f64..0.9995) {
        // monotone and symmetric
        let z = standard_normal_quantile(p);
        let z2 = standard_normal_quantile(p + 0.0004);
        prop_assert!(z2 >= z);
        prop_assert!((standard_normal_quantile(1.0 - p) + z).abs() < 1e-9);
    }
}
