mod common;

use common::*;
use kps_core::dist::RngStream;
use kps_core::kps::{kpst_pair, Formula};
use kps_core::{kpst, kpst_star, KpsOptions, KpsSample};

#[test]
fn kpst_is_invariant_to_rotations_without_normalization() {
    let opts = KpsOptions::unnormalized();
    for (seed, (p, k)) in [(2, 2), (2, 3), (3, 2), (3, 3)].into_iter().enumerate() {
        let mut rng = RngStream::new(100 + seed as u64, 0);
        let s = heteroskedastic_sample(&mut rng, 300, p, k);
        let moved = transform(&s, &random_orthogonal(&mut rng, p), &random_orthogonal(&mut rng, k));
        let (a, a_star) = kpst_pair(&s, &opts).unwrap();
        let (b, b_star) = kpst_pair(&moved, &opts).unwrap();
        assert!(relative_change(a, b) < 1e-8, "{a} vs {b}");
        assert!(relative_change(a_star, b_star) > 1e-6, "{a_star} vs {b_star}");
    }
}

#[test]
fn normalized_kpst_is_invariant_to_nonsingular_maps() {
    let opts = KpsOptions::default();
    for (seed, (p, k)) in [(2, 2), (2, 3), (3, 3)].into_iter().enumerate() {
        let mut rng = RngStream::new(200 + seed as u64, 0);
        let s = heteroskedastic_sample(&mut rng, 250, p, k);
        let moved = transform(&s, &random_nonsingular(&mut rng, p), &random_nonsingular(&mut rng, k));
        let a = kpst(&s, &opts).unwrap().statistic;
        let b = kpst(&moved, &opts).unwrap().statistic;
        assert!(relative_change(a, b) < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn unnormalized_kpst_is_not_invariant_to_nonsingular_maps() {
    let mut rng = RngStream::new(7, 0);
    let s = heteroskedastic_sample(&mut rng, 250, 2, 3);
    let moved = transform(&s, &random_nonsingular(&mut rng, 2), &random_nonsingular(&mut rng, 3));
    let opts = KpsOptions::unnormalized();
    let a = kpst(&s, &opts).unwrap().statistic;
    let b = kpst(&moved, &opts).unwrap().statistic;
    assert!(relative_change(a, b) > 1e-6);
}

#[test]
fn full_and_simplified_formulas_agree() {
    for seed in 0..12u64 {
        let (p, k) = [(2, 2), (2, 3), (3, 2), (3, 3)][seed as usize % 4];
        let mut rng = RngStream::new(300 + seed, 0);
        let s = heteroskedastic_sample(&mut rng, 150, p, k);
        for normalize in [false, true] {
            let full = KpsOptions { normalize, formula: Formula::Full, rank_policy: None };
            let simple = KpsOptions { formula: Formula::Simplified, ..full };
            let a = kpst_pair(&s, &full).unwrap();
            let b = kpst_pair(&s, &simple).unwrap();
            assert!(relative_change(a.0, b.0) < 1e-8);
            assert!(relative_change(a.1, b.1) < 1e-8);
        }
    }
}

#[test]
fn singleton_clusters_match_unclustered_bitwise() {
    let mut rng = RngStream::new(9, 0);
    let s = heteroskedastic_sample(&mut rng, 120, 2, 3);
    let labels: Vec<String> = (0..120).map(|i| format!("c{i}")).collect();
    let clustered = s.clone().with_clusters(labels).unwrap();
    for opts in [KpsOptions::default(), KpsOptions::unnormalized()] {
        let a = kpst(&s, &opts).unwrap();
        let b = kpst(&clustered, &opts).unwrap();
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        assert!(b.clustered && !a.clustered);
        let a = kpst_star(&s, &opts).unwrap();
        let b = kpst_star(&clustered, &opts).unwrap();
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
    }
}

#[test]
fn cluster_labels_are_only_a_partition() {
    // Relabelling clusters or reordering observations leaves the result unchanged.
    let mut rng = RngStream::new(10, 0);
    let s = heteroskedastic_sample(&mut rng, 90, 2, 2);
    let labels: Vec<String> = (0..90).map(|i| format!("g{}", i % 30)).collect();
    let a = kpst(&s.clone().with_clusters(labels.clone()).unwrap(), &KpsOptions::default()).unwrap();
    assert_eq!(a.n_effective, 30);
    assert_eq!(a.n_obs, 90);

    let order: Vec<usize> = (0..90).rev().collect();
    let v = nalgebra::DMatrix::from_fn(90, 2, |i, j| s.vhat()[(order[i], j)]);
    let z = nalgebra::DMatrix::from_fn(90, 2, |i, j| s.z()[(order[i], j)]);
    let relabelled: Vec<String> = order.iter().map(|&i| format!("h{}", labels[i])).collect();
    let b = KpsSample::from_matrices(v, z).unwrap().with_clusters(relabelled).unwrap();
    let b = kpst(&b, &KpsOptions::default()).unwrap();
    assert!(relative_change(a.statistic, b.statistic) < 1e-10);
}
