mod common;

use std::f64::consts::PI;

use bmc_core::models::{
    build_ball, lumped_cone_ball, ConeType, ConeTypeTree, FiniteRegion, KernelModel,
    OffspringLaw, Offspring, RegionKind, StateId,
};
use bmc_core::spectral::{
    check_superharmonic, perron, rho_closed_form, rho_finite, rho_finite_with, rho_truncation_sequence,
    rho_variant, CertificateFunction, SpectralOptions, Variant,
};
use common::{dense_spectral_radius, path_eigenvalue, region_radius};
use proptest::prelude::*;

const S3: f64 = 0.866_025_403_784_438_6;

#[test]
fn srw_radius_one_is_three_path() {
    let model = KernelModel::walk_z(0.5).unwrap();
    let ball = build_ball(&model, &StateId::site(0), 1, 100).unwrap();
    let est = rho_finite(&ball, 1e-12).unwrap();
    // characteristic polynomial of the 3-path: −λ³ + λ/2
    assert!((est.value - 0.5f64.sqrt()).abs() < 1e-10);
    assert!((est.value - (PI / 4.0).cos()).abs() < 1e-10);
}

#[test]
fn drift_radius_32_bounds() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let ball = build_ball(&model, &StateId::site(0), 32, 1000).unwrap();
    let est = rho_finite(&ball, 1e-10).unwrap();
    assert!(est.value >= 0.860 && est.value < S3, "{}", est.value);
    assert!((est.value - path_eigenvalue(65, 0.75)).abs() < 1e-9);
    let small = build_ball(&model, &StateId::site(0), 6, 1000).unwrap();
    let dense = region_radius(&small);
    assert!((rho_finite(&small, 1e-12).unwrap().value - dense).abs() < 1e-9);
}

#[test]
fn srw_sequence_follows_path_formula() {
    let model = KernelModel::walk_z(0.5).unwrap();
    let seq =
        rho_truncation_sequence(&model, &StateId::site(0), 60, &SpectralOptions::with_tol(1e-11))
            .unwrap();
    assert_eq!(seq.len(), 60);
    for (i, e) in seq.iter().enumerate() {
        let n = i as f64 + 1.0;
        assert!((e.value - (PI / (2.0 * n + 2.0)).cos()).abs() < 1e-9, "radius {n}");
    }
    assert!(seq.last().unwrap().value >= 0.9987);
}

#[test]
fn drift_sequence_reaches_closed_form() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let seq =
        rho_truncation_sequence(&model, &StateId::site(0), 60, &SpectralOptions::default()).unwrap();
    let last = seq.last().unwrap().value;
    assert!((last - S3).abs() < 1e-3, "{last}");
    assert!(seq.windows(2).all(|w| w[1].value >= w[0].value - 1e-9));
}

/// Radial chain of the M-regular tree ball: root → level 1 with prob 1,
/// level k → k−1 with 1/M and → k+1 with (M−1)/M.
fn radial_tree_radius(m: u32, depth: usize) -> f64 {
    let n = depth + 1;
    let mut rows = vec![vec![0.0; n]; n];
    let w = 1.0 / m as f64;
    for k in 0..n {
        if k + 1 < n {
            rows[k][k + 1] = if k == 0 { 1.0 } else { 1.0 - w };
        }
        if k > 0 {
            rows[k][k - 1] = w;
        }
    }
    dense_spectral_radius(&rows)
}

#[test]
fn regular_tree_depth_sequence_matches_radial_oracle() {
    let model = KernelModel::regular_tree(4).unwrap();
    let seq =
        rho_truncation_sequence(&model, &model.origin(), 8, &SpectralOptions::default()).unwrap();
    for (i, e) in seq.iter().enumerate() {
        let oracle = radial_tree_radius(4, i + 1);
        assert!((e.value - oracle).abs() < 1e-8, "depth {}: {} vs {oracle}", i + 1, e.value);
        assert!(e.value <= S3 + 1e-9);
    }
}

#[test]
fn closed_form_examples() {
    assert!((rho_closed_form(&KernelModel::walk_z(0.75).unwrap()).unwrap().value - S3).abs() < 1e-15);
    assert!((rho_closed_form(&KernelModel::regular_tree(4).unwrap()).unwrap().value - S3).abs() < 1e-15);
    let lt = rho_closed_form(&KernelModel::line_tree(5).unwrap()).unwrap().value;
    assert!((lt - 0.816_497).abs() < 1e-6);
}

#[test]
fn line_tree_closed_form_matches_truncation() {
    let model = KernelModel::line_tree(5).unwrap();
    let seq =
        rho_truncation_sequence(&model, &StateId::Root, 8, &SpectralOptions::default()).unwrap();
    let last = seq.last().unwrap().value;
    assert!((last - (4.0f64 / 6.0).sqrt()).abs() < 2e-3, "{last}");
    assert!(last <= (4.0f64 / 6.0).sqrt() + 1e-9);
}

#[test]
fn varrho_of_line_tree() {
    let model = KernelModel::line_tree(5).unwrap();
    let rep = rho_variant(&model, Variant::Varrho, &SpectralOptions::default()).unwrap();
    assert!((rep.estimate.value - 0.8).abs() < 1e-12);
    assert_eq!(rep.argmin, Some(0));
    assert_eq!(rep.attained, Some(true));
    // the 3-path component is a finite stochastic chain
    assert!((rep.parts[1].1.value - 1.0).abs() < 1e-12);
}

#[test]
fn tilde_rho_of_two_class_tree() {
    let root = ConeType { children: vec![(1, 0.5), (2, 0.5)], back: 0.5 };
    let line = ConeType { children: vec![(1, 1.0)], back: 0.5 };
    let binary = ConeType { children: vec![(2, 0.5), (2, 0.5)], back: 1.0 / 3.0 };
    let tree = ConeTypeTree::new(vec![root, line, binary], 0).unwrap();
    let model = KernelModel::ConeTypeTree(tree);
    let rep = rho_variant(&model, Variant::TildeRho, &SpectralOptions::default()).unwrap();
    let target = 2.0 * 2f64.sqrt() / 3.0;
    assert!((rep.estimate.value - target).abs() < 2e-3, "{}", rep.estimate.value);
    assert!(rep.estimate.value <= target + 1e-9);
    assert_eq!(rep.parts.len(), 2);
    // the line class tends to 1 and does not attain the minimum
    assert!(rep.parts[0].1.value > 0.99);
    assert_eq!(rep.argmin, Some(1));
}

#[test]
fn check_rho_of_transitive_walk() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let opts = SpectralOptions { radius: 60, ..SpectralOptions::default() };
    let rep = rho_variant(&model, Variant::CheckRho, &opts).unwrap();
    assert!((rep.estimate.value - S3).abs() < 1e-3);
    assert_eq!(rep.estimate.radius, Some(60));
}

#[test]
fn check_rho_of_seed_chain_is_homogeneous_value() {
    let model = KernelModel::seed_chain();
    let opts = SpectralOptions { radius: 40, ..SpectralOptions::default() };
    let rep = rho_variant(&model, Variant::CheckRho, &opts).unwrap();
    // far from the seed the ball is a homogeneous drift path
    assert!((rep.estimate.value - path_eigenvalue(81, (2.0 + 3f64.sqrt()) / 4.0)).abs() < 1e-8);
}

#[test]
fn check_rho_of_line_tree_glue() {
    let model = KernelModel::line_tree(5).unwrap();
    let opts = SpectralOptions { radius: 5, ..SpectralOptions::default() };
    let rep = rho_variant(&model, Variant::CheckRho, &opts).unwrap();
    let rho = rho_variant(&model, Variant::Rho, &opts).unwrap().estimate.value;
    assert!(rep.estimate.value < rho);
    assert!(rep.estimate.value > 0.6);
}

#[test]
fn variant_family_mismatch_is_rejected() {
    let model = KernelModel::walk_z(0.75).unwrap();
    assert!(rho_variant(&model, Variant::Varrho, &SpectralOptions::default()).is_err());
}

#[test]
fn superharmonic_examples() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let region = build_ball(&model, &StateId::site(0), 10, 1000).unwrap();

    let harmonic = CertificateFunction::exponential(1.0 / 3.0);
    let rep = check_superharmonic(&model, &OffspringLaw::trivial(), &harmonic, &region).unwrap();
    assert!(rep.holds);
    assert!(rep.slacks.iter().all(|s| s.1.abs() < 1e-9));

    let lambda = 1.0 / 3f64.sqrt();
    let m = 2.0 / 3f64.sqrt();
    let law = OffspringLaw::constant(Offspring::with_mean(m).unwrap());
    let rep = check_superharmonic(&model, &law, &CertificateFunction::exponential(lambda), &region)
        .unwrap();
    assert!(rep.holds);
    assert!(rep.min_slack.abs() < 1e-9);

    let rep = check_superharmonic(
        &model,
        &OffspringLaw::binary(),
        &CertificateFunction::exponential(lambda),
        &region,
    )
    .unwrap();
    assert!(!rep.holds);
    assert!(rep.min_slack < 0.0);
}

#[test]
fn nonpositive_certificate_is_rejected() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let region = build_ball(&model, &StateId::site(0), 2, 100).unwrap();
    let f = CertificateFunction::formula(|x| x.coordinate().unwrap() as f64);
    assert!(check_superharmonic(&model, &OffspringLaw::binary(), &f, &region).is_err());
}

fn random_region(n: usize, weights: Vec<f64>) -> FiniteRegion {
    let states = (0..n as u32).map(StateId::Node).collect();
    let mut rows = Vec::new();
    let mut w = weights.into_iter();
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut raw = Vec::new();
        for j in 0..n {
            let x: f64 = w.next().unwrap_or(0.0);
            // the cycle i → i+1 keeps the matrix irreducible
            let keep = j == (i + 1) % n || x > 0.6;
            if keep {
                raw.push((j, x + 0.05));
            }
        }
        let total: f64 = raw.iter().map(|e| e.1).sum();
        let mass = 0.5 + 0.5 * (i as f64 / n as f64);
        row.extend(raw.into_iter().map(|(j, x)| (j, mass * x / total)));
        rows.push(row);
    }
    FiniteRegion::from_rows(states, 0, 0, RegionKind::Custom, rows).unwrap()
}

fn srw_cone_tree(children: u32) -> ConeTypeTree {
    ConeTypeTree::single(children, 1.0 / (children as f64 + 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncations_are_monotone_lower_bounds(
        p in prop::collection::vec(0.05f64..0.95, 1..3),
        bias in 0.05f64..0.95,
    ) {
        let d = p.len();
        let total: f64 = p.iter().sum();
        let p_plus: Vec<f64> = p.iter().map(|x| x / total * bias).collect();
        let p_minus: Vec<f64> = p.iter().map(|x| x / total * (1.0 - bias)).collect();
        let model = KernelModel::drift_zd(p_plus, p_minus).unwrap();
        let radius = if d == 1 { 12 } else { 6 };
        let tol = 1e-9;
        let seq = rho_truncation_sequence(&model, &model.origin(), radius, &SpectralOptions::with_tol(tol)).unwrap();
        let closed = rho_closed_form(&model).unwrap().value;
        for w in seq.windows(2) {
            prop_assert!(w[1].value >= w[0].value - tol);
        }
        for e in &seq {
            prop_assert!(e.value <= closed + tol);
            prop_assert!(e.value <= 1.0 + tol);
        }
    }

    #[test]
    fn power_iteration_certificate(n in 2usize..9, weights in prop::collection::vec(0.0f64..1.0, 81)) {
        let region = random_region(n, weights);
        let tol = 1e-10;
        let p = perron(&region, tol, 1_000_000).unwrap();
        let mut qv = vec![0.0; n];
        region.matvec(&p.vector, &mut qv);
        for (a, b) in qv.iter().zip(&p.vector) {
            prop_assert!(*a <= (p.lambda + tol) * b + 1e-15);
        }
        prop_assert!(p.residual <= tol);
        prop_assert!((p.lambda - region_radius(&region)).abs() < 1e-8);
    }

    #[test]
    fn tree_truncations_respect_the_degree_bound(children in 1u32..8) {
        let tree = srw_cone_tree(children);
        let m = children as f64 + 1.0;
        let region = lumped_cone_ball(&tree, 0, true, None, 120, 10_000).unwrap();
        let est = rho_finite_with(&region, 1e-7, 5_000_000).unwrap();
        prop_assert!(est.value >= 2.0 * (m - 1.0).sqrt() / m - 1e-3);
    }

    #[test]
    fn lumped_ball_matches_explicit_ball(
        backs in prop::collection::vec(0.1f64..0.9, 2),
        split in 0.1f64..0.9,
        radius in 1u32..6,
    ) {
        let a = ConeType { children: vec![(0, split), (1, 1.0 - split)], back: backs[0] };
        let b = ConeType { children: vec![(0, 0.5), (1, 0.25), (1, 0.25)], back: backs[1] };
        let tree = ConeTypeTree::new(vec![a, b], 1).unwrap();
        let lumped = lumped_cone_ball(&tree, 1, true, None, radius, 100_000).unwrap();
        let model = KernelModel::ConeTypeTree(tree);
        let explicit = build_ball(&model, &model.origin(), radius, 100_000).unwrap();
        let x = rho_finite(&lumped, 1e-12).unwrap().value;
        let y = rho_finite(&explicit, 1e-12).unwrap().value;
        prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
    }
}
