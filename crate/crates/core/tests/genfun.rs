use bmc_core::genfun::{
    check_foster, expected_frozen_mean, first_return_coefficients, green_coefficients,
    gw_extinction, rho_from_u, GwLaw, SeriesTable,
};
use bmc_core::models::{
    build_ball, ConeTypeTree, FiniteChain, KernelModel, Offspring, OffspringLaw, StateId,
};
use bmc_core::spectral::{rho_closed_form, CertificateFunction};
use bmc_core::Error;
use proptest::prelude::*;

/// `P(T_0 = 2k) = 2 C_{k−1} (pq)^k` for the ±1 walk, with Catalan numbers
/// built by their own recursion.
fn walk_first_return(p: f64, n: usize) -> Vec<f64> {
    let pq = p * (1.0 - p);
    let mut catalan = vec![1.0f64];
    for k in 1..=n / 2 {
        let prev = catalan[k - 1];
        catalan.push(prev * 2.0 * (2 * k - 1) as f64 / (k + 1) as f64);
    }
    (0..=n)
        .map(|i| if i == 0 || i % 2 == 1 { 0.0 } else { 2.0 * catalan[i / 2 - 1] * pq.powi(i as i32 / 2) })
        .collect()
}

/// `1 − sqrt(1 − 4pq z²)`, the closed-form first-return function.
fn walk_u(p: f64, z: f64) -> f64 {
    1.0 - (1.0 - 4.0 * p * (1.0 - p) * z * z).max(0.0).sqrt()
}

fn renewal_defect(g: &SeriesTable, u: &SeriesTable) -> f64 {
    let (g, u) = (&g.coefficients, &u.coefficients);
    (1..g.len())
        .map(|n| {
            let conv: f64 = (1..=n).map(|k| u[k] * g[n - k]).sum();
            (g[n] - conv).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn green_examples() {
    let drift = KernelModel::walk_z(0.75).unwrap();
    let t = green_coefficients(&drift, &StateId::site(0), 2, 2).unwrap();
    assert!((t.coefficients[2] - 0.375).abs() < 1e-15);

    let seed = KernelModel::seed_chain();
    let t = green_coefficients(&seed, &StateId::site(1), 1, 1).unwrap();
    assert!((t.coefficients[1] - 0.75).abs() < 1e-15);
}

#[test]
fn first_return_examples() {
    let srw = KernelModel::walk_z(0.5).unwrap();
    let t = first_return_coefficients(&srw, &StateId::site(0), 6, 6).unwrap();
    assert_eq!(t.coefficients[0], 0.0);
    assert!((t.coefficients[2] - 0.5).abs() < 1e-15);
    assert!((t.coefficients[4] - 0.125).abs() < 1e-15);

    let seed = KernelModel::seed_chain();
    let t = first_return_coefficients(&seed, &StateId::site(1), 3, 3).unwrap();
    assert!((t.coefficients[1] - 0.75).abs() < 1e-15);
}

#[test]
fn first_return_matches_catalan_oracle() {
    for p in [0.5, 0.75, 0.9] {
        let model = KernelModel::walk_z(p).unwrap();
        let t = first_return_coefficients(&model, &StateId::site(0), 120, 60).unwrap();
        for (a, b) in t.coefficients.iter().zip(walk_first_return(p, 120)) {
            assert!((a - b).abs() < 1e-13, "p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn u_root_of_symmetric_walk() {
    let model = KernelModel::walk_z(0.5).unwrap();
    let t = first_return_coefficients(&model, &StateId::site(0), 200, 100).unwrap();
    let root = rho_from_u(&t).unwrap();
    assert!((root.z_star - 1.0).abs() < 2e-2);
    assert!(root.z_star >= 1.0);
}

#[test]
fn u_root_of_drift_walk() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let t = first_return_coefficients(&model, &StateId::site(0), 200, 100).unwrap();
    let root = rho_from_u(&t).unwrap();
    let target = 2.0 / 3f64.sqrt();
    assert!((walk_u(0.75, target) - 1.0).abs() < 1e-12);
    assert!((root.z_star - target).abs() < 2e-2, "{}", root.z_star);
    assert!(root.z_star >= target);
    assert!(root.estimate.value <= 3f64.sqrt() / 2.0);
    // the truncated series stays below the closed form on [0, 1/ρ]
    for i in 1..=20 {
        let z = target * i as f64 / 20.0;
        assert!(t.eval(z) <= walk_u(0.75, z) + 1e-12);
    }
}

#[test]
fn u_root_of_self_loop() {
    let chain = KernelModel::FiniteChain(FiniteChain::new(vec![vec![(0, 1.0)]], 0).unwrap());
    let t = first_return_coefficients(&chain, &StateId::Node(0), 12, 1).unwrap();
    assert_eq!(t.coefficients[1], 1.0);
    assert!((rho_from_u(&t).unwrap().z_star - 1.0).abs() < 1e-9);
}

#[test]
fn u_root_rejects_degenerate_and_short_tables() {
    let model = KernelModel::walk_z(0.5).unwrap();
    let short = first_return_coefficients(&model, &StateId::site(0), 5, 5).unwrap();
    assert!(matches!(rho_from_u(&short), Err(Error::Parameter(_))));
    let odd = first_return_coefficients(&model, &StateId::site(0), 12, 6).unwrap();
    let zero = SeriesTable { coefficients: vec![0.0; 13], ..odd };
    assert!(matches!(rho_from_u(&zero), Err(Error::DegenerateSeries)));
}

#[test]
fn renewal_identity_on_five_models() {
    let models: Vec<(KernelModel, StateId, u32)> = vec![
        (KernelModel::walk_z(0.75).unwrap(), StateId::site(0), 100),
        (KernelModel::seed_chain(), StateId::site(1), 100),
        (KernelModel::seed_chain(), StateId::site(0), 100),
        (KernelModel::drift_zd(vec![0.3, 0.2], vec![0.3, 0.2]).unwrap(), StateId::Site(vec![0, 0]), 12),
        (KernelModel::regular_tree(3).unwrap(), StateId::Path(Vec::new()), 9),
        (KernelModel::line_tree(5).unwrap(), StateId::Root, 8),
    ];
    for (model, x, radius) in models {
        let g = green_coefficients(&model, &x, 200, radius).unwrap();
        let u = first_return_coefficients(&model, &x, 200, radius).unwrap();
        let defect = renewal_defect(&g, &u);
        assert!(defect < 1e-10, "{}: {defect}", model.label());
        assert!(u.coefficients.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

#[test]
fn green_growth_stays_below_spectral_radius() {
    for (model, x) in [
        (KernelModel::walk_z(0.75).unwrap(), StateId::site(0)),
        (KernelModel::walk_z(0.9).unwrap(), StateId::site(0)),
        (KernelModel::regular_tree(4).unwrap(), StateId::Path(Vec::new())),
    ] {
        let n = if matches!(model, KernelModel::RegularTree(_)) { 16 } else { 200 };
        let g = green_coefficients(&model, &x, n, n as u32 / 2).unwrap();
        let rho = rho_closed_form(&model).unwrap().value;
        assert!(g.root_growth() <= rho + 5e-2, "{}", model.label());
    }
}

#[test]
fn frozen_mean_identity_needs_constant_mean() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let u = first_return_coefficients(&model, &StateId::site(0), 400, 200).unwrap();
    let law = OffspringLaw::constant(Offspring::with_mean(1.05).unwrap());
    let e = expected_frozen_mean(&u, &law).unwrap();
    assert!((e - walk_u(0.75, 1.05)).abs() < 1e-10);
    assert!(e < 1.0);
    let mixed = law.with_state(StateId::site(0), Offspring::binary()).unwrap();
    assert!(matches!(expected_frozen_mean(&u, &mixed), Err(Error::Applicability(_))));
}

#[test]
fn gw_examples() {
    let percolated = GwLaw::new(vec![1.0 / 16.0, 6.0 / 16.0, 9.0 / 16.0]).unwrap();
    let q = gw_extinction(&percolated);
    assert!((q - 1.0 / 9.0).abs() < 1e-10);
    assert!((percolated.pgf(q) - q).abs() < 1e-10);

    assert_eq!(gw_extinction(&GwLaw::new(vec![0.5, 0.0, 0.5]).unwrap()), 1.0);
    assert_eq!(gw_extinction(&GwLaw::new(vec![0.0, 0.0, 1.0]).unwrap()), 0.0);
    assert_eq!(gw_extinction(&GwLaw::new(vec![0.0, 1.0]).unwrap()), 0.0);
    assert!(GwLaw::new(vec![0.5, 0.4]).is_err());
}

fn cycle_foster_setup() -> (KernelModel, OffspringLaw, CertificateFunction) {
    let model = KernelModel::cycle_graph();
    let origin_law = Offspring::new(vec![0.5, 0.0, 0.5]).unwrap();
    let law = OffspringLaw::trivial().with_state(StateId::Root, origin_law).unwrap();
    // remaining steps to the origin, plus one
    let f = CertificateFunction::formula(|x| match x {
        StateId::Cycle { cycle, pos } => ((1u64 << cycle) - pos + 1) as f64,
        _ => 1.0,
    });
    (model, law, f)
}

#[test]
fn foster_holds_on_cycles() {
    let (model, law, f) = cycle_foster_setup();
    let region = build_ball(&model, &StateId::Root, 200, 100_000).unwrap();
    let rep = check_foster(&model, &law, &StateId::Root, &f, 1.0, &region).unwrap();
    assert!(rep.holds);
    assert!(rep.slacks.iter().all(|s| s.1.abs() < 1e-12));
    assert!(rep.global_extension);
    assert!(rep.slacks.iter().all(|s| s.0 != StateId::Root));
}

#[test]
fn foster_fails_for_drift_walk_with_binary_branching() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let region = build_ball(&model, &StateId::site(0), 20, 1000).unwrap();
    for lambda in [0.2, 0.5, 1.0 / 3f64.sqrt(), 0.9, 1.0, 1.5] {
        let f = CertificateFunction::exponential(lambda);
        let rep =
            check_foster(&model, &OffspringLaw::binary(), &StateId::site(0), &f, 0.01, &region).unwrap();
        assert!(!rep.holds, "lambda {lambda}");
    }
}

#[test]
fn foster_fails_for_constant_function() {
    let model = KernelModel::walk_z(0.75).unwrap();
    let region = build_ball(&model, &StateId::site(0), 5, 1000).unwrap();
    let law = OffspringLaw::constant(Offspring::with_mean(1.5).unwrap());
    let rep = check_foster(&model, &law, &StateId::site(0), &CertificateFunction::constant(3.0), 0.5, &region)
        .unwrap();
    assert!(!rep.holds);
    assert!((rep.min_slack - (2.5 / 1.5 - 3.0)).abs() < 1e-12);
}

#[test]
fn foster_rejects_nonpositive_origin_value() {
    let (model, law, _) = cycle_foster_setup();
    let region = build_ball(&model, &StateId::Root, 4, 1000).unwrap();
    let f = CertificateFunction::constant(0.0);
    assert!(matches!(
        check_foster(&model, &law, &StateId::Root, &f, 1.0, &region),
        Err(Error::InvalidCertificate(_))
    ));
}

#[test]
fn series_rows_for_csv() {
    let model = KernelModel::walk_z(0.5).unwrap();
    let t = green_coefficients(&model, &StateId::site(0), 3, 3).unwrap();
    let rows = t.rows("srw");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2].kind, "green");
    assert_eq!(rows[2].center, "0");
}

fn gw_law_strategy() -> impl Strategy<Value = GwLaw> {
    prop::collection::vec(0.0f64..1.0, 2..6).prop_filter_map("nonzero", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| GwLaw::new(w.iter().map(|x| x / total).collect()).ok()).flatten()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extinction_is_a_fixed_point(law in gw_law_strategy()) {
        let q = gw_extinction(&law);
        prop_assert!((law.pgf(q) - q).abs() < 1e-10);
        let mu1 = law.masses()[1];
        if mu1 < 1.0 && (law.mean() - 1.0).abs() > 1e-6 {
            prop_assert_eq!(q < 1.0, law.mean() > 1.0);
        }
    }

    #[test]
    fn subcritical_laws_die_out(w in prop::collection::vec(0.01f64..1.0, 3)) {
        // mass pushed onto 0 until the mean is below one
        let total: f64 = w.iter().sum();
        let mut masses: Vec<f64> = w.iter().map(|x| x / total).collect();
        masses[0] += masses[2];
        masses[2] = 0.0;
        let law = GwLaw::new(masses).unwrap();
        prop_assert!(law.mean() < 1.0);
        prop_assert_eq!(gw_extinction(&law), 1.0);
    }

    #[test]
    fn renewal_holds_for_random_walks(p in 0.05f64..0.95, n in 10usize..120) {
        let model = KernelModel::walk_z(p).unwrap();
        let g = green_coefficients(&model, &StateId::site(0), n, n as u32).unwrap();
        let u = first_return_coefficients(&model, &StateId::site(0), n, n as u32).unwrap();
        prop_assert!(renewal_defect(&g, &u) < 1e-10);
        prop_assert!(u.coefficients.iter().all(|&a| (0.0..=1.0).contains(&a)));
        prop_assert!(u.coefficients.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn renewal_holds_for_cone_trees(back in 0.1f64..0.9, children in 1u32..4) {
        let model = KernelModel::ConeTypeTree(ConeTypeTree::single(children, back).unwrap());
        let g = green_coefficients(&model, &model.origin(), 16, 8).unwrap();
        let u = first_return_coefficients(&model, &model.origin(), 16, 8).unwrap();
        prop_assert!(g.exact);
        prop_assert!(renewal_defect(&g, &u) < 1e-10);
    }
}
