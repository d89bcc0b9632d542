use bmc_core::classify::{
    analytic_verdict, empirical_verdict, reconcile, Phase, PhaseVerdict, TolProfile, THRESHOLD_TOL,
};
use bmc_core::engine::{CiMethod, Estimate, Estimator, SimulationSummary, TailFit};
use bmc_core::models::{ConeType, ConeTypeTree, KernelModel, Offspring, OffspringLaw, StateId};
use bmc_core::Error;
use proptest::prelude::*;

fn with_mean(m: f64) -> OffspringLaw {
    OffspringLaw::constant(Offspring::with_mean(m).unwrap())
}

fn verdict(model: &KernelModel, m: f64) -> PhaseVerdict {
    analytic_verdict(model, &with_mean(m), THRESHOLD_TOL).unwrap()
}

#[test]
fn drift_walk_two_phases() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    assert_eq!(verdict(&walk, 1.05).phase, Phase::Transient);
    let v = verdict(&walk, 2.0);
    assert_eq!(v.phase, Phase::PositiveRecurrent);
    assert!((v.threshold("1/rho").unwrap().value - 2.0 / 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn critical_mean_is_transient_with_note() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    let v = verdict(&walk, 2.0 / 3f64.sqrt());
    assert_eq!(v.phase, Phase::Transient);
    assert!(v.boundary_note.is_some());
}

#[test]
fn overrides_drop_positive_recurrence() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    let law = with_mean(2.0).with_state(StateId::site(5), Offspring::with_mean(2.0).unwrap()).unwrap();
    let v = analytic_verdict(&walk, &law, THRESHOLD_TOL).unwrap();
    assert_eq!(v.phase, Phase::StronglyRecurrent);
}

#[test]
fn planar_drift_is_only_strong() {
    let walk = KernelModel::drift_zd(vec![0.3, 0.25], vec![0.2, 0.25]).unwrap();
    assert_eq!(verdict(&walk, 1.5).phase, Phase::StronglyRecurrent);
}

#[test]
fn regular_tree_phases() {
    let tree = KernelModel::regular_tree(4).unwrap();
    // 1/rho = 2/sqrt(3)
    assert_eq!(verdict(&tree, 1.1).phase, Phase::Transient);
    assert_eq!(verdict(&tree, 1.2).phase, Phase::StronglyRecurrent);
}

#[test]
fn line_tree_three_phases() {
    let model = KernelModel::line_tree(5).unwrap();
    // 1/rho = sqrt(6/4), 1/varrho = 5/4
    assert_eq!(verdict(&model, 1.20).phase, Phase::Transient);
    assert_eq!(verdict(&model, 1.5f64.sqrt()).phase, Phase::Transient);
    assert_eq!(verdict(&model, 1.23).phase, Phase::WeaklyRecurrent);
    assert_eq!(verdict(&model, 1.30).phase, Phase::StronglyRecurrent);
    let v = verdict(&model, 1.25);
    assert_eq!(v.phase, Phase::WeaklyRecurrent);
    assert!(v.boundary_note.unwrap().contains("attained"));
}

#[test]
fn seed_chain_is_never_strong_below_homogeneous_threshold() {
    let model = KernelModel::seed_chain();
    // the lazy seed pushes rho above the homogeneous value 1/2
    let v = verdict(&model, 1.05);
    assert_eq!(v.phase, Phase::Transient);
    assert!(v.threshold("1/rho").unwrap().value < 1.2);
    assert_eq!(verdict(&model, 1.5).phase, Phase::WeaklyRecurrent);
    assert_eq!(verdict(&model, 2.0).phase, Phase::WeaklyRecurrent);
    assert_eq!(verdict(&model, 2.5).phase, Phase::Unknown);
}

#[test]
fn reducible_cone_tree_has_three_phases() {
    let root = ConeType { children: vec![(1, 0.5), (2, 0.5)], back: 0.5 };
    let line = ConeType { children: vec![(1, 1.0)], back: 0.5 };
    let binary = ConeType { children: vec![(2, 0.5), (2, 0.5)], back: 1.0 / 3.0 };
    let model = KernelModel::ConeTypeTree(ConeTypeTree::new(vec![root, line, binary], 0).unwrap());
    let v = verdict(&model, 1.2);
    assert_eq!(v.phase, Phase::StronglyRecurrent);
    assert!(v.threshold("1/tilde_rho").is_some());
}

#[test]
fn irreducible_cone_tree_has_two_phases() {
    let model = KernelModel::ConeTypeTree(ConeTypeTree::single(2, 0.4).unwrap());
    let v = verdict(&model, 1.5);
    assert_eq!(v.thresholds.len(), 1);
    assert!(matches!(v.phase, Phase::Transient | Phase::StronglyRecurrent | Phase::Boundary));
}

#[test]
fn no_branching_is_unknown() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    assert_eq!(analytic_verdict(&walk, &OffspringLaw::trivial(), THRESHOLD_TOL).unwrap().phase, Phase::Unknown);
}

#[test]
fn varying_mean_is_rejected() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    let law = with_mean(1.5).with_state(StateId::site(0), Offspring::with_mean(3.0).unwrap()).unwrap();
    assert!(matches!(analytic_verdict(&walk, &law, THRESHOLD_TOL), Err(Error::Applicability(_))));
}

fn summary(estimator: Estimator, estimates: Vec<Estimate>) -> SimulationSummary {
    SimulationSummary {
        estimator,
        replicas: 1000,
        seed: 0,
        horizon: 150,
        pop_cap: 1_000_000,
        level: 0.95,
        estimates,
        tail: Vec::new(),
        tail_fit: None,
        speed_trace: Vec::new(),
        k: Some(50),
        notes: Vec::new(),
        results: Vec::new(),
    }
}

fn estimate(name: &'static str, value: f64, lo: f64, hi: f64) -> Estimate {
    Estimate { name, value, ci_low: lo, ci_high: hi, method: CiMethod::Normal, samples: 1000 }
}

fn frozen(lo: f64, hi: f64) -> SimulationSummary {
    summary(Estimator::FrozenMean, vec![estimate("mean", (lo + hi) / 2.0, lo, hi)])
}

fn alpha(a: f64) -> SimulationSummary {
    summary(Estimator::AlphaProxy, vec![estimate("alpha", a, a - 0.03, a + 0.03)])
}

fn tail(r2: f64) -> SimulationSummary {
    let mut s = summary(Estimator::ReturnTime, vec![estimate("mean_uncensored", 3.0, 2.9, 3.1)]);
    s.tail_fit = Some(TailFit { slope: -0.4, intercept: 0.0, r2 });
    s
}

#[test]
fn empirical_examples() {
    let p = TolProfile::default();
    assert_eq!(empirical_verdict(&[frozen(0.82, 0.94)], &p).unwrap().phase, Phase::Transient);
    assert_eq!(empirical_verdict(&[frozen(1.3, 1.6), alpha(0.52)], &p).unwrap().phase, Phase::WeaklyRecurrent);
    assert_eq!(
        empirical_verdict(&[frozen(2.1, 2.4), alpha(0.98), tail(0.95)], &p).unwrap().phase,
        Phase::PositiveRecurrent
    );
    assert_eq!(
        empirical_verdict(&[frozen(2.1, 2.4), alpha(0.98), tail(0.5)], &p).unwrap().phase,
        Phase::StronglyRecurrent
    );
    assert_eq!(empirical_verdict(&[frozen(0.9, 1.2)], &p).unwrap().phase, Phase::Unknown);
    assert_eq!(empirical_verdict(&[frozen(1.3, 1.6)], &p).unwrap().phase, Phase::Unknown);
}

#[test]
fn empirical_needs_frozen_mean() {
    assert!(empirical_verdict(&[alpha(0.5)], &TolProfile::default()).is_err());
}

#[test]
fn reconcile_keeps_the_analytic_verdict() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    let a = verdict(&walk, 2.0).with_ids("walk", "m2");
    let e = empirical_verdict(&[frozen(2.1, 2.4), alpha(0.98)], &TolProfile::default())
        .unwrap()
        .with_ids("walk", "m2");
    let r = reconcile(&a, &e).unwrap();
    assert!(r.agree);
    assert!(!r.near_boundary);

    let a = verdict(&walk, 1.16).with_ids("walk", "m116");
    let e = empirical_verdict(&[frozen(0.95, 1.01)], &TolProfile::default()).unwrap().with_ids("walk", "m116");
    let r = reconcile(&a, &e).unwrap();
    assert!(!r.agree);
    assert!(r.near_boundary);
    assert_eq!(r.analytic, Phase::PositiveRecurrent);
    assert!(r.note.contains("stands"));
}

#[test]
fn reconcile_rejects_mismatched_ids() {
    let walk = KernelModel::walk_z(0.75).unwrap();
    let a = verdict(&walk, 2.0).with_ids("walk", "m2");
    let e = empirical_verdict(&[frozen(2.1, 2.4)], &TolProfile::default()).unwrap().with_ids("tree", "m2");
    assert!(matches!(reconcile(&a, &e), Err(Error::IdMismatch(_))));
}

#[test]
fn verdict_serializes() {
    let v = verdict(&KernelModel::line_tree(5).unwrap(), 1.23).with_ids("line5", "m123");
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["phase"], "weakly_recurrent");
    let row = v.row();
    assert_eq!(row.phase, "WeaklyRecurrent");
    assert!((row.inverse_rho.unwrap() - 1.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(row.second_threshold, Some(1.25));
}

fn rank(p: Phase) -> u8 {
    match p {
        Phase::Transient => 0,
        Phase::WeaklyRecurrent => 1,
        Phase::StronglyRecurrent | Phase::PositiveRecurrent => 2,
        other => panic!("unexpected phase {other:?}"),
    }
}

proptest! {
    #[test]
    fn phase_is_monotone_in_mean(degree in 5u32..9, a in 1.01f64..3.0, b in 1.01f64..3.0) {
        let model = KernelModel::line_tree(degree).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(verdict(&model, lo).phase) <= rank(verdict(&model, hi).phase));
    }

    #[test]
    fn drift_walk_flips_at_inverse_rho(p in 0.55f64..0.95, m in 1.01f64..3.0) {
        let walk = KernelModel::walk_z(p).unwrap();
        let t = 1.0 / (2.0 * (p * (1.0 - p)).sqrt());
        prop_assume!((m - t).abs() > 1e-6);
        let v = verdict(&walk, m);
        prop_assert_eq!(v.phase == Phase::Transient, m < t);
    }
}

