use super::*;
use crate::barycenter::tests::random_set;
use crate::barycenter::{solve_barycenter, BarycenterOptions, NStarTransport};
use crate::centroid::build_centroids;
use crate::measure::DiscreteMeasure;
use crate::scalar::Rational;
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

fn measure(points: &[&[f64]], masses: &[f64]) -> DiscreteMeasure<f64> {
    DiscreteMeasure::new(points[0].len(), points.iter().map(|p| p.to_vec()).collect(), masses.to_vec()).unwrap()
}

fn dirac_and_pair() -> MeasureSet<f64> {
    MeasureSet::new(vec![DiscreteMeasure::dirac(vec![0.0]), measure(&[&[-1.0], &[1.0]], &[0.5, 0.5])]).unwrap()
}

#[test]
fn optimal_result_does_not_split() {
    let ms = dirac_and_pair();
    let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
    let rep = check_no_mass_splitting(&r, &ms);
    assert!(rep.pass, "{:?}", rep.violations);
    assert_eq!(rep.targets.len(), 4);
    let c = certify(&r, &ms, &SolveOptions::default()).unwrap();
    assert!(c.potentials.certified(), "{:?}", c.potentials.violations);
    assert!(c.potentials.matches_transport);
}

#[test]
fn split_transport_is_reported() {
    let ms = dirac_and_pair();
    let s = build_centroids(&ms, 100).unwrap();
    let j = s.index_of(&[-0.5]).unwrap();
    let t = NStarTransport::from_entries(s.len(), vec![(0, j, 0, 1.0), (1, j, 0, 0.5), (1, j, 1, 0.5)]);
    let ct = CostTensor::new(&ms, &s);
    let dual = DualSolution::from_tau(vec![vec![0.0], vec![0.0, 0.0]], &ct);
    let r = BarycenterResult::from_parts(&ms, s, t, dual).unwrap();
    let rep = check_no_mass_splitting(&r, &ms);
    assert!(!rep.pass);
    assert_eq!(rep.violations.len(), 1);
    assert!(rep.violations[0].starts_with("measure 1, centroid"));
}

#[test]
fn potentials_of_dirac_pair() {
    let ms = dirac_and_pair();
    let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
    let ps = build_potentials(&r.dual, &ms);
    assert_eq!(ps.num_measures(), 2);
    for &j in &r.support {
        let x = r.centroids.point(j);
        assert_eq!(ps.gradient(0, x, &1e-10), Gradient::Unique(0));
        let g = ps.gradient(1, x, &1e-10);
        assert_eq!(ps.gradient_point(1, &g)[0].signum(), x[0].signum());
    }
}

#[test]
fn ties_are_reported_in_order() {
    let ms = dirac_and_pair();
    let ct = CostTensor::new(&ms, &build_centroids(&ms, 100).unwrap());
    let ps = build_potentials(&DualSolution::from_tau(vec![vec![0.0], vec![0.0, 0.0]], &ct), &ms);
    assert_eq!(ps.gradient(1, &[0.0], &1e-10), Gradient::Tie(vec![0, 1]));
    assert_eq!(ps.gradient(1, &[0.0], &1e-10).index(), 0);
    assert_eq!(ps.gradient(1, &[0.25], &1e-10), Gradient::Unique(1));
}

#[test]
fn exact_certificate() {
    let q = |p: i64, d: i64| Rational::from_ratio(p, d);
    let ms = MeasureSet::new(vec![
        DiscreteMeasure::new(1, vec![vec![q(0, 1)], vec![q(1, 1)]], vec![q(1, 3), q(2, 3)]).unwrap(),
        DiscreteMeasure::new(1, vec![vec![q(0, 1)], vec![q(3, 1)]], vec![q(1, 2), q(1, 2)]).unwrap(),
        DiscreteMeasure::new(1, vec![vec![q(-1, 1)], vec![q(2, 1)]], vec![q(1, 4), q(3, 4)]).unwrap(),
    ])
    .unwrap();
    let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
    let c = certify(&r, &ms, &SolveOptions::default()).unwrap();
    assert!(c.no_mass_splitting.pass);
    assert!(c.potentials.certified(), "{:?}", c.potentials.violations);
    let rep = VerifyReport::from_certificate(&c);
    assert!(rep.pass());
    let v = serde_json::to_value(&rep).unwrap();
    assert!(v["theorem2"]["iv"].as_bool().unwrap());
    assert!(v["violations"].as_array().unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_identity(tau in proptest::collection::vec(-5.0f64..5.0, 3), x in proptest::collection::vec(-6.0f64..6.0, 2)) {
        let m = measure(&[&[0.0, 1.0], &[2.0, -1.0], &[-3.0, 0.5]], &[0.25, 0.25, 0.5]);
        let ms = MeasureSet::new(vec![m.clone(), m]).unwrap();
        let dual = DualSolution { tau: vec![tau.clone(), tau], theta: vec![] };
        let ps = build_potentials(&dual, &ms);
        let direct = ps.value_direct(0, &x);
        prop_assert!((ps.value(0, &x) - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        // |x|^2 - 2 psi(x) = min_k (|x - x_k|^2 - tau_k)
        let min = ms.measures()[0].points().iter().zip(&dual.tau[0])
            .map(|(p, t)| squared_distance(&x, p) - t)
            .fold(f64::INFINITY, f64::min);
        prop_assert!((squared_norm(&x) - 2.0 * direct - min).abs() <= 1e-9 * min.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimal_results_are_certified(ms in random_set()) {
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        let c = certify(&r, &ms, &SolveOptions::default()).unwrap();
        prop_assert!(c.no_mass_splitting.pass, "{:?}", c.no_mass_splitting.violations);
        prop_assert!(c.potentials.certified(), "{:?}", c.potentials.violations);
        prop_assert_eq!(c.potentials.matches_transport, true);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refined_dual_is_optimal_and_strict(ms in random_set()) {
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        let dual = refine_dual(&r, &ms, &SolveOptions::default()).unwrap();
        let ct = CostTensor::new(&ms, &r.centroids);
        prop_assert!(dual.max_violation(&ct) <= 1e-9);
        prop_assert!(rel_close(dual.objective(&ms), r.total_cost, 1e-8));
        for (i, j, kj) in check_no_mass_splitting(&r, &ms).targets {
            for k in 0..ms.measures()[i].len() {
                let slack = ct.get(i, j, k) - dual.tau[i][k] - dual.theta[i][j];
                if k == kj {
                    prop_assert!(slack.abs() <= 1e-8);
                } else {
                    prop_assert!(slack > 1e-10, "slack {} at ({}, {}, {})", slack, i, j, k);
                }
            }
        }
    }
}
