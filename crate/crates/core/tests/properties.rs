//! Randomized invariants of costs, plans and algorithms.

use motbary::analysis::{
    baseline_best_input, baseline_mixture, pairwise_lower_bound, phi_cost, phi_cost_pairwise, psi_cost,
};
use motbary::io::{read_json, write_json};
use motbary::measure::sq_dist;
use motbary::mot::{greedy_algorithm, reference_algorithm};
use motbary::oracle::{exact_barycenter, exact_mot_lp};
use motbary::ot2::w2_squared;
use motbary::plan::{pushforward_mean, sparsity_bound, tuple_mean, validate_plan};
use motbary::{DiscreteMeasure, MultiMarginalPlan, SimplexWeights};
use proptest::prelude::*;

fn measure(d: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-3.0..3.0_f64, d), 0.05..1.0_f64), 1..=max_atoms).prop_map(
        |atoms| {
            let (pts, ws): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
            let total: f64 = ws.iter().sum();
            DiscreteMeasure::new(pts, ws.iter().map(|w| w / total).collect()).unwrap()
        },
    )
}

fn instance(max_n: usize, max_atoms: usize) -> impl Strategy<Value = (Vec<DiscreteMeasure>, SimplexWeights)> {
    (2..=max_n, 1..=3_usize).prop_flat_map(move |(n, d)| {
        (
            prop::collection::vec(measure(d, max_atoms), n),
            prop::collection::vec(0.05..1.0_f64, n).prop_map(|w| SimplexWeights::normalized(w).unwrap()),
        )
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn check_plan(plan: &MultiMarginalPlan, ms: &[DiscreteMeasure]) {
    assert!(validate_plan(plan, ms).feasible);
    assert!(plan.len() <= sparsity_bound(ms));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_cost_forms_agree((ms, w) in instance(5, 5)) {
        for plan in [reference_algorithm(&ms, &w).unwrap(), greedy_algorithm(&ms, &w).unwrap(), MultiMarginalPlan::product(&ms).unwrap()] {
            let a = phi_cost(&plan, &ms, &w).unwrap();
            let b = phi_cost_pairwise(&plan, &ms, &w).unwrap();
            prop_assert!(close(a, b, 1e-10));
        }
    }

    #[test]
    fn translation_invariant((ms, w) in instance(4, 5), shift in -5.0..5.0_f64) {
        let d = ms[0].dim();
        let t = vec![shift; d];
        let moved: Vec<DiscreteMeasure> = ms.iter().map(|m| m.translated(&t).unwrap()).collect();
        for alg in [reference_algorithm, greedy_algorithm] {
            let a = phi_cost(&alg(&ms, &w).unwrap(), &ms, &w).unwrap();
            let b = phi_cost(&alg(&moved, &w).unwrap(), &moved, &w).unwrap();
            prop_assert!(close(a, b, 1e-9));
        }
        prop_assert!(close(pairwise_lower_bound(&ms, &w).unwrap(), pairwise_lower_bound(&moved, &w).unwrap(), 1e-9));
    }

    #[test]
    fn scaling_is_quadratic((ms, w) in instance(4, 5), s in 0.1..4.0_f64) {
        let scaled: Vec<DiscreteMeasure> = ms.iter().map(|m| m.scaled(s).unwrap()).collect();
        for alg in [reference_algorithm, greedy_algorithm] {
            let a = phi_cost(&alg(&ms, &w).unwrap(), &ms, &w).unwrap();
            let b = phi_cost(&alg(&scaled, &w).unwrap(), &scaled, &w).unwrap();
            prop_assert!(close(s * s * a, b, 1e-9));
        }
    }

    #[test]
    fn algorithms_produce_sparse_feasible_plans((ms, w) in instance(6, 6)) {
        check_plan(&reference_algorithm(&ms, &w).unwrap(), &ms);
        check_plan(&greedy_algorithm(&ms, &w).unwrap(), &ms);
    }

    #[test]
    fn pushforward_conserves_mass_and_mean((ms, w) in instance(4, 5)) {
        let plan = greedy_algorithm(&ms, &w).unwrap();
        let nu = pushforward_mean(&plan, &ms, &w).unwrap();
        prop_assert!(nu.len() <= plan.len());
        let total: f64 = nu.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // the barycenter's center of mass is the weighted average of the inputs'
        let d = ms[0].dim();
        let center = |m: &DiscreteMeasure| -> Vec<f64> {
            (0..d).map(|c| m.iter_points().zip(m.weights()).map(|(p, w)| p[c] * w).sum()).collect()
        };
        let want: Vec<f64> = (0..d).map(|c| ms.iter().zip(w.as_slice()).map(|(m, l)| l * center(m)[c]).sum()).collect();
        prop_assert!(sq_dist(&center(&nu), &want).sqrt() < 1e-9);
    }

    #[test]
    fn marginal_projection_matches_coupling((ms, w) in instance(5, 5)) {
        let plan = reference_algorithm(&ms, &w).unwrap();
        for i in 1..ms.len() {
            let proj = plan.marginal_projection(&[0, i]).unwrap();
            prop_assert!(proj.len() <= ms[0].len() + ms[i].len() - 1);
            let pair = [ms[0].clone(), ms[i].clone()];
            prop_assert!(validate_plan(&proj, &pair).feasible);
            // reference couplings are pairwise optimal
            let cost: f64 = proj.atoms().iter().map(|a| a.mass * sq_dist(ms[0].point(a.indices[0]), ms[i].point(a.indices[1]))).sum();
            prop_assert!(close(cost, w2_squared(&ms[0], &ms[i]).unwrap(), 1e-8));
        }
    }

    #[test]
    fn reference_cost_bounds((ms, w) in instance(5, 5)) {
        let plan = reference_algorithm(&ms, &w).unwrap();
        let phi = phi_cost(&plan, &ms, &w).unwrap();
        let spokes: f64 = (1..ms.len()).map(|i| w.get(i) * w2_squared(&ms[0], &ms[i]).unwrap()).sum();
        prop_assert!(phi <= spokes + 1e-9);
        prop_assert!(pairwise_lower_bound(&ms, &w).unwrap() >= w.get(0) * spokes - 1e-9);
    }

    #[test]
    fn permuting_inputs_permutes_the_reference_plan((ms, w) in instance(4, 4), rot in 0..4_usize) {
        // the reference measure stays first, the others rotate
        let n = ms.len();
        let rest: Vec<usize> = (1..n).collect();
        let k = rot % rest.len();
        let mut order = vec![0];
        order.extend(rest[k..].iter().chain(&rest[..k]));
        let pms: Vec<DiscreteMeasure> = order.iter().map(|&i| ms[i].clone()).collect();
        let pw = w.permuted(&order);
        let a = phi_cost(&reference_algorithm(&ms, &w).unwrap(), &ms, &w).unwrap();
        let b = phi_cost(&reference_algorithm(&pms, &pw).unwrap(), &pms, &pw).unwrap();
        prop_assert!(close(a, b, 1e-9));
    }

    #[test]
    fn measure_json_round_trip(mu in measure(3, 8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.json");
        write_json(&path, &mu).unwrap();
        let back: DiscreteMeasure = read_json(&path).unwrap();
        prop_assert_eq!(back, mu);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_agrees_with_structure((ms, w) in instance(3, 4)) {
        let (nu, exact) = exact_barycenter(&ms, &w, 200_000).unwrap();
        check_plan(&exact.plan, &ms);
        // support lies on means of index tuples
        for p in nu.iter_points() {
            prop_assert!(exact.plan.atoms().iter().any(|a| sq_dist(&tuple_mean(&a.indices, &ms, w.as_slice()), p) < 1e-24));
        }
        let lb = pairwise_lower_bound(&ms, &w).unwrap();
        prop_assert!(exact.phi >= lb - 1e-9);
        for plan in [reference_algorithm(&ms, &w).unwrap(), greedy_algorithm(&ms, &w).unwrap()] {
            let phi = phi_cost(&plan, &ms, &w).unwrap();
            prop_assert!(phi >= exact.phi - 1e-9);
            let nu_t = pushforward_mean(&plan, &ms, &w).unwrap();
            prop_assert!(psi_cost(&nu_t, &ms, &w).unwrap() <= phi + 1e-9);
        }
        let (_, best) = baseline_best_input(&ms, &w).unwrap();
        prop_assert!(best <= exact.phi / w.get(w.argmax()) + 1e-9);
        let (_, mix) = baseline_mixture(&ms, &w).unwrap();
        prop_assert!(mix <= 2.0 * exact.phi + 1e-9);
    }

    #[test]
    fn one_dimension_is_exact((ms, w) in instance(4, 4).prop_filter("d=1", |(ms, _)| ms[0].dim() == 1)) {
        let exact = exact_mot_lp(&ms, &w, 200_000).unwrap();
        let lb = pairwise_lower_bound(&ms, &w).unwrap();
        prop_assert!(close(exact.phi, lb, 1e-9));
        for plan in [reference_algorithm(&ms, &w).unwrap(), greedy_algorithm(&ms, &w).unwrap()] {
            prop_assert!(close(phi_cost(&plan, &ms, &w).unwrap(), exact.phi, 1e-8));
        }
    }
}
