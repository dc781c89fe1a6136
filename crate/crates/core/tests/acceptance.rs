//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails at
//! the end if any criterion failed.
//!
//! Run with `cargo test -p motbary --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use motbary::analysis::{
    cost_ratio, pairwise_lower_bound, phi_cost, phi_cost_pairwise, psi_cost, BoundConstants,
};
use motbary::instances::{
    default_greedy_eps, gen_greedy_worst_case, gen_nested_ellipses, gen_neither_better,
    gen_reference_worst_case, random_cloud,
};
use motbary::measure::sq_dist;
use motbary::mot::{greedy_algorithm, randomized_greedy, randomized_reference, reference_algorithm};
use motbary::oracle::{exact_barycenter, exact_mot_lp, solve_transport_lp, sorting_property_check};
use motbary::ot2::{build_cost_matrix, solve_ot2, w2_squared};
use motbary::plan::{pushforward_mean, sparsity_bound, validate_plan};
use motbary::{Atom, DiscreteMeasure, MultiMarginalPlan, SimplexWeights};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GUARD: usize = 200_000;

#[derive(Default)]
struct Suite {
    lines: Vec<(usize, bool, String)>,
    plans_checked: usize,
    sparsity_failures: Vec<String>,
}

impl Suite {
    fn record(&mut self, id: usize, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id}: {detail}");
        self.lines.push((id, ok, detail));
    }

    /// Integer support bound and feasibility, applied to every plan.
    fn sparse(&mut self, what: &str, plan: &MultiMarginalPlan, measures: &[DiscreteMeasure]) -> bool {
        self.plans_checked += 1;
        let bound = sparsity_bound(measures);
        let diag = validate_plan(plan, measures);
        let ok = plan.len() <= bound && diag.feasible;
        if !ok {
            self.sparsity_failures.push(format!(
                "{what}: support {} bound {bound} feasible {}",
                plan.len(),
                diag.feasible
            ));
        }
        ok
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_measures(rng: &mut ChaCha8Rng, n: usize, atoms: std::ops::RangeInclusive<usize>, d: usize) -> Vec<DiscreteMeasure> {
    (0..n)
        .map(|_| {
            let k = rng.random_range(atoms.clone());
            random_cloud(rng, k, d).unwrap()
        })
        .collect()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> SimplexWeights {
    SimplexWeights::normalized((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

fn phi(plan: &MultiMarginalPlan, ms: &[DiscreteMeasure], w: &SimplexWeights) -> f64 {
    phi_cost(plan, ms, w).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn d1_exactness(s: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut sorted = true;
    for _ in 0..200 {
        let n = rng.random_range(3..=5);
        let ms = random_measures(&mut rng, n, 2..=6, 1);
        let w = random_weights(&mut rng, n);
        let exact = exact_mot_lp(&ms, &w, GUARD).unwrap();
        s.sparse("d=1 exact", &exact.plan, &ms);
        for plan in [reference_algorithm(&ms, &w).unwrap(), greedy_algorithm(&ms, &w).unwrap()] {
            s.sparse("d=1", &plan, &ms);
            worst = worst.max(rel_err(phi(&plan, &ms, &w), exact.phi));
            sorted &= sorting_property_check(&plan, &ms).unwrap();
        }
    }
    let t = start.elapsed();
    s.record(
        1,
        worst <= 1e-8 && sorted && t < Duration::from_secs(30),
        format!("d=1 both algorithms match the LP, worst rel err {worst:.2e}, sorted {sorted}, {t:.2?}"),
    );
}

fn reference_pairwise(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let d = 1 + k % 3;
        let n = rng.random_range(2..=6);
        let ms = random_measures(&mut rng, n, 1..=8, d);
        let w = random_weights(&mut rng, n);
        let plan = reference_algorithm(&ms, &w).unwrap();
        s.sparse("reference", &plan, &ms);
        for i in 1..n {
            let proj = plan.marginal_projection(&[0, i]).unwrap();
            let cost: f64 = proj
                .atoms()
                .iter()
                .map(|a| a.mass * sq_dist(ms[0].point(a.indices[0]), ms[i].point(a.indices[1])))
                .sum();
            let w2 = w2_squared(&ms[0], &ms[i]).unwrap();
            worst = worst.max((cost - w2).abs() / w2.max(1e-300));
        }
    }
    s.record(3, worst <= 1e-8, format!("reference couplings to the first measure are optimal, worst rel err {worst:.2e}"));
}

fn oracle_ratio_bounds(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ref_ratios = Vec::new();
    let mut violations = Vec::new();
    let mut worst_greedy: f64 = 0.0;
    for k in 0..100 {
        let n = rng.random_range(2..=4);
        let d = 1 + k % 3;
        let ms = random_measures(&mut rng, n, 1..=5, d);
        let w = random_weights(&mut rng, n);
        let exact = exact_mot_lp(&ms, &w, GUARD).unwrap();
        s.sparse("oracle", &exact.plan, &ms);

        let r = reference_algorithm(&ms, &w).unwrap();
        s.sparse("reference", &r, &ms);
        let ratio = cost_ratio(phi(&r, &ms, &w), exact.phi);
        let bound = BoundConstants::new(&w).reference_upper;
        if ratio > bound + 1e-6 {
            violations.push(format!("reference {ratio} > {bound}"));
        }
        ref_ratios.push(ratio);

        let mut desc = w.as_slice().to_vec();
        desc.sort_by(|a, b| b.total_cmp(a));
        let wd = SimplexWeights::new(desc).unwrap();
        let exact_d = exact_mot_lp(&ms, &wd, GUARD).unwrap();
        let g = greedy_algorithm(&ms, &wd).unwrap();
        s.sparse("greedy", &g, &ms);
        let ratio = cost_ratio(phi(&g, &ms, &wd), exact_d.phi);
        let bound = BoundConstants::new(&wd).greedy_upper.unwrap();
        worst_greedy = worst_greedy.max(ratio / bound);
        if ratio > bound + 1e-6 {
            violations.push(format!("greedy {ratio} > {bound}"));
        }
    }
    let med = median(ref_ratios.clone());
    let max = ref_ratios.iter().copied().fold(0.0, f64::max);
    s.record(
        4,
        violations.is_empty(),
        format!(
            "ratio bounds hold on 100 oracle instances ({} violations), reference ratio median {med:.4} max {max:.4}, greedy ratio/bound max {worst_greedy:.4}",
            violations.len()
        ),
    );
    println!("      informational: median reference ratio {med:.4} (expected at most 1.3: {})", med <= 1.3);
}

fn randomized_expectations(s: &mut Suite) {
    const SEEDS: u64 = 500;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut failures = Vec::new();
    let mut worst_ref: f64 = f64::NEG_INFINITY;
    let mut worst_greedy: f64 = f64::NEG_INFINITY;
    for inst in 0..10 {
        let n = 3 + inst % 2;
        let ms = random_measures(&mut rng, n, 2..=4, 2);
        let w = random_weights(&mut rng, n);
        let u = SimplexWeights::uniform(n);
        let opt_w = exact_mot_lp(&ms, &w, GUARD).unwrap().phi;
        let opt_u = exact_mot_lp(&ms, &u, GUARD).unwrap().phi;
        let mut rr = Vec::with_capacity(SEEDS as usize);
        let mut rg = Vec::with_capacity(SEEDS as usize);
        for seed in 0..SEEDS {
            let p = randomized_reference(&ms, &w, seed).unwrap();
            s.sparse("randomized reference", &p, &ms);
            rr.push(cost_ratio(phi(&p, &ms, &w), opt_w));
            let p = randomized_greedy(&ms, &u, seed).unwrap();
            s.sparse("randomized greedy", &p, &ms);
            rg.push(cost_ratio(phi(&p, &ms, &u), opt_u));
        }
        let bounds = [2.0, BoundConstants::new(&u).randomized_greedy_upper.unwrap()];
        for (k, (xs, bound)) in [(&rr, bounds[0]), (&rg, bounds[1])].into_iter().enumerate() {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            let limit = bound + 3.0 * var.sqrt() / (SEEDS as f64).sqrt();
            if k == 0 {
                worst_ref = worst_ref.max(m - bound);
            } else {
                worst_greedy = worst_greedy.max(m - bound);
            }
            if m > limit {
                failures.push(format!("instance {inst} kind {k}: mean {m} > {limit}"));
            }
        }
    }
    let t = start.elapsed();
    s.record(
        5,
        failures.is_empty() && t < Duration::from_secs(120),
        format!(
            "randomized means within bounds on 10 instances x {SEEDS} seeds ({} failures), max mean minus bound: reference {worst_ref:.3}, greedy {worst_greedy:.3}, {t:.2?}",
            failures.len()
        ),
    );
}

fn reference_worst_case(s: &mut Suite) {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, m, eps) in [(3, 64, 1e-3), (4, 128, 1e-4), (5, 128, 1e-4)] {
        let wc = gen_reference_worst_case(n, m, eps).unwrap();
        let p = reference_algorithm(&wc.measures, &wc.weights).unwrap();
        s.sparse("reference worst case", &p, &wc.measures);
        s.sparse("reference competitor", &wc.competitor, &wc.measures);
        let ratio = phi(&p, &wc.measures, &wc.weights) / phi(&wc.competitor, &wc.measures, &wc.weights);
        let nf = n as f64;
        let target = if n % 2 == 1 { nf - 0.1 } else { nf - 1.0 / (nf - 1.0) - 0.1 };
        ok &= ratio >= target;
        parts.push(format!("N={n} {ratio:.4} (need {target:.4})"));
    }
    let t = start.elapsed();
    s.record(6, ok && t < Duration::from_secs(10), format!("reference worst case {}, {t:.2?}", parts.join(", ")));
}

fn greedy_worst_case(s: &mut Suite) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [4, 8] {
        let wc = gen_greedy_worst_case(n, 128, &default_greedy_eps(n)).unwrap();
        let p = greedy_algorithm(&wc.measures, &wc.weights).unwrap();
        s.sparse("greedy worst case", &p, &wc.measures);
        s.sparse("greedy competitor", &wc.competitor, &wc.measures);
        let ratio = phi(&p, &wc.measures, &wc.weights) / phi(&wc.competitor, &wc.measures, &wc.weights);
        let target = n as f64 / 4.0 - 1.0 / 3.0 - 0.05;
        ok &= ratio >= target;
        parts.push(format!("N={n} {ratio:.4} (need {target:.4})"));
    }
    s.record(7, ok, format!("greedy worst case {}", parts.join(", ")));
}

fn line(points: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::uniform(points.iter().map(|&x| vec![x]).collect()).unwrap()
}

fn plan_of(n: usize, tuples: &[&[usize]]) -> MultiMarginalPlan {
    let mass = 1.0 / tuples.len() as f64;
    MultiMarginalPlan::new(n, tuples.iter().map(|t| Atom { indices: t.to_vec(), mass }).collect()).unwrap()
}

fn worked_example(s: &mut Suite) {
    let ms = vec![line(&[0.0, 3.0]), line(&[1.0, 2.0]), line(&[1.0, 2.0])];
    let w = SimplexWeights::uniform(3);
    let hat = plan_of(3, &[&[0, 0, 0], &[1, 1, 1]]);
    let tilde = plan_of(3, &[&[0, 1, 1], &[1, 0, 0]]);
    s.sparse("worked example optimum", &hat, &ms);
    s.sparse("worked example competitor", &tilde, &ms);
    let exact = exact_mot_lp(&ms, &w, GUARD).unwrap();
    let (nu_hat, _) = exact_barycenter(&ms, &w, GUARD).unwrap();
    let nu_tilde = pushforward_mean(&tilde, &ms, &w).unwrap();
    let values = [
        ("phi_hat", phi(&hat, &ms, &w), 2.0 / 9.0),
        ("phi_hat_lp", exact.phi, 2.0 / 9.0),
        ("phi_tilde", phi(&tilde, &ms, &w), 8.0 / 9.0),
        ("w2_between_barycenters", w2_squared(&nu_tilde, &nu_hat).unwrap(), 4.0 / 9.0),
        ("psi_tilde", psi_cost(&nu_tilde, &ms, &w).unwrap(), 6.0 / 9.0),
    ];
    let worst = values.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    let strict = values[2].1 > values[4].1;
    let listing: Vec<String> = values.iter().map(|(k, got, _)| format!("{k}={got:.12}")).collect();
    s.record(
        8,
        worst <= 1e-12 && strict,
        format!("worked example {}, phi_tilde > psi_tilde {strict}, max err {worst:.1e}", listing.join(" ")),
    );
}

fn neither_dominates(s: &mut Suite) {
    let nb = gen_neither_better();
    let w = &nb.weights;
    let mut res = Vec::new();
    for ms in [&nb.ordering_a, &nb.ordering_b] {
        let exact = exact_mot_lp(ms, w, GUARD).unwrap();
        let g = greedy_algorithm(ms, w).unwrap();
        let r = reference_algorithm(ms, w).unwrap();
        s.sparse("neither greedy", &g, ms);
        s.sparse("neither reference", &r, ms);
        res.push((phi(&g, ms, w), phi(&r, ms, w), exact.phi));
    }
    let (ga, ra, ea) = res[0];
    let (gb, rb, eb) = res[1];
    let ok = ga < ra && rb < gb && (ga - ea).abs() <= 1e-10 && (rb - eb).abs() <= 1e-10;
    s.record(
        9,
        ok,
        format!("ordering A greedy {ga:.10} < reference {ra:.10} (opt {ea:.10}); ordering B reference {rb:.10} < greedy {gb:.10} (opt {eb:.10})"),
    );
}

/// A random feasible plan: a convex mixture of the product plan and
/// north-west corner plans of permuted supports.
fn random_plan(rng: &mut ChaCha8Rng, ms: &[DiscreteMeasure]) -> MultiMarginalPlan {
    let mut parts = vec![MultiMarginalPlan::product(ms).unwrap()];
    for _ in 0..2 {
        let perms: Vec<Vec<usize>> = ms
            .iter()
            .map(|m| {
                let mut p: Vec<usize> = (0..m.len()).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        let shuffled: Vec<DiscreteMeasure> = ms
            .iter()
            .zip(&perms)
            .map(|(m, p)| {
                DiscreteMeasure::new(p.iter().map(|&j| m.point(j).to_vec()).collect(), p.iter().map(|&j| m.weights()[j]).collect())
                    .unwrap()
            })
            .collect();
        let nw = MultiMarginalPlan::north_west_corner(&shuffled).unwrap();
        let atoms = nw
            .atoms()
            .iter()
            .map(|a| Atom { indices: a.indices.iter().zip(&perms).map(|(&j, p)| p[j]).collect(), mass: a.mass })
            .collect();
        parts.push(MultiMarginalPlan::new(ms.len(), atoms).unwrap());
    }
    let c: Vec<f64> = (0..parts.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = c.iter().sum();
    let mix: Vec<(f64, &MultiMarginalPlan)> = c.iter().map(|x| x / total).zip(parts.iter()).collect();
    MultiMarginalPlan::mixture(&mix).unwrap()
}

fn structural_inequalities(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst = [0.0_f64; 5];
    for k in 0..200 {
        let n = rng.random_range(2..=4);
        let d = 1 + k % 3;
        let ms = random_measures(&mut rng, n, 1..=4, d);
        let w = random_weights(&mut rng, n);
        let plan = random_plan(&mut rng, &ms);
        let diag = validate_plan(&plan, &ms);
        if !diag.feasible {
            worst[4] = f64::INFINITY;
        }
        let phi_val = phi(&plan, &ms, &w);
        let nu = pushforward_mean(&plan, &ms, &w).unwrap();
        let psi_val = psi_cost(&nu, &ms, &w).unwrap();
        worst[0] = worst[0].max(psi_val - phi_val);
        worst[4] = worst[4].max((phi_val - phi_cost_pairwise(&plan, &ms, &w).unwrap()).abs());

        let (nu_hat, exact) = exact_barycenter(&ms, &w, GUARD).unwrap();
        s.sparse("structural oracle", &exact.plan, &ms);
        worst[1] = worst[1].max(pairwise_lower_bound(&ms, &w).unwrap() - exact.phi);
        let psi_hat = psi_cost(&nu_hat, &ms, &w).unwrap();
        worst[2] = worst[2].max(psi_val - psi_hat - w2_squared(&nu, &nu_hat).unwrap());

        let lam = w.as_slice();
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m: Vec<f64> = (0..d).map(|c| xs.iter().zip(lam).map(|(x, l)| l * x[c]).sum()).collect();
        let lhs: f64 = xs.iter().zip(lam).map(|(x, l)| l * sq_dist(x, &y)).sum();
        let rhs = sq_dist(&m, &y) + xs.iter().zip(lam).map(|(x, l)| l * sq_dist(x, &m)).sum::<f64>();
        worst[3] = worst[3].max((lhs - rhs).abs() / lhs.max(1.0));
    }
    let ok = worst.iter().all(|&v| v <= 1e-8);
    s.record(
        10,
        ok,
        format!(
            "200 random plans: max violations psi-phi {:.1e}, bound-optimum {:.1e}, cost-distance {:.1e}, variance identity {:.1e}, cost forms {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    );
}

fn ellipses(s: &mut Suite) {
    let start = Instant::now();
    let ms = gen_nested_ellipses(10, 16, 7).unwrap();
    let w = SimplexWeights::uniform(10);
    let lb = pairwise_lower_bound(&ms, &w).unwrap();
    let g = greedy_algorithm(&ms, &w).unwrap();
    let r = reference_algorithm(&ms, &w).unwrap();
    let sparse = s.sparse("ellipse greedy", &g, &ms) & s.sparse("ellipse reference", &r, &ms);
    let gr = phi(&g, &ms, &w) / lb;
    let rr = phi(&r, &ms, &w) / lb;
    let t = start.elapsed();
    s.record(
        11,
        gr <= 1.25 && rr <= 1.35 && sparse && t < Duration::from_secs(60),
        format!("ellipses res 16 N=10: greedy/LB {gr:.4}, reference/LB {rr:.4}, sparse {sparse}, {t:.2?}"),
    );
}

fn two_marginal_solver(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut worst_val: f64 = 0.0;
    let mut worst_dual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut sparse = true;
    for k in 0..50 {
        let d = 1 + k % 3;
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = random_cloud(&mut rng, n, d).unwrap();
        let b = random_cloud(&mut rng, m, d).unwrap();
        let p = build_cost_matrix(&a, &b).unwrap();
        let sol = solve_ot2(&p).unwrap();
        let lp = solve_transport_lp(a.weights(), b.weights(), p.cost()).unwrap();
        worst_val = worst_val.max((sol.cost - lp.cost).abs() / lp.cost.max(1e-12));
        let scale = (0..a.len()).flat_map(|i| (0..b.len()).map(move |j| (i, j))).map(|(i, j)| p.cost().get(i, j)).fold(1e-300, f64::max);
        worst_dual = worst_dual.max(sol.dual_violation(p.cost()) / scale);
        worst_gap = worst_gap.max((sol.dual_objective(a.weights(), b.weights()) - sol.cost).abs() / scale);
        sparse &= sol.coupling.len() < a.len() + b.len();
        let pair = [a.clone(), b.clone()];
        sparse &= s.sparse("two-marginal", sol.coupling.as_plan(), &pair);
    }
    s.record(
        12,
        worst_val <= 1e-9 && worst_dual <= 1e-9 && worst_gap <= 1e-9 && sparse,
        format!("50 problems vs LP: worst rel err {worst_val:.1e}, dual infeasibility {worst_dual:.1e}, duality gap {worst_gap:.1e}, vertex sparse {sparse}"),
    );
}

#[test]
fn acceptance() {
    let mut s = Suite::default();
    d1_exactness(&mut s);
    reference_pairwise(&mut s);
    oracle_ratio_bounds(&mut s);
    randomized_expectations(&mut s);
    reference_worst_case(&mut s);
    greedy_worst_case(&mut s);
    worked_example(&mut s);
    neither_dominates(&mut s);
    structural_inequalities(&mut s);
    ellipses(&mut s);
    two_marginal_solver(&mut s);
    let checked = s.plans_checked;
    let failures = std::mem::take(&mut s.sparsity_failures);
    s.record(
        2,
        failures.is_empty(),
        format!("{checked} plans within the integer support bound and feasible, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
    s.lines.sort_by_key(|l| l.0);
    let failed: Vec<usize> = s.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!("summary: {} of {} criteria passed", s.lines.len() - failed.len(), s.lines.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
