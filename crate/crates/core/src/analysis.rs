//! Cost functionals, lower bounds, baselines and ratio reports.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{sq_dist, DiscreteMeasure, SimplexWeights};
use crate::oracle::exact_mot_lp;
use crate::ot2::w2_squared;
use crate::plan::{check_dims, tuple_mean, MultiMarginalPlan};

fn check_plan_inputs(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<()> {
    let n = plan.num_marginals();
    if weights.len() != n {
        return Err(Error::WeightLengthMismatch { expected: n, found: weights.len() });
    }
    if measures.len() != n {
        return Err(Error::InvalidPlan(format!("{} measures for {n} marginals", measures.len())));
    }
    check_dims(measures)
}

/// `Φ(π) = Σ_j π_j Σ_i λ_i ‖x_{i,j} − m_j‖²`, linear in `N` per atom.
pub fn phi_cost(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<f64> {
    check_plan_inputs(plan, measures, weights)?;
    let lam = weights.as_slice();
    Ok(plan
        .atoms()
        .iter()
        .map(|a| {
            let m = tuple_mean(&a.indices, measures, lam);
            let v: f64 = a
                .indices
                .iter()
                .enumerate()
                .map(|(i, &j)| lam[i] * sq_dist(measures[i].point(j), &m))
                .sum();
            a.mass * v
        })
        .sum())
}

/// `Φ(π) = Σ_j π_j Σ_{s<t} λ_s λ_t ‖x_{s,j} − x_{t,j}‖²`, quadratic in `N`.
/// Kept to cross-check [`phi_cost`].
pub fn phi_cost_pairwise(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<f64> {
    check_plan_inputs(plan, measures, weights)?;
    let lam = weights.as_slice();
    let n = lam.len();
    Ok(plan
        .atoms()
        .iter()
        .map(|a| {
            let mut v = 0.0;
            for s in 0..n {
                for t in s + 1..n {
                    let d = sq_dist(measures[s].point(a.indices[s]), measures[t].point(a.indices[t]));
                    v += lam[s] * lam[t] * d;
                }
            }
            a.mass * v
        })
        .sum())
}

/// Memoized `W₂²` values keyed by the content hashes of both measures.
#[derive(Debug, Default)]
pub struct W2Cache {
    map: Mutex<HashMap<(u64, u64), f64>>,
}

impl W2Cache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn w2_squared(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
        let (ha, hb) = (a.content_hash(), b.content_hash());
        let key = if ha <= hb { (ha, hb) } else { (hb, ha) };
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = w2_squared(a, b)?;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `Ψ(ν) = Σ_i λ_i W₂²(μⁱ, ν)`.
pub fn psi_cost(nu: &DiscreteMeasure, measures: &[DiscreteMeasure], weights: &SimplexWeights) -> Result<f64> {
    psi_cost_cached(nu, measures, weights, &W2Cache::new())
}

pub fn psi_cost_cached(
    nu: &DiscreteMeasure,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    cache: &W2Cache,
) -> Result<f64> {
    if weights.len() != measures.len() {
        return Err(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() });
    }
    let terms: Vec<f64> = measures
        .par_iter()
        .map(|mu| cache.w2_squared(mu, nu))
        .collect::<Result<_>>()?;
    Ok(terms.iter().zip(weights.as_slice()).map(|(w, l)| w * l).sum())
}

/// `Σ_{s<t} λ_s λ_t W₂²(μˢ, μᵗ)`, a lower bound on the optimal `Φ`.
pub fn pairwise_lower_bound(measures: &[DiscreteMeasure], weights: &SimplexWeights) -> Result<f64> {
    pairwise_lower_bound_cached(measures, weights, &W2Cache::new())
}

pub fn pairwise_lower_bound_cached(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    cache: &W2Cache,
) -> Result<f64> {
    if weights.len() != measures.len() {
        return Err(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() });
    }
    check_dims(measures)?;
    let n = measures.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|s| (s + 1..n).map(move |t| (s, t))).collect();
    let terms: Vec<f64> = pairs
        .par_iter()
        .map(|&(s, t)| Ok(weights.get(s) * weights.get(t) * cache.w2_squared(&measures[s], &measures[t])?))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// The input measure with the largest weight and its `Ψ`.
pub fn baseline_best_input(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<(DiscreteMeasure, f64)> {
    let k = weights.argmax();
    let mu = measures
        .get(k)
        .ok_or(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() })?
        .clone();
    let psi = psi_cost(&mu, measures, weights)?;
    Ok((mu, psi))
}

/// The mixture `Σ λ_i μⁱ` and its `Ψ`.
pub fn baseline_mixture(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<(DiscreteMeasure, f64)> {
    if weights.len() != measures.len() {
        return Err(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() });
    }
    check_dims(measures)?;
    let d = measures[0].dim();
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for (mu, l) in measures.iter().zip(weights.as_slice()) {
        pts.extend_from_slice(mu.points_flat());
        ws.extend(mu.weights().iter().map(|w| w * l));
    }
    let mix = DiscreteMeasure::from_flat(d, pts, ws)?;
    let psi = psi_cost(&mix, measures, weights)?;
    Ok((mix, psi))
}

/// `H_N = Σ_{i ≤ N} 1/i`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Approximation-ratio constants for `N` measures with weights `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub n: usize,
    /// `1/λ₁`: reference algorithm upper bound.
    pub reference_upper: f64,
    /// Expected-ratio bound of the randomized reference algorithm.
    pub randomized_reference_upper: f64,
    /// `(2N² − 5)/3`: greedy upper bound, present when `λ` is descending.
    pub greedy_upper: Option<f64>,
    /// `(11N − 4 − 6/(N−1))/12`: randomized greedy expected-ratio bound,
    /// present when `λ` is uniform.
    pub randomized_greedy_upper: Option<f64>,
    /// Reference lower bound attained asymptotically: `N` for odd `N`,
    /// `N − 1/(N−1)` for even `N`.
    pub reference_lower: f64,
    /// `(N − H_N)/(π²/6 + 1)`: greedy lower bound.
    pub greedy_lower: f64,
    /// `N/4 − 1/3`: simplified greedy lower bound.
    pub greedy_lower_simple: f64,
    /// `1/λ_k` for the heaviest input measure used as barycenter.
    pub best_input_upper: f64,
    /// Mixture baseline bound.
    pub mixture_upper: f64,
}

impl BoundConstants {
    pub fn new(weights: &SimplexWeights) -> Self {
        let n = weights.len();
        let nf = n as f64;
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        let rand_greedy = if n >= 2 {
            (11.0 * nf - 4.0 - 6.0 / (nf - 1.0)) / 12.0
        } else {
            1.0
        };
        Self {
            n,
            reference_upper: 1.0 / weights.get(0),
            randomized_reference_upper: 2.0,
            greedy_upper: weights.is_descending().then(|| (2.0 * nf * nf - 5.0) / 3.0),
            randomized_greedy_upper: weights.is_uniform().then_some(rand_greedy),
            reference_lower: if n % 2 == 1 || n < 2 { nf } else { nf - 1.0 / (nf - 1.0) },
            greedy_lower: (nf - harmonic(n)) / (pi2_6 + 1.0),
            greedy_lower_simple: nf / 4.0 - 1.0 / 3.0,
            best_input_upper: 1.0 / weights.get(weights.argmax()),
            mixture_upper: 2.0,
        }
    }
}

/// Costs of a plan and its barycenter, with ratio estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub phi: f64,
    pub psi: f64,
    pub pairwise_lb: f64,
    pub phi_exact: Option<f64>,
    pub ratio_vs_exact: Option<f64>,
    pub ratio_vs_lb: f64,
    pub bound_constants: BoundConstants,
}

/// `value / optimum`, with `0/0 = 1`.
pub fn cost_ratio(value: f64, optimum: f64) -> f64 {
    const ZERO: f64 = 1e-15;
    if optimum.abs() <= ZERO {
        if value.abs() <= ZERO {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / optimum
    }
}

/// Evaluates `Φ`, `Ψ` of the mean pushforward and the pairwise lower
/// bound; with `oracle_guard` set, also solves the exact LP.
pub fn make_report(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    oracle_guard: Option<usize>,
) -> Result<CostReport> {
    let cache = W2Cache::new();
    let phi = phi_cost(plan, measures, weights)?;
    let nu = crate::plan::pushforward_mean(plan, measures, weights)?;
    let psi = psi_cost_cached(&nu, measures, weights, &cache)?;
    let pairwise_lb = pairwise_lower_bound_cached(measures, weights, &cache)?;
    let phi_exact = match oracle_guard {
        Some(guard) => Some(exact_mot_lp(measures, weights, guard)?.phi),
        None => None,
    };
    Ok(CostReport {
        phi,
        psi,
        pairwise_lb,
        phi_exact,
        ratio_vs_exact: phi_exact.map(|e| cost_ratio(phi, e)),
        ratio_vs_lb: cost_ratio(phi, pairwise_lb),
        bound_constants: BoundConstants::new(weights),
    })
}

/// Which algorithm produced a plan, for picking the applicable bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Reference,
    Greedy,
    Exact,
    /// No deterministic ratio bound applies.
    None,
}

/// Lists every violated guarantee in a report. An empty list means the
/// report is consistent.
pub fn bound_violations(report: &CostReport, kind: BoundKind) -> Vec<String> {
    const SLACK: f64 = 1e-6;
    let mut out = Vec::new();
    if report.phi < report.psi - 1e-8 * report.phi.abs().max(1.0) {
        out.push(format!("phi {} below psi {}", report.phi, report.psi));
    }
    if let Some(exact) = report.phi_exact {
        if exact < report.pairwise_lb - 1e-9 * exact.abs().max(1.0) {
            out.push(format!("exact optimum {exact} below pairwise bound {}", report.pairwise_lb));
        }
        if report.phi < exact - 1e-9 * exact.abs().max(1.0) {
            out.push(format!("phi {} below exact optimum {exact}", report.phi));
        }
    }
    if let Some(r) = report.ratio_vs_exact {
        if r > report.ratio_vs_lb + 1e-9 * report.ratio_vs_lb.max(1.0) {
            out.push(format!("ratio vs exact {r} exceeds ratio vs bound {}", report.ratio_vs_lb));
        }
        let c = &report.bound_constants;
        let limit = match kind {
            BoundKind::Reference => Some(c.reference_upper),
            BoundKind::Greedy => c.greedy_upper,
            BoundKind::Exact => Some(1.0),
            BoundKind::None => None,
        };
        if let Some(limit) = limit {
            if r > limit + SLACK {
                out.push(format!("ratio {r} exceeds guaranteed {limit}"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::Atom;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|x| vec![*x]).collect(), weights.to_vec()).unwrap()
    }

    fn example() -> (Vec<DiscreteMeasure>, SimplexWeights) {
        let a = line(&[0.0, 3.0], &[0.5, 0.5]);
        let b = line(&[1.0, 2.0], &[0.5, 0.5]);
        (vec![a, b.clone(), b], SimplexWeights::uniform(3))
    }

    fn plan(tuples: &[[usize; 3]]) -> MultiMarginalPlan {
        let atoms = tuples.iter().map(|t| Atom { indices: t.to_vec(), mass: 0.5 }).collect();
        MultiMarginalPlan::new(3, atoms).unwrap()
    }

    #[test]
    fn worked_example_costs() {
        let (ms, w) = example();
        let hat = plan(&[[0, 0, 0], [1, 1, 1]]);
        let tilde = plan(&[[0, 1, 1], [1, 0, 0]]);
        assert!((phi_cost(&hat, &ms, &w).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((phi_cost(&tilde, &ms, &w).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        let nu = line(&[4.0 / 3.0, 5.0 / 3.0], &[0.5, 0.5]);
        assert!((psi_cost(&nu, &ms, &w).unwrap() - 6.0 / 9.0).abs() < 1e-15);
        assert!((pairwise_lower_bound(&ms, &w).unwrap() - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn both_cost_forms_agree() {
        let ms = vec![
            line(&[0.0, 1.0, 4.0], &[0.2, 0.3, 0.5]),
            line(&[2.0, -1.0], &[0.5, 0.5]),
            line(&[0.3], &[1.0]),
        ];
        let w = SimplexWeights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let p = MultiMarginalPlan::product(&ms).unwrap();
        let a = phi_cost(&p, &ms, &w).unwrap();
        let b = phi_cost_pairwise(&p, &ms, &w).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn constant_tuples_cost_nothing() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let ms = vec![mu.clone(), mu.clone(), mu];
        let p = plan(&[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(phi_cost(&p, &ms, &SimplexWeights::uniform(3)).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn bound_constants_for_uniform_four() {
        let c = BoundConstants::new(&SimplexWeights::uniform(4));
        assert!((c.reference_upper - 4.0).abs() < 1e-12);
        assert!((c.greedy_upper.unwrap() - 9.0).abs() < 1e-12);
        assert!((c.randomized_greedy_upper.unwrap() - 38.0 / 12.0).abs() < 1e-12);
        assert!((c.reference_lower - (4.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert!((c.greedy_lower_simple - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
        let c = BoundConstants::new(&SimplexWeights::new(vec![0.2, 0.5, 0.3]).unwrap());
        assert!(c.greedy_upper.is_none() && c.randomized_greedy_upper.is_none());
        assert!((c.best_input_upper - 2.0).abs() < 1e-12);
    }

    #[test]
    fn baselines() {
        let ms = vec![line(&[0.0], &[1.0]), line(&[2.0], &[1.0])];
        let w = SimplexWeights::uniform(2);
        let (mix, psi) = baseline_mixture(&ms, &w).unwrap();
        assert_eq!(mix.len(), 2);
        assert!((psi - 2.0).abs() < 1e-15);
        let w = SimplexWeights::new(vec![0.6, 0.4]).unwrap();
        let (best, psi) = baseline_best_input(&ms, &w).unwrap();
        assert_eq!(best, ms[0]);
        assert!((psi - 0.4 * 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_over_zero_is_one() {
        assert_eq!(cost_ratio(0.0, 0.0), 1.0);
        assert_eq!(cost_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(cost_ratio(3.0, 2.0), 1.5);
    }

    #[test]
    fn cache_reuses_values() {
        let (ms, w) = example();
        let cache = W2Cache::new();
        pairwise_lower_bound_cached(&ms, &w, &cache).unwrap();
        // measures 2 and 3 are identical, so only two distinct pairs exist
        assert_eq!(cache.len(), 2);
    }
}
