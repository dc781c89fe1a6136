//! Exact multi-marginal transport on small instances.
//!
//! The full LP has one variable per index tuple, `Π n_i` in total, so it
//! is only usable below a size guard. Its results serve as ground truth
//! for the approximation algorithms.

mod lp;

pub use lp::{solve_lp, LpCertificate, LpProblem, LpSolution, NO_ROW};

use serde::{Deserialize, Serialize};

use crate::analysis::{psi_cost_cached, W2Cache};
use crate::error::{Error, Result};
use crate::measure::{sq_dist, DiscreteMeasure, SimplexWeights};
use crate::ot2::{CostMatrix, TransportSolution};
use crate::plan::{
    check_dims, for_each_tuple, pushforward_mean, staircase, tuple_mean, Atom, Coupling,
    MultiMarginalPlan,
};

/// Default limit on the number of LP variables.
pub const DEFAULT_SIZE_GUARD: usize = 200_000;

/// Dense LP formulation of a multi-marginal problem.
///
/// Variable `v` is the tuple whose mixed-radix digits (last index fastest)
/// are `v`. There is one marginal constraint per support point; the
/// constraints for point `0` of marginals `2, …, N` are implied by the
/// others and dropped, leaving `Σ n_i − N + 1` independent rows.
#[derive(Debug, Clone)]
pub struct DenseMotLp {
    sizes: Vec<usize>,
    row_offset: Vec<usize>,
    lp: LpProblem,
}

impl DenseMotLp {
    /// Builds the LP for arbitrary per-tuple costs.
    pub fn with_cost(
        masses: &[&[f64]],
        size_guard: usize,
        mut cost: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let sizes: Vec<usize> = masses.iter().map(|m| m.len()).collect();
        let variables = sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .unwrap_or(usize::MAX);
        if variables > size_guard {
            return Err(Error::SizeGuard { variables, guard: size_guard });
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter("empty marginal".into()));
        }
        let n = sizes.len();
        let mut row_offset = vec![0; n];
        let mut rows = sizes[0];
        for i in 1..n {
            row_offset[i] = rows;
            rows += sizes[i] - 1;
        }
        let mut rhs = Vec::with_capacity(rows);
        rhs.extend_from_slice(masses[0]);
        for m in &masses[1..] {
            rhs.extend_from_slice(&m[1..]);
        }
        let mut col_rows = Vec::with_capacity(variables * n);
        let mut costs = Vec::with_capacity(variables);
        for_each_tuple(&sizes, |t| {
            col_rows.push(t[0]);
            for i in 1..n {
                col_rows.push(if t[i] == 0 { NO_ROW } else { row_offset[i] + t[i] - 1 });
            }
            costs.push(cost(t));
        });
        let lp = LpProblem { num_rows: rows, nnz_per_col: n, col_rows, cost: costs, rhs };
        Ok(Self { sizes, row_offset, lp })
    }

    /// The multi-marginal problem with cost `Σ_{s<t} λ_s λ_t ‖x_s − x_t‖²`.
    pub fn new(measures: &[DiscreteMeasure], weights: &SimplexWeights, size_guard: usize) -> Result<Self> {
        if weights.len() != measures.len() {
            return Err(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() });
        }
        check_dims(measures)?;
        let masses: Vec<&[f64]> = measures.iter().map(DiscreteMeasure::weights).collect();
        let lam = weights.as_slice();
        Self::with_cost(&masses, size_guard, |t| {
            let m = tuple_mean(t, measures, lam);
            t.iter().enumerate().map(|(i, &j)| lam[i] * sq_dist(measures[i].point(j), &m)).sum()
        })
    }

    pub fn num_variables(&self) -> usize {
        self.lp.num_cols()
    }

    /// Independent constraints kept in the LP.
    pub fn num_rows(&self) -> usize {
        self.lp.num_rows
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn problem(&self) -> &LpProblem {
        &self.lp
    }

    pub fn tuple(&self, mut v: usize) -> Vec<usize> {
        let mut t = vec![0; self.sizes.len()];
        for i in (0..self.sizes.len()).rev() {
            t[i] = v % self.sizes[i];
            v /= self.sizes[i];
        }
        t
    }

    pub fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.sizes).fold(0, |acc, (&j, &s)| acc * s + j)
    }

    /// Row of constraint `(i, j)`, or `None` for a dropped constraint.
    pub fn row(&self, i: usize, j: usize) -> Option<usize> {
        match (i, j) {
            (0, j) => Some(j),
            (_, 0) => None,
            (i, j) => Some(self.row_offset[i] + j - 1),
        }
    }

    /// Solves from the staircase basis.
    pub fn solve(&self) -> Result<LpSolution> {
        let masses = self.masses();
        let refs: Vec<&[f64]> = masses.iter().map(Vec::as_slice).collect();
        let basis = staircase(&refs).into_iter().map(|(t, _)| self.index(&t)).collect();
        solve_lp(&self.lp, basis)
    }

    fn masses(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.sizes.len());
        out.push(self.lp.rhs[..self.sizes[0]].to_vec());
        for i in 1..self.sizes.len() {
            let kept = &self.lp.rhs[self.row_offset[i]..self.row_offset[i] + self.sizes[i] - 1];
            let first = 1.0 - kept.iter().sum::<f64>();
            let mut m = vec![first.max(0.0)];
            m.extend_from_slice(kept);
            out.push(m);
        }
        out
    }

    fn plan(&self, sol: &LpSolution) -> Result<MultiMarginalPlan> {
        let atoms = sol.support.iter().map(|&(v, mass)| Atom { indices: self.tuple(v), mass }).collect();
        MultiMarginalPlan::new(self.sizes.len(), atoms)
    }
}

/// Optimal multi-marginal plan with its value and LP certificate.
#[derive(Debug, Clone)]
pub struct ExactMot {
    pub plan: MultiMarginalPlan,
    pub phi: f64,
    pub certificate: LpCertificate,
}

/// Solves the multi-marginal problem exactly.
pub fn exact_mot_lp(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    size_guard: usize,
) -> Result<ExactMot> {
    let lp = DenseMotLp::new(measures, weights, size_guard)?;
    let sol = lp.solve()?;
    Ok(ExactMot { plan: lp.plan(&sol)?, phi: sol.objective, certificate: sol.certificate })
}

/// Exact barycenter `(M_λ)_# π̂` together with the optimal plan.
///
/// Fails with [`Error::Invariant`] if two atoms of the optimal plan share
/// a mean point or if `Ψ(ν̂)` differs from `Φ(π̂)` by more than `1e-8`.
pub fn exact_barycenter(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    size_guard: usize,
) -> Result<(DiscreteMeasure, ExactMot)> {
    let exact = exact_mot_lp(measures, weights, size_guard)?;
    let lam = weights.as_slice();
    let means: Vec<Vec<f64>> =
        exact.plan.atoms().iter().map(|a| tuple_mean(&a.indices, measures, lam)).collect();
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            if sq_dist(&means[a], &means[b]).sqrt() <= 1e-12 {
                return Err(Error::Invariant(format!("optimal plan atoms {a} and {b} share a mean")));
            }
        }
    }
    let nu = pushforward_mean(&exact.plan, measures, weights)?;
    let psi = psi_cost_cached(&nu, measures, weights, &W2Cache::new())?;
    if (psi - exact.phi).abs() > 1e-8 * exact.phi.abs().max(1.0) {
        return Err(Error::Invariant(format!(
            "barycenter cost {psi} differs from transport cost {}",
            exact.phi
        )));
    }
    Ok((nu, exact))
}

/// Two-marginal transport solved through the dense LP. Independent of the
/// network simplex and used to check it.
pub fn solve_transport_lp(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<TransportSolution> {
    let lp = DenseMotLp::with_cost(&[supply, demand], usize::MAX, |t| cost.get(t[0], t[1]))?;
    let sol = lp.solve()?;
    let atoms = sol
        .support
        .iter()
        .map(|&(v, m)| {
            let t = lp.tuple(v);
            (t[0], t[1], m)
        })
        .collect();
    // the dropped row (·, 0) has potential 0
    let u: Vec<f64> = (0..supply.len()).map(|i| sol.duals[lp.row(0, i).unwrap()]).collect();
    let v: Vec<f64> = (0..demand.len()).map(|j| lp.row(1, j).map_or(0.0, |r| sol.duals[r])).collect();
    Ok(TransportSolution {
        coupling: Coupling::new(atoms)?,
        cost: sol.objective,
        source_potentials: u,
        target_potentials: v,
        iterations: sol.certificate.iterations,
    })
}

/// True iff the support tuples of a one-dimensional plan are totally
/// ordered coordinatewise.
pub fn sorting_property_check(plan: &MultiMarginalPlan, measures: &[DiscreteMeasure]) -> Result<bool> {
    check_dims(measures)?;
    if measures[0].dim() != 1 {
        return Err(Error::Unsupported(format!(
            "the sorting property is only defined in dimension 1, got {}",
            measures[0].dim()
        )));
    }
    let mut rows: Vec<Vec<f64>> = plan
        .atoms()
        .iter()
        .map(|a| a.indices.iter().enumerate().map(|(i, &j)| measures[i].point(j)[0]).collect())
        .collect();
    rows.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(rows.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(x, y)| x <= y)))
}

/// Checks of the necessary optimality conditions of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideConditions {
    /// For each marginal `i`: cost of the coupling `Σ π_j δ(m_j, x_{i,j})`
    /// minus `W₂²(ν, μⁱ)`. Zero for an optimal plan.
    pub coupling_gaps: Vec<f64>,
    /// For each candidate `ν̃`: `max(0, Ψ(ν̃) − Ψ(ν) − W₂²(ν̃, ν))`.
    pub cost_distance_violations: Vec<f64>,
}

impl SideConditions {
    pub fn max_coupling_gap(&self) -> f64 {
        self.coupling_gaps.iter().fold(0.0, |a, g| a.max(g.abs()))
    }

    pub fn max_cost_distance_violation(&self) -> f64 {
        self.cost_distance_violations.iter().fold(0.0, |a, v| a.max(*v))
    }
}

/// Evaluates the side conditions of a claimed-optimal plan with barycenter
/// `ν = (M_λ)_# π` against a list of candidate measures.
///
/// The cost-distance estimate concerns `Ψ` only; the analogous estimate
/// for `Φ` of arbitrary plans is false.
pub fn optimality_side_conditions(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    candidates: &[DiscreteMeasure],
) -> Result<SideConditions> {
    let cache = W2Cache::new();
    let nu = pushforward_mean(plan, measures, weights)?;
    let lam = weights.as_slice();
    let mut coupling_gaps = Vec::with_capacity(measures.len());
    for (i, mu) in measures.iter().enumerate() {
        let induced: f64 = plan
            .atoms()
            .iter()
            .map(|a| a.mass * sq_dist(&tuple_mean(&a.indices, measures, lam), mu.point(a.indices[i])))
            .sum();
        coupling_gaps.push(induced - cache.w2_squared(&nu, mu)?);
    }
    let psi_nu = psi_cost_cached(&nu, measures, weights, &cache)?;
    let mut cost_distance_violations = Vec::with_capacity(candidates.len());
    for c in candidates {
        let psi_c = psi_cost_cached(c, measures, weights, &cache)?;
        let d = cache.w2_squared(c, &nu)?;
        cost_distance_violations.push((psi_c - psi_nu - d).max(0.0));
    }
    Ok(SideConditions { coupling_gaps, cost_distance_violations })
}
