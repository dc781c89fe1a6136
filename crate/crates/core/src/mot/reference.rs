use rayon::prelude::*;

use super::check_inputs;
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights, MASS_TOL};
use crate::ot2::{build_cost_matrix, solve_ot2, TransportSolution};
use crate::plan::{Atom, Coupling, MultiMarginalPlan};

/// Residuals at or below this count as consumed.
const RESIDUAL_TOL: f64 = 1e-12;

/// Reference algorithm: solves the `N − 1` problems `(μ¹, μⁱ)` and glues
/// the optimal couplings along the shared first marginal.
///
/// The result is feasible and has at most `Σ n_i − N + 1` atoms. Its
/// projection onto coordinates `(1, i)` is an optimal coupling of `μ¹` and
/// `μⁱ`. The weights only matter for validation; the pairwise costs are
/// `‖x₁ − xᵢ‖²`.
pub fn reference_algorithm(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<MultiMarginalPlan> {
    Ok(reference_with_couplings(measures, weights)?.0)
}

/// [`reference_algorithm`] that also returns the pairwise solutions, in
/// the order `μ², …, μᴺ`.
pub fn reference_with_couplings(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<(MultiMarginalPlan, Vec<TransportSolution>)> {
    check_inputs(measures, weights)?;
    let mu1 = &measures[0];
    let solutions: Vec<TransportSolution> = measures[1..]
        .par_iter()
        .map(|mu| solve_ot2(&build_cost_matrix(mu1, mu)?))
        .collect::<Result<_>>()?;
    let couplings: Vec<&Coupling> = solutions.iter().map(|s| &s.coupling).collect();

    let plan = if mu1.dim() == 1 {
        // consume atoms in increasing order of position, as required for
        // the glued plan to inherit the sorting property
        let first = rank_by_position(mu1);
        let targets: Vec<Vec<usize>> = measures[1..].iter().map(rank_by_position).collect();
        glue(mu1, &couplings, &first, &targets)?
    } else {
        let first: Vec<usize> = (0..mu1.len()).collect();
        let targets: Vec<Vec<usize>> = measures[1..].iter().map(|m| (0..m.len()).collect()).collect();
        glue(mu1, &couplings, &first, &targets)?
    };
    Ok((plan, solutions))
}

/// Glues couplings `π², …, πᴺ` that share the first marginal `μ¹` into one
/// plan over `N = plans.len() + 1` marginals, consuming atoms in index
/// order.
pub fn glue_pairwise_plans(mu1: &DiscreteMeasure, plans: &[Coupling]) -> Result<MultiMarginalPlan> {
    if plans.is_empty() {
        return Err(Error::InvalidParameter("nothing to glue".into()));
    }
    let first: Vec<usize> = (0..mu1.len()).collect();
    let targets: Vec<Vec<usize>> = plans
        .iter()
        .map(|p| {
            let n = p.iter().map(|(_, t, _)| t + 1).max().unwrap_or(0);
            (0..n).collect()
        })
        .collect();
    let refs: Vec<&Coupling> = plans.iter().collect();
    glue(mu1, &refs, &first, &targets)
}

/// Rank of each support point in increasing coordinate order (d = 1).
fn rank_by_position(mu: &DiscreteMeasure) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu.point(a)[0].total_cmp(&mu.point(b)[0]));
    let mut rank = vec![0; mu.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    rank
}

/// Core gluing loop. `first_rank` orders the points of `μ¹` and
/// `target_rank[i]` orders the points of the `i`-th target; within every
/// first-marginal group the atoms are consumed in target-rank order.
fn glue(
    mu1: &DiscreteMeasure,
    plans: &[&Coupling],
    first_rank: &[usize],
    target_rank: &[Vec<usize>],
) -> Result<MultiMarginalPlan> {
    let n1 = mu1.len();
    let k = plans.len();

    // groups[i][s] = atoms (t, mass) of coupling i with first index s
    let mut groups: Vec<Vec<Vec<(usize, f64)>>> = vec![vec![Vec::new(); n1]; k];
    for (i, p) in plans.iter().enumerate() {
        for (s, t, m) in p.iter() {
            if s >= n1 {
                return Err(Error::MarginalMismatch(format!(
                    "coupling {} uses first index {s} but the reference has {n1} points",
                    i + 2
                )));
            }
            if t >= target_rank[i].len() {
                return Err(Error::InvalidPlan(format!("target index {t} out of range")));
            }
            groups[i][s].push((t, m));
        }
        for g in groups[i].iter_mut() {
            g.sort_by_key(|&(t, _)| target_rank[i][t]);
        }
    }
    for (i, gi) in groups.iter().enumerate() {
        for (s, g) in gi.iter().enumerate() {
            let total: f64 = g.iter().map(|a| a.1).sum();
            let want = mu1.weights()[s];
            if (total - want).abs() > MASS_TOL {
                return Err(Error::MarginalMismatch(format!(
                    "coupling {} puts mass {total} on reference point {s}, expected {want}",
                    i + 2
                )));
            }
        }
    }

    let mut order: Vec<usize> = (0..n1).collect();
    order.sort_by_key(|&s| first_rank[s]);

    let mut atoms = Vec::new();
    let mut cursor = vec![0usize; k];
    let mut residual = vec![0.0f64; k];
    for s in order {
        for i in 0..k {
            cursor[i] = 0;
            residual[i] = groups[i][s][0].1;
        }
        loop {
            let h = residual.iter().copied().fold(f64::INFINITY, f64::min);
            if h > 0.0 {
                let mut indices = Vec::with_capacity(k + 1);
                indices.push(s);
                indices.extend((0..k).map(|i| groups[i][s][cursor[i]].0));
                atoms.push(Atom { indices, mass: h });
            }
            let mut done = false;
            for i in 0..k {
                residual[i] -= h;
                if residual[i] < -RESIDUAL_TOL {
                    return Err(Error::Invariant(format!("negative residual {}", residual[i])));
                }
                if residual[i] <= RESIDUAL_TOL {
                    cursor[i] += 1;
                    match groups[i][s].get(cursor[i]) {
                        Some(&(_, m)) => residual[i] = m + residual[i].max(0.0),
                        None => done = true,
                    }
                }
            }
            if done {
                // every other coupling must be exhausted too, up to drift
                for i in 0..k {
                    let left: f64 = if cursor[i] < groups[i][s].len() {
                        residual[i] + groups[i][s][cursor[i] + 1..].iter().map(|a| a.1).sum::<f64>()
                    } else {
                        0.0
                    };
                    if left > MASS_TOL {
                        return Err(Error::MarginalMismatch(format!(
                            "coupling {} has {left} unmatched mass at reference point {s}",
                            i + 2
                        )));
                    }
                }
                break;
            }
        }
    }
    MultiMarginalPlan::new(k + 1, atoms)
}
