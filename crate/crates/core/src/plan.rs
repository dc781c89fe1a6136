//! Sparse multi-marginal transport plans.
//!
//! A plan is stored as a list of atoms `(j_1, …, j_N; mass)` where `j_i`
//! indexes the support of the `i`-th marginal measure. Plans do not own the
//! measures; operations that need coordinates take them as a slice.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights, MASS_TOL};

/// One support tuple of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub indices: Vec<usize>,
    pub mass: f64,
}

/// A sparse plan over `N` marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiMarginalPlan {
    num_marginals: usize,
    atoms: Vec<Atom>,
}

impl MultiMarginalPlan {
    /// Builds a plan, merging repeated tuples and sorting atoms
    /// lexicographically by index tuple. Atoms with nonpositive mass are
    /// discarded.
    pub fn new(num_marginals: usize, atoms: Vec<Atom>) -> Result<Self> {
        if num_marginals == 0 {
            return Err(Error::InvalidPlan("a plan needs at least one marginal".into()));
        }
        for a in &atoms {
            if a.indices.len() != num_marginals {
                return Err(Error::InvalidPlan(format!(
                    "atom has {} indices, plan has {} marginals",
                    a.indices.len(),
                    num_marginals
                )));
            }
            if !a.mass.is_finite() {
                return Err(Error::InvalidPlan(format!("non-finite mass {}", a.mass)));
            }
        }
        Ok(Self::canonical(num_marginals, atoms))
    }

    /// Builds a plan exactly as given, without merging or sorting.
    ///
    /// Meant for tests and diagnostics that need to represent malformed
    /// plans; no invariant is checked.
    pub fn from_raw(num_marginals: usize, atoms: Vec<Atom>) -> Self {
        Self { num_marginals, atoms }
    }

    fn canonical(num_marginals: usize, atoms: Vec<Atom>) -> Self {
        let mut merged: HashMap<Vec<usize>, f64> = HashMap::with_capacity(atoms.len());
        for a in atoms {
            if a.mass > 0.0 {
                *merged.entry(a.indices).or_insert(0.0) += a.mass;
            }
        }
        let mut atoms: Vec<Atom> =
            merged.into_iter().map(|(indices, mass)| Atom { indices, mass }).collect();
        atoms.sort_by(|a, b| a.indices.cmp(&b.indices));
        Self { num_marginals, atoms }
    }

    /// The independent coupling `μ^1 ⊗ … ⊗ μ^N` (dense; small inputs only).
    pub fn product(measures: &[DiscreteMeasure]) -> Result<Self> {
        let sizes: Vec<usize> = measures.iter().map(DiscreteMeasure::len).collect();
        let mut atoms = Vec::new();
        for_each_tuple(&sizes, |t| {
            let mass = t.iter().enumerate().map(|(i, &j)| measures[i].weights()[j]).product();
            atoms.push(Atom { indices: t.to_vec(), mass });
        });
        Self::new(measures.len(), atoms)
    }

    /// Multi-marginal north-west corner rule in support index order.
    ///
    /// Walks a monotone staircase from `(0, …, 0)` to `(n_1-1, …, n_N-1)`,
    /// so the result has at most `Σ n_i − N + 1` atoms.
    pub fn north_west_corner(measures: &[DiscreteMeasure]) -> Result<Self> {
        let masses: Vec<&[f64]> = measures.iter().map(DiscreteMeasure::weights).collect();
        let steps = staircase(&masses);
        let atoms = steps
            .into_iter()
            .map(|(indices, mass)| Atom { indices, mass })
            .collect();
        Self::new(measures.len(), atoms)
    }

    pub fn num_marginals(&self) -> usize {
        self.num_marginals
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Number of support atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `(P_{i_1,…,i_m})_# π`: keeps the selected coordinates and merges
    /// atoms whose projected tuples coincide.
    pub fn marginal_projection(&self, indices: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.num_marginals];
        for &i in indices {
            if i >= self.num_marginals {
                return Err(Error::IndexOutOfRange { index: i, num_marginals: self.num_marginals });
            }
            if seen[i] {
                return Err(Error::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { indices: indices.iter().map(|&i| a.indices[i]).collect(), mass: a.mass })
            .collect();
        Self::new(indices.len(), atoms)
    }

    /// Mass that the plan puts on each support point of marginal `i`.
    pub fn marginal_masses(&self, i: usize, support_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; support_len];
        for a in &self.atoms {
            if let Some(slot) = out.get_mut(a.indices[i]) {
                *slot += a.mass;
            }
        }
        out
    }

    /// Reorders coordinates: coordinate `p` of the result is coordinate
    /// `order[p]` of `self`.
    pub fn permute_marginals(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.num_marginals {
            return Err(Error::InvalidPlan("permutation length mismatch".into()));
        }
        self.marginal_projection(order)
    }

    /// Convex combination `Σ_k c_k π_k` of plans over the same marginals.
    pub fn mixture(parts: &[(f64, &MultiMarginalPlan)]) -> Result<Self> {
        let n = parts.first().map(|p| p.1.num_marginals).ok_or_else(|| {
            Error::InvalidPlan("empty mixture".into())
        })?;
        let mut atoms = Vec::new();
        for (c, p) in parts {
            if p.num_marginals != n {
                return Err(Error::InvalidPlan("mixture of plans with different N".into()));
            }
            atoms.extend(p.atoms.iter().map(|a| Atom { indices: a.indices.clone(), mass: c * a.mass }));
        }
        Self::new(n, atoms)
    }
}

/// Calls `f` on every index tuple of the product grid, last index fastest.
pub(crate) fn for_each_tuple(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.iter().any(|&s| s == 0) {
        return;
    }
    let mut t = vec![0usize; sizes.len()];
    loop {
        f(&t);
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            t[k] += 1;
            if t[k] < sizes[k] {
                break;
            }
            t[k] = 0;
        }
    }
}

/// Monotone staircase through the product grid. Every step advances
/// exactly one coordinate, so exactly `Σ n_i − N + 1` tuples are emitted
/// (some possibly with zero mass when residuals tie).
pub(crate) fn staircase(masses: &[&[f64]]) -> Vec<(Vec<usize>, f64)> {
    let n = masses.len();
    let mut pos = vec![0usize; n];
    let mut residual: Vec<f64> = masses.iter().map(|m| m[0]).collect();
    let steps: usize = masses.iter().map(|m| m.len()).sum::<usize>() + 1 - n;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let h = residual.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        out.push((pos.clone(), h));
        residual.iter_mut().for_each(|r| *r -= h);
        // advance the first exhausted coordinate that can still move,
        // otherwise the one with the smallest residual that can move
        let movable = |i: usize| pos[i] + 1 < masses[i].len();
        let pick = (0..n)
            .filter(|&i| movable(i))
            .min_by(|&a, &b| residual[a].total_cmp(&residual[b]).then(a.cmp(&b)));
        match pick {
            Some(i) => {
                pos[i] += 1;
                residual[i] = masses[i][pos[i]] + residual[i].min(0.0);
            }
            None => break,
        }
    }
    out
}

/// Feasibility diagnostics for a plan against its marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    /// Max absolute discrepancy between projected and prescribed masses,
    /// one entry per marginal.
    pub marginal_errors: Vec<f64>,
    pub total_mass_error: f64,
    pub duplicate_tuples: usize,
    pub out_of_range_indices: usize,
    pub nonpositive_atoms: usize,
    pub feasible: bool,
}

impl PlanDiagnostics {
    pub fn max_marginal_error(&self) -> f64 {
        self.marginal_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks membership of `plan` in `Π(μ^1, …, μ^N)` with tolerance `1e-9`.
pub fn validate_plan(plan: &MultiMarginalPlan, measures: &[DiscreteMeasure]) -> PlanDiagnostics {
    let n = plan.num_marginals;
    let mut out_of_range = 0;
    let mut nonpositive = 0;
    let mut seen: HashMap<&[usize], ()> = HashMap::with_capacity(plan.atoms.len());
    let mut duplicates = 0;
    for a in &plan.atoms {
        if a.indices.len() != n
            || a.indices.iter().enumerate().any(|(i, &j)| i >= measures.len() || j >= measures[i].len())
        {
            out_of_range += 1;
        }
        if !(a.mass > 0.0) {
            nonpositive += 1;
        }
        if seen.insert(a.indices.as_slice(), ()).is_some() {
            duplicates += 1;
        }
    }
    let marginal_errors: Vec<f64> = (0..n)
        .map(|i| match measures.get(i) {
            Some(m) => plan
                .marginal_masses(i, m.len())
                .iter()
                .zip(m.weights())
                .map(|(p, w)| (p - w).abs())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        })
        .collect();
    let total_mass_error = (plan.total_mass() - 1.0).abs();
    let feasible = measures.len() == n
        && out_of_range == 0
        && nonpositive == 0
        && duplicates == 0
        && total_mass_error <= MASS_TOL
        && marginal_errors.iter().all(|e| *e <= MASS_TOL);
    PlanDiagnostics {
        marginal_errors,
        total_mass_error,
        duplicate_tuples: duplicates,
        out_of_range_indices: out_of_range,
        nonpositive_atoms: nonpositive,
        feasible,
    }
}

/// Upper bound `Σ n_i − N + 1` on the support size of a vertex plan.
pub fn sparsity_bound(measures: &[DiscreteMeasure]) -> usize {
    measures.iter().map(DiscreteMeasure::len).sum::<usize>() + 1 - measures.len()
}

/// Weighted mean `Σ_i λ_i x_i` of the tuple `indices`.
pub fn tuple_mean(indices: &[usize], measures: &[DiscreteMeasure], weights: &[f64]) -> Vec<f64> {
    let d = measures[0].dim();
    let mut m = vec![0.0; d];
    for (i, &j) in indices.iter().enumerate() {
        let x = measures[i].point(j);
        for k in 0..d {
            m[k] += weights[i] * x[k];
        }
    }
    m
}

/// `(M_λ)_# π = Σ_j π_j δ(m_j)` with `m_j = Σ_i λ_i x_{i,j}`.
///
/// Atoms whose mean points coincide exactly are merged.
pub fn pushforward_mean(
    plan: &MultiMarginalPlan,
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<DiscreteMeasure> {
    if weights.len() != plan.num_marginals {
        return Err(Error::WeightLengthMismatch { expected: plan.num_marginals, found: weights.len() });
    }
    if measures.len() != plan.num_marginals {
        return Err(Error::InvalidPlan(format!(
            "{} measures for a plan with {} marginals",
            measures.len(),
            plan.num_marginals
        )));
    }
    check_dims(measures)?;
    let d = measures[0].dim();
    let mut pts = Vec::with_capacity(plan.len() * d);
    let mut ws = Vec::with_capacity(plan.len());
    for a in &plan.atoms {
        pts.extend(tuple_mean(&a.indices, measures, weights.as_slice()));
        ws.push(a.mass);
    }
    DiscreteMeasure::from_flat(d, pts, ws)
}

pub(crate) fn check_dims(measures: &[DiscreteMeasure]) -> Result<()> {
    let d = measures
        .first()
        .map(DiscreteMeasure::dim)
        .ok_or_else(|| Error::InvalidParameter("no measures given".into()))?;
    for m in measures {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
    }
    Ok(())
}

/// A two-marginal plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    plan: MultiMarginalPlan,
}

impl Coupling {
    pub fn new(atoms: Vec<(usize, usize, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(s, t, mass)| Atom { indices: vec![s, t], mass })
            .collect();
        Ok(Self { plan: MultiMarginalPlan::new(2, atoms)? })
    }

    pub fn from_plan(plan: MultiMarginalPlan) -> Result<Self> {
        if plan.num_marginals != 2 {
            return Err(Error::InvalidPlan(format!(
                "a coupling has 2 marginals, not {}",
                plan.num_marginals
            )));
        }
        Ok(Self { plan })
    }

    /// `(source, target, mass)` triples in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.plan.atoms.iter().map(|a| (a.indices[0], a.indices[1], a.mass))
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    pub fn as_plan(&self) -> &MultiMarginalPlan {
        &self.plan
    }

    pub fn into_plan(self) -> MultiMarginalPlan {
        self.plan
    }

    /// `⟨c, π⟩` for an explicit cost function on index pairs.
    pub fn cost_with(&self, mut c: impl FnMut(usize, usize) -> f64) -> f64 {
        self.iter().map(|(s, t, m)| m * c(s, t)).sum()
    }
}
