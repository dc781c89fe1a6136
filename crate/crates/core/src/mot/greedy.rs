use super::check_inputs;
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::ot2::{solve_transport, CostMatrix};
use crate::plan::{Atom, MultiMarginalPlan};

/// Greedy algorithm: couples the partial barycenter of the first `r − 1`
/// measures to `μʳ`, for `r = 2, …, N`, extending plan tuples through the
/// optimal couplings.
pub fn greedy_algorithm(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
) -> Result<MultiMarginalPlan> {
    let mut state = GreedyState::start(measures, weights)?;
    while !state.is_complete() {
        state.advance()?;
    }
    state.finish()
}

/// Intermediate state of the greedy algorithm after `r` rounds.
///
/// Atom `k` of the partial barycenter is the prefix mean of tuple `k` of
/// the partial plan, so the back-map is the identity on indices. Atoms
/// are never merged even if their positions coincide.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    measures: &'a [DiscreteMeasure],
    weights: &'a SimplexWeights,
    round: usize,
    tuples: Vec<Vec<usize>>,
    masses: Vec<f64>,
    means: Vec<f64>,
}

impl<'a> GreedyState<'a> {
    /// State after the first round: the plan is `μ¹` itself.
    pub fn start(measures: &'a [DiscreteMeasure], weights: &'a SimplexWeights) -> Result<Self> {
        check_inputs(measures, weights)?;
        let mu1 = &measures[0];
        Ok(Self {
            measures,
            weights,
            round: 1,
            tuples: (0..mu1.len()).map(|j| vec![j]).collect(),
            masses: mu1.weights().to_vec(),
            means: mu1.points_flat().to_vec(),
        })
    }

    /// Number of measures coupled so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_complete(&self) -> bool {
        self.round == self.measures.len()
    }

    /// Index tuples of the partial plan over the first `round` measures.
    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Prefix mean of atom `k` under the renormalized prefix weights.
    pub fn mean(&self, k: usize) -> &[f64] {
        let d = self.measures[0].dim();
        &self.means[k * d..(k + 1) * d]
    }

    /// Packed prefix means, one row per atom.
    pub fn means_flat(&self) -> &[f64] {
        &self.means
    }

    /// The partial plan over the first `round` measures.
    pub fn partial_plan(&self) -> Result<MultiMarginalPlan> {
        let atoms = self
            .tuples
            .iter()
            .zip(&self.masses)
            .map(|(t, &mass)| Atom { indices: t.clone(), mass })
            .collect();
        MultiMarginalPlan::new(self.round, atoms)
    }

    /// Couples the partial barycenter to the next measure.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_complete() {
            return Err(Error::InvalidParameter("all measures are already coupled".into()));
        }
        let r = self.round + 1;
        let target = &self.measures[r - 1];
        let d = target.dim();
        let cost = CostMatrix::squared_euclidean(&self.means, target.points_flat(), d);
        let sol = solve_transport(&self.masses, target.weights(), &cost)?;

        let mut tuples = Vec::with_capacity(sol.coupling.len());
        let mut masses = Vec::with_capacity(sol.coupling.len());
        for (k, t, m) in sol.coupling.iter() {
            let mut tuple = Vec::with_capacity(r);
            tuple.extend_from_slice(&self.tuples[k]);
            tuple.push(t);
            tuples.push(tuple);
            masses.push(m);
        }
        // prefix weights are recomputed from λ every round
        let lam: Vec<f64> = (0..r).map(|i| self.weights.prefix(i, r)).collect();
        let mut means = vec![0.0; tuples.len() * d];
        for (k, tuple) in tuples.iter().enumerate() {
            let row = &mut means[k * d..(k + 1) * d];
            for (i, &j) in tuple.iter().enumerate() {
                let x = self.measures[i].point(j);
                for c in 0..d {
                    row[c] += lam[i] * x[c];
                }
            }
        }
        self.round = r;
        self.tuples = tuples;
        self.masses = masses;
        self.means = means;
        Ok(())
    }

    /// Returns the final plan. Fails if rounds remain.
    pub fn finish(self) -> Result<MultiMarginalPlan> {
        if !self.is_complete() {
            return Err(Error::InvalidParameter(format!(
                "greedy state finished after {} of {} rounds",
                self.round,
                self.measures.len()
            )));
        }
        self.partial_plan()
    }
}
