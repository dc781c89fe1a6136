use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_inputs, greedy_algorithm, reference_algorithm};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::plan::MultiMarginalPlan;

/// Draws an index `k` with probability `λ_k`.
pub fn sample_reference_index<R: Rng + ?Sized>(weights: &SimplexWeights, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, l) in weights.as_slice().iter().enumerate() {
        acc += l;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Reference algorithm with the reference measure drawn from `λ`.
///
/// Marginal `i` of the returned plan is always input measure `i`.
pub fn randomized_reference(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    seed: u64,
) -> Result<MultiMarginalPlan> {
    check_inputs(measures, weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = sample_reference_index(weights, &mut rng);
    let mut order = vec![k];
    order.extend((0..measures.len()).filter(|&i| i != k));
    run_permuted(measures, weights, &order, reference_algorithm)
}

/// Greedy algorithm on a uniformly random ordering of the measures.
///
/// Only defined for uniform weights, which is the setting in which the
/// expected-ratio guarantee for random orderings holds.
pub fn randomized_greedy(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    seed: u64,
) -> Result<MultiMarginalPlan> {
    check_inputs(measures, weights)?;
    if !weights.is_uniform() {
        return Err(Error::Unsupported(
            "randomized greedy requires uniform weights λ = 1/N (the random-order \
             guarantee assumes equal weights)"
                .into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..measures.len()).collect();
    order.shuffle(&mut rng);
    run_permuted(measures, weights, &order, greedy_algorithm)
}

fn run_permuted(
    measures: &[DiscreteMeasure],
    weights: &SimplexWeights,
    order: &[usize],
    algo: fn(&[DiscreteMeasure], &SimplexWeights) -> Result<MultiMarginalPlan>,
) -> Result<MultiMarginalPlan> {
    let permuted: Vec<DiscreteMeasure> = order.iter().map(|&i| measures[i].clone()).collect();
    let plan = algo(&permuted, &weights.permuted(order))?;
    let mut inverse = vec![0; order.len()];
    for (p, &i) in order.iter().enumerate() {
        inverse[i] = p;
    }
    plan.permute_marginals(&inverse)
}
