//! Approximation algorithms for multi-marginal transport.

mod greedy;
mod randomized;
mod reference;

pub use greedy::{greedy_algorithm, GreedyState};
pub use randomized::{randomized_greedy, randomized_reference, sample_reference_index};
pub use reference::{glue_pairwise_plans, reference_algorithm, reference_with_couplings};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::plan::check_dims;

pub(crate) fn check_inputs(measures: &[DiscreteMeasure], weights: &SimplexWeights) -> Result<()> {
    if measures.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 measures, got {}",
            measures.len()
        )));
    }
    if weights.len() != measures.len() {
        return Err(Error::WeightLengthMismatch { expected: measures.len(), found: weights.len() });
    }
    check_dims(measures)
}
