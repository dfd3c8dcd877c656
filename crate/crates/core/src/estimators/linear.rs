use crate::assignment::Matcher;
use crate::error::Result;
use crate::models::{ModelKind, Observation};

use super::EstimateResult;

/// MLE in the linear assignment model: `argmax_π Σ_i ⟨Y_i, X_{π(i)}⟩`.
pub fn mle_linear(obs: &Observation) -> Result<EstimateResult> {
    mle_linear_with(obs, Matcher::Exact)
}

/// [`mle_linear`] with a chosen rounding step.
pub fn mle_linear_with(obs: &Observation, matcher: Matcher) -> Result<EstimateResult> {
    obs.require(ModelKind::LinearAssignment)?;
    let w = &obs.right * obs.left.transpose();
    Ok(EstimateResult::from_assignment(matcher.solve(&w)?, 1, None))
}
