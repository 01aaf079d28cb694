use crate::error::{BboxError, Result};
use crate::trace::ParamVector;

/// Hands out candidate keys; key 0 is reserved for the initial point.
#[derive(Debug, Clone)]
pub(crate) struct KeyGen(u64);

impl KeyGen {
    pub(crate) fn new() -> Self {
        Self(1)
    }

    pub(crate) fn next_key(&mut self) -> u64 {
        let k = self.0;
        self.0 += 1;
        k
    }
}

pub(crate) use crate::rng::standard_normal as gaussian;

/// Draws a proposal, resampling once if it is not finite.
pub(crate) fn propose_finite<G>(mut draw: G, step: usize) -> Result<ParamVector>
where
    G: FnMut() -> Vec<f64>,
{
    ParamVector::checked(draw())
        .or_else(|| ParamVector::checked(draw()))
        .ok_or(BboxError::NonFinite { step })
}

pub(crate) fn check_choice(choice: u32, k: u32, step: usize) -> Result<()> {
    if choice == 0 || choice > k {
        Err(BboxError::ChoiceOutOfRange { step, choice, k })
    } else {
        Ok(())
    }
}

pub(crate) fn no_pending() -> BboxError {
    BboxError::Protocol("no pending candidate: call ask() first".into())
}

pub(crate) fn not_started() -> BboxError {
    BboxError::Protocol("recommend() called before any tell()".into())
}
