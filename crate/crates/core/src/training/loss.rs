use crate::error::{Error, Result};
use crate::model::{euclidean, Embedding};
use crate::tensor::{Scalar, Tape, Var};

/// `max(d(a,p) − d(a,n) + margin, 0)` on raw Euclidean distances.
pub fn triplet_loss(anchor: &Embedding, positive: &Embedding, negative: &Embedding, margin: f64) -> Result<f64> {
    check_margin(margin)?;
    Ok((euclidean(anchor, positive)? - euclidean(anchor, negative)? + margin).max(0.0))
}

/// The same loss recorded on a tape, for backpropagation.
pub fn triplet_loss_on_tape<T: Scalar>(tape: &mut Tape<T>, anchor: Var, positive: Var, negative: Var, margin: f64) -> Result<Var> {
    check_margin(margin)?;
    let dp = tape.distance(anchor, positive)?;
    let dn = tape.distance(anchor, negative)?;
    let gap = tape.sub(dp, dn)?;
    let shifted = tape.add_scalar(gap, T::from_f64_lossy(margin))?;
    tape.relu(shifted)
}

fn check_margin(margin: f64) -> Result<()> {
    if margin.is_finite() && margin >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("margin must be finite and non-negative, got {margin}")))
    }
}
