//! Euclidean projection onto the probability simplex (Michelot's scheme).

use crate::error::{check_finite, Error, Result};
use crate::types::ProbabilityVector;

/// Projects `v` onto `{p : p >= 0, sum p = 1}`.
///
/// Repeatedly spreads the excess sum evenly over the free coordinates and
/// pins every coordinate that turns negative to zero. The pinned set only
/// grows, so the loop runs at most `d` times.
pub fn project_to_simplex(v: &[f64]) -> Result<ProbabilityVector> {
    project_counting(v).map(|(p, _)| p)
}

/// Same as [`project_to_simplex`], also returning the number of passes.
pub fn project_counting(v: &[f64]) -> Result<(ProbabilityVector, usize)> {
    let d = v.len();
    if d == 0 {
        return Err(Error::InvalidParameter("cannot project an empty vector".into()));
    }
    check_finite(v, "projection input")?;

    let mut g = v.to_vec();
    let mut pinned = vec![false; d];
    let mut n_pinned = 0usize;
    let mut passes = 0usize;
    loop {
        passes += 1;
        let excess = (g.iter().sum::<f64>() - 1.0) / (d - n_pinned) as f64;
        for (gi, &p) in g.iter_mut().zip(&pinned) {
            *gi = if p { 0.0 } else { *gi - excess };
        }
        if g.iter().all(|&gi| gi >= 0.0) {
            break;
        }
        for (gi, p) in g.iter_mut().zip(pinned.iter_mut()) {
            if *gi < 0.0 {
                *gi = 0.0;
                *p = true;
                n_pinned += 1;
            }
        }
        debug_assert!(n_pinned < d);
    }
    debug_assert!(passes <= d);
    Ok((ProbabilityVector::from_trusted(g), passes))
}
