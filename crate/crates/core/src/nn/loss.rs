use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean square logarithmic error, `(1/R) Σ (ln(S+1) - ln(Ŝ+1))²`.
pub fn msle_loss<T: Scalar>(estimate: &[T], reference: &[T]) -> Result<T> {
    check(estimate, reference)?;
    let r = T::of(estimate.len() as f64);
    let sum: T = estimate
        .iter()
        .zip(reference)
        .map(|(&e, &s)| {
            let d = s.ln_1p() - e.ln_1p();
            d * d
        })
        .sum();
    Ok(sum / r)
}

/// Gradient of [`msle_loss`] w.r.t. the estimate, written into `out`;
/// returns the loss.
pub fn msle_grad<T: Scalar>(estimate: &[T], reference: &[T], out: &mut [T]) -> Result<T> {
    check(estimate, reference)?;
    let r = T::of(estimate.len() as f64);
    let two = T::of(2.0);
    let mut sum = T::zero();
    for ((g, &e), &s) in out.iter_mut().zip(estimate).zip(reference) {
        let d = s.ln_1p() - e.ln_1p();
        sum += d * d;
        *g = -two * d / ((e + T::one()) * r);
    }
    Ok(sum / r)
}

fn check<T: Scalar>(estimate: &[T], reference: &[T]) -> Result<()> {
    if estimate.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "msle operands",
            expected: reference.len(),
            got: estimate.len(),
        });
    }
    if estimate.is_empty() {
        return Err(Error::InvalidConfig("msle of empty vectors".into()));
    }
    if estimate.iter().chain(reference).any(|v| *v < T::zero()) {
        return Err(Error::NegativeInput("msle"));
    }
    Ok(())
}
