use crate::{NeuralError, Result, Scalar};

/// Probability floor inside the logarithm of [`cross_entropy`].
pub const CE_CLIP: f64 = 1e-12;

/// Temperature softmax: `p_j = exp(z_j/τ − max_k z_k/τ) / Σ`.
pub fn softmax_t<F: Scalar>(logits: &[F], tau: F) -> Result<Vec<F>> {
    let mut out = logits.to_vec();
    softmax_t_in_place(&mut out, tau)?;
    Ok(out)
}

pub fn softmax_t_in_place<F: Scalar>(values: &mut [F], tau: F) -> Result<()> {
    if !(tau > F::zero()) || !tau.is_finite() {
        return Err(NeuralError::InvalidTemperature(tau.as_f64()));
    }
    if values.is_empty() {
        return Ok(());
    }
    let max = values
        .iter()
        .fold(F::neg_infinity(), |m, &v| if v > m { v } else { m });
    let mut sum = F::zero();
    for v in values.iter_mut() {
        *v = (*v / tau - max / tau).exp();
        sum = sum + *v;
    }
    for v in values.iter_mut() {
        *v = *v / sum;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(NeuralError::NumericFault { op: "softmax" });
    }
    Ok(())
}

/// `−log(p[target] + 1e-12)`.
pub fn cross_entropy<F: Scalar>(p: &[F], target: usize) -> Result<F> {
    let pt = p.get(target).ok_or(NeuralError::IndexOutOfRange {
        index: target,
        len: p.len(),
    })?;
    Ok(-(*pt + F::from_f64(CE_CLIP)).ln())
}
