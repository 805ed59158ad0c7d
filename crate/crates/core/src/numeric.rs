//! Clamped exponentials and weighted log-sum-exp.

/// Exponent arguments are clamped to `[-EXP_CLAMP, EXP_CLAMP]` before `exp`.
pub const EXP_CLAMP: f64 = 700.0;

#[inline]
pub(crate) fn clamp_exponent(x: f64) -> f64 {
    x.clamp(-EXP_CLAMP, EXP_CLAMP)
}

#[inline]
pub(crate) fn exp_clamped(x: f64) -> f64 {
    clamp_exponent(x).exp()
}

/// `log Σ_i w_i exp(v_i)` over the atoms with `w_i > 0`.
///
/// Returns `-inf` when every weight is zero.
pub(crate) fn log_sum_exp_weighted<I>(terms: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    let shift =
        terms.clone().into_iter().filter(|&(_, w)| w > 0.0).map(|(v, w)| v + w.ln()).fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.into_iter().filter(|&(_, w)| w > 0.0).map(|(v, w)| (v + w.ln() - shift).exp()).sum();
    shift + sum.ln()
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
