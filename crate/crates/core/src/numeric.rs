//! Small log-domain helpers shared by the solvers.

/// Stable `ln Σ exp(v)`. Returns `-inf` for an empty or all `-inf` input.
pub fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let s: f64 = v.iter().map(|&a| (a - max).exp()).sum();
    max + s.ln()
}

/// Normalizes `logits` in place so that `exp(logits)` sums to one and writes
/// the probabilities into `probs`. The max is subtracted before
/// exponentiation. Returns false if the result is not finite.
pub fn log_normalize(logits: &mut [f64], probs: &mut [f64]) -> bool {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return false;
    }
    let mut total = 0.0;
    for (l, p) in logits.iter_mut().zip(probs.iter_mut()) {
        *l -= max;
        *p = l.exp();
        total += *p;
    }
    let log_total = total.ln();
    for (l, p) in logits.iter_mut().zip(probs.iter_mut()) {
        *l -= log_total;
        *p /= total;
    }
    total.is_finite() && total > 0.0
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_handles_large_values() {
        let v = [1000.0, 1000.0];
        assert!((logsumexp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_normalize_softmax() {
        let mut l = vec![0.0, 2f64.ln(), f64::NEG_INFINITY];
        let mut p = vec![0.0; 3];
        assert!(log_normalize(&mut l, &mut p));
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert!((l[1].exp() - p[1]).abs() < 1e-15);
    }
}
