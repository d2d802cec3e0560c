/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

/// `D(p ‖ q) = Σ p ln(p/q)` in nats; terms with `p = 0` vanish.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(PROB_FLOOR).ln()))
        .sum::<f64>()
        .max(0.0)
}

/// `d_TV(p, q) = ½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        let expected = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
        let got = kl_divergence(&[0.7, 0.3], &[0.5, 0.5]);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.08228).abs() < 1e-5);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!((total_variation(&[0.7, 0.3], &[0.5, 0.5]) - 0.2).abs() < 1e-15);
    }
}
