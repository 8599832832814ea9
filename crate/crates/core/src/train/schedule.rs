/// Adversarial strength at a given epoch: `lambda0 * (2 / (1 + exp(-10 epoch / gamma)) - 1)`.
///
/// Starts at zero and rises smoothly towards `lambda0`; `gamma` sets how many
/// epochs the ramp takes.
pub fn lambda_schedule(epoch: usize, lambda0: f64, gamma: u32) -> f64 {
    assert!(gamma >= 1, "gamma must be at least 1");
    let p = epoch as f64 / gamma as f64;
    lambda0 * (2.0 / (1.0 + (-10.0 * p).exp()) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero() {
        assert_eq!(lambda_schedule(0, 1.7, 1), 0.0);
        assert_eq!(lambda_schedule(0, 18.0, 600), 0.0);
    }

    #[test]
    fn one_gamma_in() {
        let expected = 2.0 / (1.0 + (-10.0f64).exp()) - 1.0;
        assert_eq!(lambda_schedule(600, 1.0, 600), expected);
        assert!((expected - 0.999909).abs() < 1e-6);
    }

    #[test]
    fn zero_scale() {
        for e in [0, 1, 10, 999] {
            assert_eq!(lambda_schedule(e, 0.0, 10), 0.0);
        }
    }
}
