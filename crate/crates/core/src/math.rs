//! Scalar helpers for the logistic link.

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic loss of a raw margin `z` against a 0/1 label.
pub fn log_loss(z: f64, y: f64) -> f64 {
    // -[y ln σ(z) + (1 - y) ln(1 - σ(z))] = softplus(z) - y z
    softplus(z) - y * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((logit(sigmoid(1.3)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn log_loss_matches_definition() {
        for &z in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            for &y in &[0.0, 1.0] {
                let p = sigmoid(z);
                let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
                assert!((log_loss(z, y) - direct).abs() < 1e-12);
            }
        }
        assert!(log_loss(1000.0, 0.0).is_finite());
    }
}
