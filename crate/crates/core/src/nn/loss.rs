use crate::numerics::DenseMatrix;

/// Numerically stable softplus: ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on post-sigmoid probabilities, clamped away from
/// {0, 1} so the logs stay finite. Prefer `bce_with_logits` in training.
pub fn loss_bce(probabilities: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(probabilities.len(), labels.len());
    assert!(!probabilities.is_empty());
    let n = probabilities.len() as f64;
    probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Binary cross-entropy evaluated directly on logits:
/// L = mean( y softplus(-l) + (1-y) softplus(l) ),
/// with gradient dL/dl = (sigma(l) - y) / N. Safe for any logit magnitude.
pub fn bce_with_logits(logits: &DenseMatrix, labels: &[f64]) -> (f64, DenseMatrix) {
    assert_eq!(logits.cols(), 1, "logits must be a column");
    assert_eq!(logits.rows(), labels.len());
    assert!(!labels.is_empty());
    let n = labels.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), 1);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let l = logits[(i, 0)];
        total += y * softplus(-l) + (1.0 - y) * softplus(l);
        grad[(i, 0)] = (stable_sigmoid(l) - y) / n;
    }
    (total / n, grad)
}

/// Mean squared error over all entries.
pub fn loss_mse(predicted: &[f64], target: &[f64]) -> f64 {
    assert_eq!(predicted.len(), target.len());
    assert!(!predicted.is_empty());
    let n = predicted.len() as f64;
    predicted
        .iter()
        .zip(target)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_indifference_is_ln_two() {
        let p = vec![0.5; 8];
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!((loss_bce(&p, &y) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_known_value() {
        // -ln(0.9) for a confident correct prediction.
        let l = loss_bce(&[0.9], &[1.0]);
        assert!((l - 0.10536051565782628).abs() < 1e-12);
    }

    #[test]
    fn logit_bce_matches_probability_bce() {
        let logits = DenseMatrix::from_rows(&[vec![0.3], vec![-1.7], vec![2.2], vec![0.0]]);
        let labels = [1.0, 0.0, 0.0, 1.0];
        let probs: Vec<f64> = logits.as_slice().iter().map(|&l| stable_sigmoid(l)).collect();
        let (l_logit, _) = bce_with_logits(&logits, &labels);
        let l_prob = loss_bce(&probs, &labels);
        assert!((l_logit - l_prob).abs() < 1e-12);
    }

    #[test]
    fn logit_bce_survives_extreme_logits() {
        let logits = DenseMatrix::from_rows(&[vec![500.0], vec![-500.0]]);
        let labels = [1.0, 0.0];
        let (l, g) = bce_with_logits(&logits, &labels);
        assert!(l.is_finite());
        assert!(l < 1e-10);
        assert!(g.as_slice().iter().all(|v| v.is_finite()));

        // And the maximally-wrong case grows linearly, not to infinity.
        let (l_bad, g_bad) = bce_with_logits(&logits, &[0.0, 1.0]);
        assert!((l_bad - 500.0).abs() < 1e-9);
        assert!(g_bad.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn logit_bce_gradient_matches_finite_differences() {
        let labels = [1.0, 0.0, 1.0];
        let base = [0.37, -0.92, 1.48];
        let logits = DenseMatrix::from_rows(&[vec![base[0]], vec![base[1]], vec![base[2]]]);
        let (_, grad) = bce_with_logits(&logits, &labels);
        let step = 1e-6;
        for i in 0..3 {
            let mut lp = base;
            lp[i] += step;
            let mut lm = base;
            lm[i] -= step;
            let mp = DenseMatrix::from_rows(&[vec![lp[0]], vec![lp[1]], vec![lp[2]]]);
            let mm = DenseMatrix::from_rows(&[vec![lm[0]], vec![lm[1]], vec![lm[2]]]);
            let (fp, _) = bce_with_logits(&mp, &labels);
            let (fm, _) = bce_with_logits(&mm, &labels);
            let numeric = (fp - fm) / (2.0 * step);
            assert!((grad[(i, 0)] - numeric).abs() < 1e-8);
        }
    }

    #[test]
    fn indifferent_discriminator_losses() {
        // All-zero logits: per-class loss ln 2, two-class sum 2 ln 2 = ln 4.
        let logits = DenseMatrix::zeros(10, 1);
        let (l_real, _) = bce_with_logits(&logits, &vec![1.0; 10]);
        let (l_fake, _) = bce_with_logits(&logits, &vec![0.0; 10]);
        assert!((l_real - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l_real + l_fake - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mse_known_value_and_permutation_invariance() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 1.0];
        // ((1)^2 + (2)^2 + (2)^2) / 3 = 3.0
        assert!((loss_mse(&a, &b) - 3.0).abs() < 1e-15);
        let a2 = [3.0, 1.0, 2.0];
        let b2 = [1.0, 2.0, 4.0];
        assert_eq!(loss_mse(&a, &b), loss_mse(&a2, &b2));
        assert_eq!(loss_mse(&a, &a), 0.0);
    }

    #[test]
    fn softplus_limits() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(40.0) - 40.0).abs() < 1e-12);
        assert!(softplus(-40.0) < 1e-12);
        assert!(softplus(-40.0) > 0.0);
    }
}
