use crate::dataset::{ClassWeights, Label};

/// Class-weighted 2-way cross-entropy over pre-softmax logits.
///
/// Returns the per-sample loss and its gradient w.r.t. the logits. The
/// sample's loss and gradient are both scaled by the class weight of its
/// true label, so unit weights reduce exactly to unweighted cross-entropy
/// and doubling a class's weight doubles that class's contribution.
pub fn weighted_cross_entropy(
    logits: &[f64; 2],
    label: Label,
    weights: &ClassWeights,
) -> (f64, [f64; 2]) {
    let w = weights.for_label(label);
    let max = logits[0].max(logits[1]);
    let lse = max + ((logits[0] - max).exp() + (logits[1] - max).exp()).ln();
    let target = match label {
        Label::Negative => 0,
        Label::Positive => 1,
    };
    let loss = w * (lse - logits[target]);
    let mut grad = [0.0; 2];
    for i in 0..2 {
        let p = (logits[i] - lse).exp();
        grad[i] = w * (p - if i == target { 1.0 } else { 0.0 });
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unweighted(logits: &[f64; 2], label: Label) -> f64 {
        let target = match label {
            Label::Negative => 0,
            Label::Positive => 1,
        };
        let denom = logits[0].exp() + logits[1].exp();
        -(logits[target].exp() / denom).ln()
    }

    #[test]
    fn unit_weights_reduce_to_unweighted_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let weights = ClassWeights::uniform();
        for _ in 0..200 {
            let logits = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            for label in [Label::Negative, Label::Positive] {
                let (loss, _) = weighted_cross_entropy(&logits, label, &weights);
                assert!((loss - unweighted(&logits, label)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn doubling_a_weight_doubles_that_class_loss() {
        let logits = [0.3, -1.2];
        let base = ClassWeights {
            negative: 1.0,
            positive: 1.0,
        };
        let doubled = ClassWeights {
            negative: 1.0,
            positive: 2.0,
        };
        let (l1, g1) = weighted_cross_entropy(&logits, Label::Positive, &base);
        let (l2, g2) = weighted_cross_entropy(&logits, Label::Positive, &doubled);
        assert_eq!(l2, 2.0 * l1);
        assert_eq!(g2[0], 2.0 * g1[0]);
        assert_eq!(g2[1], 2.0 * g1[1]);
        // negative-class samples are untouched
        let (n1, _) = weighted_cross_entropy(&logits, Label::Negative, &base);
        let (n2, _) = weighted_cross_entropy(&logits, Label::Negative, &doubled);
        assert_eq!(n1, n2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let weights = ClassWeights {
            negative: 0.6,
            positive: 3.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps = 1e-7;
        for _ in 0..100 {
            let logits = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let label = if rng.random::<bool>() {
                Label::Positive
            } else {
                Label::Negative
            };
            let (_, grad) = weighted_cross_entropy(&logits, label, &weights);
            for i in 0..2 {
                let mut up = logits;
                up[i] += eps;
                let mut down = logits;
                down[i] -= eps;
                let numeric = (weighted_cross_entropy(&up, label, &weights).0
                    - weighted_cross_entropy(&down, label, &weights).0)
                    / (2.0 * eps);
                assert!((grad[i] - numeric).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let weights = ClassWeights::uniform();
        let (loss, grad) = weighted_cross_entropy(&[800.0, -800.0], Label::Positive, &weights);
        assert!(loss.is_finite());
        assert!(grad[0].is_finite() && grad[1].is_finite());
    }
}
