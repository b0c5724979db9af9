//! Masked multi-task objective and its exact gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::model::{sigmoid, ModelBundle};

/// BCE inputs are clipped to `[BCE_CLIP, 1 - BCE_CLIP]`.
pub const BCE_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub contact: f64,
    pub slip: f64,
    pub location: f64,
    pub force: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            contact: 1.0,
            slip: 1.0,
            location: 1.0,
            force: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("training.loss_weights.contact", self.contact),
            ("training.loss_weights.slip", self.slip),
            ("training.loss_weights.location", self.location),
            ("training.loss_weights.force", self.force),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be a finite value >= 0, got {v}")));
            }
        }
        if self.contact + self.slip + self.location + self.force == 0.0 {
            return Err(Error::config("training.loss_weights", "at least one weight must be > 0"));
        }
        Ok(())
    }
}

/// Ground truth for one window. `location` in metres, `force` in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub contact: bool,
    pub slipping: bool,
    pub location: f64,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Unweighted batch-mean contact BCE.
    pub contact: f64,
    /// Unweighted means over contact-positive samples; zero when there are none.
    pub slip: f64,
    pub location: f64,
    pub force: f64,
    pub positives: usize,
}

/// Clipped binary cross-entropy and its derivative with respect to the logit.
pub fn bce_with_logit(logit: f64, target: bool) -> (f64, f64) {
    let p = sigmoid(logit);
    let clipped = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
    let y = if target { 1.0 } else { 0.0 };
    let loss = -(y * clipped.ln() + (1.0 - y) * (1.0 - clipped).ln());
    // The clip is flat outside its range, so the gradient vanishes there.
    let grad = if p == clipped { p - y } else { 0.0 };
    (loss, grad)
}

/// `L = l_c BCE(c) + (1/P) sum_{c=1} [l_s BCE(s) + l_x (x^ - x)^2 + l_F (F^ - F)^2]`
/// with regression errors on the bundle's standardised target scale and `P`
/// the number of contact-positive samples. Returns the loss and the gradient
/// with respect to every trainable parameter, laid out as a bundle.
pub fn total_loss(
    bundle: &ModelBundle,
    batch: &[(&[f64], Labels)],
    weights: &LossWeights,
) -> Result<(LossBreakdown, ModelBundle)> {
    let mut grad = bundle.zeros_like();
    let breakdown = accumulate(bundle, batch, weights, Some(&mut grad))?;
    Ok((breakdown, grad))
}

/// Loss value only.
pub fn loss_value(bundle: &ModelBundle, batch: &[(&[f64], Labels)], weights: &LossWeights) -> Result<LossBreakdown> {
    accumulate(bundle, batch, weights, None)
}

fn accumulate(
    bundle: &ModelBundle,
    batch: &[(&[f64], Labels)],
    weights: &LossWeights,
    mut grad: Option<&mut ModelBundle>,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::Dataset("loss of an empty batch".into()));
    }
    let n = batch.len() as f64;
    let positives = batch.iter().filter(|(_, l)| l.contact).count();
    let p = positives.max(1) as f64;
    let mut out = LossBreakdown {
        positives,
        ..LossBreakdown::default()
    };
    for (features, labels) in batch {
        let t = bundle.trace(features)?;
        let (lc, gc) = bce_with_logit(t.contact_logit, labels.contact);
        out.contact += lc / n;
        if let Some(g) = grad.as_deref_mut() {
            let d = weights.contact * gc / n;
            bundle.contact.backward(&t.z, &[d], &mut g.contact, None);
        }
        if !labels.contact {
            continue;
        }
        let (ls, gs) = bce_with_logit(t.slip_logit, labels.slipping);
        let ex = t.location.output() - bundle.location_scale.encode(labels.location);
        let ef = t.force.output() - bundle.force_scale.encode(labels.force);
        out.slip += ls / p;
        out.location += ex * ex / p;
        out.force += ef * ef / p;
        if let Some(g) = grad.as_deref_mut() {
            bundle.slip.backward(&t.z, &[weights.slip * gs / p], &mut g.slip, None);
            bundle.location.backward(&t.location, weights.location * 2.0 * ex / p, &mut g.location);
            bundle.force.backward(&t.force, weights.force * 2.0 * ef / p, &mut g.force);
        }
    }
    out.total = weights.contact * out.contact
        + weights.slip * out.slip
        + weights.location * out.location
        + weights.force * out.force;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::model::Normalization;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, dim: usize, rows: usize) -> (ModelBundle, Vec<Vec<f64>>, Vec<Labels>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<Labels> = (0..rows)
            .map(|i| {
                let contact = i % 3 != 0;
                Labels {
                    contact,
                    slipping: contact && rng.random_bool(0.5),
                    location: rng.random_range(0.1..0.5),
                    force: if contact { rng.random_range(0.0..2.0) } else { 0.0 },
                }
            })
            .collect();
        let mut b = ModelBundle::initialise(
            Normalization::fit(feats.iter().map(|r| r.as_slice())).unwrap(),
            &[7, 5, 4],
            "h".into(),
            &mut rng,
        );
        b.location_scale = crate::inference::model::TargetScale { mean: 0.3, std: 0.1 };
        b.force_scale = crate::inference::model::TargetScale { mean: 1.0, std: 0.6 };
        // non-zero biases so every unit's gradient path is exercised
        let mut params = b.parameters();
        params.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
        b.set_parameters(&params).unwrap();
        (b, feats, labels)
    }

    fn batch<'a>(f: &'a [Vec<f64>], l: &[Labels]) -> Vec<(&'a [f64], Labels)> {
        f.iter().map(|r| r.as_slice()).zip(l.iter().copied()).collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (b, f, l) = setup(3, 6, 10);
        let w = LossWeights {
            contact: 1.0,
            slip: 0.7,
            location: 1.3,
            force: 0.9,
        };
        let data = batch(&f, &l);
        let (_, grad) = total_loss(&b, &data, &w).unwrap();
        let analytic = grad.parameters();
        let base = b.parameters();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut probe = b.clone();
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_parameters(&p).unwrap();
            let up = loss_value(&probe, &data, &w).unwrap().total;
            p[i] = base[i] - h;
            probe.set_parameters(&p).unwrap();
            let down = loss_value(&probe, &data, &w).unwrap().total;
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn masking_ignores_negative_regression_labels() {
        let (b, f, l) = setup(5, 4, 9);
        let w = LossWeights::default();
        let (loss_a, grad_a) = total_loss(&b, &batch(&f, &l), &w).unwrap();
        let perturbed: Vec<Labels> = l
            .iter()
            .map(|x| {
                if x.contact {
                    *x
                } else {
                    Labels {
                        location: x.location + 0.37,
                        force: 5.0,
                        ..*x
                    }
                }
            })
            .collect();
        let (loss_b, grad_b) = total_loss(&b, &batch(&f, &perturbed), &w).unwrap();
        assert_eq!(loss_a.total.to_bits(), loss_b.total.to_bits());
        assert_eq!(grad_a, grad_b);
    }

    #[test]
    fn all_negative_batch_uses_only_contact_term() {
        let (b, f, mut l) = setup(6, 4, 6);
        l.iter_mut().for_each(|x| {
            x.contact = false;
            x.slipping = false;
        });
        let (loss, grad) = total_loss(&b, &batch(&f, &l), &LossWeights::default()).unwrap();
        assert_eq!(loss.positives, 0);
        assert_eq!((loss.slip, loss.location, loss.force), (0.0, 0.0, 0.0));
        assert!(loss.total.is_finite());
        assert_eq!(loss.total, loss.contact);
        let g = grad.parameters();
        assert!(g[grad.slip_parameter_range()].iter().all(|v| *v == 0.0));
        assert!(g[grad.regression_parameter_range()].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn perfect_predictions_hit_the_floor() {
        let mut b = ModelBundle::initialise(
            Normalization::identity(1),
            &[2, 2, 2],
            "h".into(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .zeros_like();
        b.contact.weights[0] = 100.0;
        b.slip.weights[0] = 100.0;
        // location/force MLPs output 0, so choose labels at the target means
        let labels = Labels {
            contact: true,
            slipping: true,
            location: 0.0,
            force: 0.0,
        };
        let f = [vec![1.0]];
        let loss = loss_value(&b, &batch(&f, &[labels]), &LossWeights::default()).unwrap();
        let floor = -(1.0 - BCE_CLIP).ln();
        assert!(loss.total <= 2.0 * floor + 1e-15, "{}", loss.total);
    }

    #[test]
    fn bce_is_clipped() {
        let (l, g) = bce_with_logit(-200.0, true);
        assert!((l + BCE_CLIP.ln()).abs() < 1e-12);
        assert_eq!(g, 0.0);
        let (l, g) = bce_with_logit(0.0, false);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_batches_have_exact_gradients(seed in 0u64..10_000) {
            let (b, f, l) = setup(seed, 5, 8);
            let data = batch(&f, &l);
            let w = LossWeights::default();
            let (_, grad) = total_loss(&b, &data, &w).unwrap();
            let analytic = grad.parameters();
            let base = b.parameters();
            let h = 1e-5;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..40 {
                let i = rng.random_range(0..base.len());
                let mut probe = b.clone();
                let mut p = base.clone();
                p[i] += h;
                probe.set_parameters(&p).unwrap();
                let up = loss_value(&probe, &data, &w).unwrap().total;
                p[i] -= 2.0 * h;
                probe.set_parameters(&p).unwrap();
                let down = loss_value(&probe, &data, &w).unwrap().total;
                let numeric = (up - down) / (2.0 * h);
                let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
                prop_assert!(err < 1e-4, "param {}: {} vs {}", i, numeric, analytic[i]);
            }
        }
    }
}
