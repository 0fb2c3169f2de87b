use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{batch_grad, batch_loss, Example};
use super::{Model, ToynetError};
use crate::exec::Parallelism;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (tensor, flat index, analytic, numeric)
    pub entries: Vec<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn tensors_covered(&self) -> std::collections::BTreeSet<&str> {
        self.entries.iter().map(|e| e.0.as_str()).collect()
    }
}

/// Central differences on at least `count` random parameters, at least one
/// from every tensor, against the analytic gradient of the unit-weight loss.
pub fn grad_check(
    model: &Model<f64>,
    batch: &[Example<f64>],
    epsilon: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheckReport, ToynetError> {
    if !(1e-7..=1e-4).contains(&epsilon) {
        return Err(ToynetError::InvalidConfig(format!("epsilon {epsilon} outside [1e-7, 1e-4]")));
    }
    let (_, grad) = batch_grad(model, batch, 1.0, 1.0, Parallelism::Sequential)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = &model.layout.tensors;
    let mut picks: Vec<(usize, usize)> = (0..tensors.len())
        .map(|t| (t, rng.random_range(0..tensors[t].1.len())))
        .collect();
    while picks.len() < count {
        let t = rng.random_range(0..tensors.len());
        picks.push((t, rng.random_range(0..tensors[t].1.len())));
    }
    picks.shuffle(&mut rng);
    let mut probe = model.clone();
    let mut entries = Vec::with_capacity(picks.len());
    let mut max_rel_err: f64 = 0.0;
    for (t, k) in picks {
        let (name, tx) = &tensors[t];
        let idx = tx.off + k;
        let orig = probe.params[idx];
        probe.params[idx] = orig + epsilon;
        let up = batch_loss(&probe, batch, 1.0, 1.0)?.total;
        probe.params[idx] = orig - epsilon;
        let down = batch_loss(&probe, batch, 1.0, 1.0)?.total;
        probe.params[idx] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grad[idx];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel_err = max_rel_err.max(rel);
        entries.push((name.clone(), idx, analytic, numeric));
    }
    Ok(GradCheckReport { max_rel_err, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numstream::NumMode;
    use crate::toynet::model::tests::{random_example, tiny_model};

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (seed, mode) in [(1, NumMode::Float), (2, NumMode::Char)] {
            let m = tiny_model(mode, seed);
            let batch: Vec<_> = (0..3).map(|_| random_example(&m.vocab, mode, &mut rng)).collect();
            let r = grad_check(&m, &batch, 1e-5, 200, seed).unwrap();
            assert!(r.max_rel_err <= 1e-4, "{mode}: {}", r.max_rel_err);
            assert!(r.entries.len() >= 200);
            for t in ["num.w1", "num.b1", "num.w2", "num.b2", "enc.w1", "block1.wk"] {
                assert!(r.tensors_covered().contains(t));
            }
        }
    }

    #[test]
    fn char_mode_leaves_numeric_head_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = tiny_model(NumMode::Char, 3);
        let batch: Vec<_> = (0..2).map(|_| random_example(&m.vocab, NumMode::Char, &mut rng)).collect();
        let (_, g) = batch_grad(&m, &batch, 1.0, 1.0, Parallelism::Sequential).unwrap();
        let l = &m.layout;
        for t in [l.num_w1, l.num_b1, l.num_w2, l.num_b2] {
            assert!(t.of(&g).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn perfect_numeric_predictions_have_no_mse_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = tiny_model(NumMode::Float, 4);
        let mut ex = random_example(&m.vocab, NumMode::Float, &mut rng);
        let out = super::super::model::forward(&m, &ex.pixels, &ex.input).unwrap();
        for s in ex.slots.iter_mut() {
            s.1 = out.numeric[s.0];
        }
        let (lp, g) = batch_grad(&m, std::slice::from_ref(&ex), 0.0, 1.0, Parallelism::Sequential).unwrap();
        assert_eq!(lp.mse, 0.0);
        assert!(g.iter().all(|&v| v.abs() < 1e-12));
    }
}
