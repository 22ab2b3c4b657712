//! Energy-model training machinery: the persistent chain buffer, the
//! Langevin sampler, and the contrastive-divergence generative loss.
//!
//! Negative samples come from persistent chains: starting states are drawn
//! from the buffer (occasionally reinitialized uniformly over the domain
//! box), advanced by noisy score ascent, and written back. The generative
//! loss treats the finished chains as constants; only the model parameters
//! see gradients.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::dam::score_gradient;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{density_forward, encoder_forward, BoundModel, GediModel, Trainable};
use crate::rng::Rng;
use crate::tape::{NodeId, Tape};

#[derive(Debug, Clone, Copy)]
pub struct SgldConfig {
    pub steps: usize,
    pub step_size: f64,
    pub noise_std: f64,
}

impl Default for SgldConfig {
    fn default() -> Self {
        SgldConfig { steps: 20, step_size: 1.0, noise_std: 0.01 }
    }
}

impl SgldConfig {
    pub fn validate(&self) {
        assert!(self.steps >= 1, "SGLD needs at least one step");
        assert!(self.step_size > 0.0, "SGLD step size must be positive");
        assert!(self.noise_std >= 0.0, "SGLD noise must be non-negative");
    }
}

/// A draw from the buffer: starting states, the slots they came from (for
/// write-back), and which rows were freshly reinitialized.
#[derive(Debug, Clone)]
pub struct DrawnBatch {
    pub states: Matrix,
    pub slots: Vec<usize>,
    pub fresh: Vec<bool>,
}

/// Pool of persistent chain states over an axis-aligned domain box. States
/// are clamped to the box on write-back, so everything stored stays inside.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    slots: Matrix,
    reinit_prob: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl ReplayBuffer {
    /// Buffer filled with uniform samples over the box.
    pub fn new(capacity: usize, reinit_prob: f64, lo: [f64; 2], hi: [f64; 2], rng: &mut Rng) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        assert!((0.0..=1.0).contains(&reinit_prob), "reinit probability must be in [0, 1]");
        assert!(lo[0] < hi[0] && lo[1] < hi[1], "domain box must be non-degenerate");
        let mut slots = Matrix::zeros(capacity, 2);
        for r in 0..capacity {
            slots.set(r, 0, rng.gen_range(lo[0]..hi[0]));
            slots.set(r, 1, rng.gen_range(lo[1]..hi[1]));
        }
        ReplayBuffer { slots, reinit_prob, lo, hi }
    }

    /// Buffer whose domain box is the bounding box of `points` expanded by
    /// `margin` on every side.
    pub fn for_data(capacity: usize, reinit_prob: f64, points: &Matrix, margin: f64, rng: &mut Rng) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for r in 0..points.rows() {
            for c in 0..2 {
                lo[c] = lo[c].min(points.get(r, c));
                hi[c] = hi[c].max(points.get(r, c));
            }
        }
        for c in 0..2 {
            lo[c] -= margin;
            hi[c] += margin;
        }
        ReplayBuffer::new(capacity, reinit_prob, lo, hi, rng)
    }

    pub fn capacity(&self) -> usize {
        self.slots.rows()
    }

    pub fn domain_box(&self) -> ([f64; 2], [f64; 2]) {
        (self.lo, self.hi)
    }

    pub fn states(&self) -> &Matrix {
        &self.slots
    }

    /// Restore the slot states (checkpoint loading). Shape must match.
    pub fn restore_states(&mut self, states: Matrix) {
        assert_eq!(states.shape(), self.slots.shape(), "buffer state shape mismatch");
        self.slots = states;
    }

    /// Draw `m` chain starting states: per row, with probability
    /// `reinit_prob` a fresh uniform box sample, otherwise the content of a
    /// uniformly chosen slot. The chosen slot index is recorded either way.
    pub fn draw(&self, m: usize, rng: &mut Rng) -> DrawnBatch {
        assert!(m <= self.capacity(), "cannot draw {m} rows from a buffer of {}", self.capacity());
        let mut states = Matrix::zeros(m, 2);
        let mut slots = Vec::with_capacity(m);
        let mut fresh = Vec::with_capacity(m);
        for r in 0..m {
            let slot = rng.gen_range(0..self.capacity());
            let is_fresh = rng.gen::<f64>() < self.reinit_prob;
            if is_fresh {
                states.set(r, 0, rng.gen_range(self.lo[0]..self.hi[0]));
                states.set(r, 1, rng.gen_range(self.lo[1]..self.hi[1]));
            } else {
                states.row_mut(r).copy_from_slice(self.slots.row(slot));
            }
            slots.push(slot);
            fresh.push(is_fresh);
        }
        DrawnBatch { states, slots, fresh }
    }

    /// Store finished chains back into their slots, clamped to the box.
    pub fn write_back(&mut self, slots: &[usize], states: &Matrix) {
        assert_eq!(slots.len(), states.rows(), "write_back length mismatch");
        for (r, &slot) in slots.iter().enumerate() {
            for c in 0..2 {
                let v = states.get(r, c).clamp(self.lo[c], self.hi[c]);
                self.slots.set(slot, c, v);
            }
        }
    }
}

/// Langevin steps under an arbitrary score field: `x += step_size * score(x)
/// + noise_std * eps`. Exposed separately so the sampler can be exercised on
/// analytic scores.
pub fn sgld_steps(
    score: impl Fn(&Matrix) -> Matrix,
    x0: &Matrix,
    cfg: &SgldConfig,
    rng: &mut Rng,
) -> Result<Matrix> {
    cfg.validate();
    assert!(x0.all_finite(), "SGLD starting states must be finite");
    let mut x = x0.clone();
    for step in 1..=cfg.steps {
        let g = score(&x);
        assert_eq!(g.shape(), x.shape(), "score field shape mismatch");
        for (xv, gv) in x.data_mut().iter_mut().zip(g.data()) {
            *xv += cfg.step_size * gv;
            if cfg.noise_std > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                *xv += cfg.noise_std * e;
            }
        }
        if let Some(row) = x.first_non_finite_row() {
            return Err(Error::SgldDiverged { step, row });
        }
    }
    Ok(x)
}

/// Langevin sampling along the model's score field. Model parameters are
/// untouched and receive no gradients.
pub fn sgld_sample(model: &GediModel, x0: &Matrix, cfg: &SgldConfig, rng: &mut Rng) -> Result<Matrix> {
    sgld_steps(|x| score_gradient(model, x), x0, cfg, rng)
}

/// One full negative-sampling cycle: draw starting states, run the chains,
/// write the finished states back into their slots.
pub fn sample_negatives(
    model: &GediModel,
    buffer: &mut ReplayBuffer,
    m: usize,
    cfg: &SgldConfig,
    rng: &mut Rng,
) -> Result<Matrix> {
    let drawn = buffer.draw(m, rng);
    let finished = sgld_sample(model, &drawn.states, cfg, rng)?;
    buffer.write_back(&drawn.slots, &finished);
    Ok(finished)
}

/// Contrastive-divergence loss from already-computed score columns:
/// `mean(s_neg) - mean(s_data)`.
pub fn generative_loss_from_scores(tape: &mut Tape, s_data: NodeId, s_neg: NodeId) -> NodeId {
    assert!(tape.value(s_data).rows() > 0, "empty data batch");
    assert!(tape.value(s_neg).rows() > 0, "empty negative batch");
    let m_data = tape.mean_all(s_data);
    let m_neg = tape.mean_all(s_neg);
    tape.sub(m_neg, m_data)
}

/// Contrastive-divergence loss on the tape:
/// `mean(s(x_neg)) - mean(s(x_data))`. Minimizing raises the score of data
/// relative to the model's own samples. Both inputs are data nodes; the
/// negatives must have been produced outside the tape (they are constants).
pub fn generative_loss_on(
    tape: &mut Tape,
    bound: &BoundModel,
    x_data: NodeId,
    x_neg: NodeId,
) -> NodeId {
    let enc = *bound.density_encoder();
    let h_data = encoder_forward(tape, &enc, x_data);
    let h_neg = encoder_forward(tape, &enc, x_neg);
    let s_data = density_forward(tape, bound, h_data);
    let s_neg = density_forward(tape, bound, h_neg);
    generative_loss_from_scores(tape, s_data, s_neg)
}

/// Plain evaluation of the generative loss (no gradients).
pub fn generative_loss(model: &GediModel, x_data: &Matrix, x_neg: &Matrix) -> f64 {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, Trainable::None);
    let d = tape.constant(x_data.clone());
    let n = tape.constant(x_neg.clone());
    let l = generative_loss_on(&mut tape, &bound, d, n);
    tape.value(l).scalar_value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::assert_gradients;
    use crate::model::{EnergyHead, ModelKind};
    use crate::rng::seeded;

    fn model_with_u(u0: f64, u1: f64) -> GediModel {
        let mut m = GediModel::new(ModelKind::Standard, 2, 0.1, &mut seeded(0));
        m.head = EnergyHead::VectorU(Matrix::from_rows(&[vec![u0], vec![u1]]));
        m
    }

    #[test]
    fn draw_with_certain_reinit_is_all_fresh() {
        let mut rng = seeded(1);
        let buffer = ReplayBuffer::new(50, 1.0, [-1.0, -1.0], [1.0, 1.0], &mut rng);
        let drawn = buffer.draw(20, &mut rng);
        assert!(drawn.fresh.iter().all(|&f| f));
        for r in 0..20 {
            assert!(drawn.states.get(r, 0).abs() <= 1.0);
            assert!(drawn.states.get(r, 1).abs() <= 1.0);
        }
    }

    #[test]
    fn draw_with_zero_reinit_reads_stored_states() {
        let mut rng = seeded(2);
        let buffer = ReplayBuffer::new(50, 0.0, [-1.0, -1.0], [1.0, 1.0], &mut rng);
        let drawn = buffer.draw(20, &mut rng);
        assert!(drawn.fresh.iter().all(|&f| !f));
        for r in 0..20 {
            assert_eq!(drawn.states.row(r), buffer.states().row(drawn.slots[r]));
        }
    }

    #[test]
    fn fresh_fraction_matches_reinit_probability() {
        let mut rng = seeded(3);
        let buffer = ReplayBuffer::new(10_000, 0.05, [-1.0, -1.0], [1.0, 1.0], &mut rng);
        let mut fresh = 0usize;
        let total = 10_000;
        for _ in 0..total / 100 {
            let drawn = buffer.draw(100, &mut rng);
            fresh += drawn.fresh.iter().filter(|&&f| f).count();
        }
        let fraction = fresh as f64 / total as f64;
        assert!((0.04..=0.06).contains(&fraction), "fraction {fraction}");
    }

    #[test]
    #[should_panic(expected = "cannot draw")]
    fn draw_larger_than_capacity_panics() {
        let mut rng = seeded(4);
        let buffer = ReplayBuffer::new(8, 0.05, [-1.0, -1.0], [1.0, 1.0], &mut rng);
        buffer.draw(9, &mut rng);
    }

    #[test]
    fn write_back_clamps_into_the_box() {
        let mut rng = seeded(5);
        let mut buffer = ReplayBuffer::new(4, 0.0, [-1.0, -1.0], [1.0, 1.0], &mut rng);
        let wild = Matrix::from_rows(&[vec![5.0, -7.0]]);
        buffer.write_back(&[2], &wild);
        assert_eq!(buffer.states().row(2), &[1.0, -1.0]);
    }

    #[test]
    fn data_box_expands_by_margin() {
        let mut rng = seeded(6);
        let points = Matrix::from_rows(&[vec![0.0, 2.0], vec![1.0, -1.0]]);
        let buffer = ReplayBuffer::for_data(4, 0.05, &points, 0.5, &mut rng);
        let (lo, hi) = buffer.domain_box();
        assert_eq!(lo, [-0.5, -1.5]);
        assert_eq!(hi, [1.5, 2.5]);
    }

    #[test]
    fn sgld_zero_drift_zero_noise_is_identity() {
        let model = model_with_u(0.0, 0.0);
        let x0 = Matrix::from_rows(&[vec![0.5, -0.5], vec![0.1, 0.9]]);
        let cfg = SgldConfig { steps: 5, step_size: 1.0, noise_std: 0.0 };
        let out = sgld_sample(&model, &x0, &cfg, &mut seeded(7)).unwrap();
        assert_eq!(out, x0);
    }

    #[test]
    fn single_deterministic_step_is_score_ascent() {
        let model = model_with_u(0.4, -0.8);
        let x0 = Matrix::from_rows(&[vec![0.5, -0.5], vec![0.1, 0.9]]);
        let cfg = SgldConfig { steps: 1, step_size: 0.7, noise_std: 0.0 };
        let out = sgld_sample(&model, &x0, &cfg, &mut seeded(8)).unwrap();
        let g = score_gradient(&model, &x0);
        for r in 0..2 {
            for c in 0..2 {
                let expect = x0.get(r, c) + 0.7 * g.get(r, c);
                assert!((out.get(r, c) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sampler_concentrates_under_a_quadratic_score() {
        // Analytic surrogate s(x) = -|x|^2/2 has score -x; many small steps
        // shrink the chain toward the origin.
        let n = 64;
        let mut x0 = Matrix::zeros(n, 2);
        let mut rng = seeded(9);
        for v in x0.data_mut() {
            *v = rng.gen_range(-5.0..5.0);
        }
        let cfg = SgldConfig { steps: 200, step_size: 0.05, noise_std: 0.01 };
        let out = sgld_steps(|x| x.map(|v| -v), &x0, &cfg, &mut rng).unwrap();
        let mean_norm = |m: &Matrix| {
            (0..m.rows())
                .map(|r| (m.get(r, 0).powi(2) + m.get(r, 1).powi(2)).sqrt())
                .sum::<f64>()
                / m.rows() as f64
        };
        assert!(mean_norm(&out) < 0.25 * mean_norm(&x0));
    }

    #[test]
    fn sgld_reports_divergence_with_step_index() {
        let cfg = SgldConfig { steps: 3, step_size: 1.0, noise_std: 0.0 };
        let x0 = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let err = sgld_steps(|x| x.map(|_| f64::INFINITY), &x0, &cfg, &mut seeded(10));
        match err {
            Err(Error::SgldDiverged { step: 1, row: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_cycle_is_reproducible_and_writes_back() {
        let model = model_with_u(0.3, 0.3);
        let run = || {
            let mut rng = seeded(11);
            let mut buffer = ReplayBuffer::new(100, 0.05, [-2.0, -2.0], [2.0, 2.0], &mut rng);
            let neg = sample_negatives(&model, &mut buffer, 16, &SgldConfig::default(), &mut rng)
                .unwrap();
            (neg, buffer.states().clone())
        };
        let (neg_a, slots_a) = run();
        let (neg_b, slots_b) = run();
        assert_eq!(neg_a, neg_b);
        assert_eq!(slots_a, slots_b);
    }

    #[test]
    fn identical_phases_cancel() {
        let model = model_with_u(0.9, -0.4);
        let x = Matrix::from_rows(&[vec![0.2, 0.4], vec![-0.8, 0.3]]);
        assert_eq!(generative_loss(&model, &x, &x), 0.0);
    }

    #[test]
    fn zero_head_gives_zero_loss_and_zero_encoder_gradient() {
        let model = model_with_u(0.0, 0.0);
        let x = Matrix::from_rows(&[vec![0.2, 0.4], vec![-0.8, 0.3]]);
        let neg = Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]);
        assert_eq!(generative_loss(&model, &x, &neg), 0.0);

        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, Trainable::Generative);
        let d = tape.constant(x);
        let n = tape.constant(neg);
        let loss = generative_loss_on(&mut tape, &bound, d, n);
        tape.backprop(loss);
        // The encoder only feeds the loss through u = 0, so its gradient
        // vanishes (u itself still gets one).
        let g = tape.grad(bound.enc.l1.w).cloned().unwrap_or_else(|| Matrix::zeros(2, 100));
        assert_eq!(g, Matrix::zeros(2, 100));
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        // Checks the positive-minus-negative phase structure through the
        // energy head and the encoder output layer.
        let base = model_with_u(0.3, -0.6);
        let x_train = Matrix::from_rows(&[vec![0.2, 0.4], vec![-0.8, 0.3], vec![0.5, -0.5]]);
        let x_neg = Matrix::from_rows(&[vec![1.0, 0.1], vec![-0.3, -0.9], vec![0.0, 0.7]]);
        let u0 = match &base.head {
            EnergyHead::VectorU(u) => u.clone(),
            _ => unreachable!(),
        };
        let leaves = vec![u0, base.enc.l3.w.clone(), base.enc.l3.b.clone()];
        assert_gradients(&leaves, |ls| {
            let mut model = base.clone();
            model.head = EnergyHead::VectorU(ls[0].clone());
            model.enc.l3.w = ls[1].clone();
            model.enc.l3.b = ls[2].clone();
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, Trainable::Generative);
            let ids = match bound.head {
                crate::model::BoundEnergyHead::VectorU(u) => {
                    vec![u, bound.enc.l3.w, bound.enc.l3.b]
                }
                _ => unreachable!(),
            };
            let d = tape.constant(x_train.clone());
            let n = tape.constant(x_neg.clone());
            let loss = generative_loss_on(&mut tape, &bound, d, n);
            (tape, ids, loss)
        });
    }
}
