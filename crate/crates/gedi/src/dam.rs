//! Manifold-following augmentation: perturb each point inside a small ball
//! and project the move onto the tangent plane of the learned density's level
//! set, iterated for a fixed number of moves.
//!
//! The walk reads the score field `grad_x s(x)` of the energy model (the
//! direction of steepest density increase); removing the component of the
//! perturbation along it keeps the move tangent to the local manifold. Rows
//! are processed independently: each row's perturbation comes from a
//! substream keyed on the row's content bits, so permuting the input rows
//! permutes the output rows identically.

use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{density_forward, encoder_forward, GediModel, Trainable};
use crate::rng::{splitmix64, Rng};
use crate::tape::Tape;

#[derive(Debug, Clone, Copy)]
pub struct DamConfig {
    /// Perturbation ball radius.
    pub epsilon: f64,
    /// Number of moves T.
    pub steps: usize,
    /// Below this gradient norm the projection falls back to the raw move.
    pub grad_tolerance: f64,
    /// Redraw the perturbation every move instead of reusing the initial one.
    pub resample_delta: bool,
}

impl Default for DamConfig {
    fn default() -> Self {
        DamConfig { epsilon: 0.03, steps: 10, grad_tolerance: 1e-8, resample_delta: false }
    }
}

/// Remove from `delta` its component along `grad`:
/// `delta - ((grad . delta) / |grad|^2) grad` when `|grad| > tol`, `delta`
/// unchanged otherwise. Invariant under positive rescaling of `grad` and
/// never longer than `delta`.
pub fn tangent_project(delta: [f64; 2], grad: [f64; 2], tol: f64) -> [f64; 2] {
    let norm_sq = grad[0] * grad[0] + grad[1] * grad[1];
    if norm_sq.sqrt() <= tol {
        return delta;
    }
    let coeff = (grad[0] * delta[0] + grad[1] * delta[1]) / norm_sq;
    [delta[0] - coeff * grad[0], delta[1] - coeff * grad[1]]
}

/// Per-row gradient of the log unnormalized density with respect to the
/// input, `grad_x s(x)`. This is a positive rescaling of the density's own
/// gradient, which the tangent projection is invariant to, so it stands in
/// for the density gradient field. Model parameters are constants here.
pub fn score_gradient(model: &GediModel, x: &Matrix) -> Matrix {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, Trainable::None);
    let xid = tape.variable(x.clone());
    let h = encoder_forward(&mut tape, bound.density_encoder(), xid);
    let s = density_forward(&mut tape, &bound, h);
    // Rows pass through the encoder independently, so the gradient of the
    // batch sum is the per-row gradient.
    let total = tape.sum_all(s);
    tape.backprop(total);
    tape.grad(xid).cloned().unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols()))
}

fn sample_ball(rng: &mut Rng, epsilon: f64) -> [f64; 2] {
    // Uniform over the disk: uniform angle, radius epsilon * sqrt(U).
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let radius = epsilon * rng.gen::<f64>().sqrt();
    [radius * angle.cos(), radius * angle.sin()]
}

fn row_rng(base: u64, row: &[f64]) -> Rng {
    let mut h = base;
    for &v in row {
        h = splitmix64(h ^ v.to_bits());
    }
    Rng::seed_from_u64(h)
}

/// The augmentation walk: sample one in-ball perturbation per row, then for
/// each of `cfg.steps` moves evaluate the score gradient at the perturbed
/// position and apply the tangent-projected move. The result is detached:
/// model parameters receive no gradient from this procedure.
pub fn dam_augment(x: &Matrix, model: &GediModel, cfg: &DamConfig, rng: &mut Rng) -> Result<Matrix> {
    assert!(cfg.epsilon > 0.0, "ball radius must be positive");
    assert!(x.cols() == 2, "dam_augment expects 2-D points");
    let n = x.rows();
    // One draw keys the whole call; per-row substreams hang off it so rows
    // are independent of batch order.
    let base = rng.gen::<u64>();
    let mut row_rngs: Vec<Rng> = (0..n).map(|r| row_rng(base, x.row(r))).collect();
    let mut deltas: Vec<[f64; 2]> =
        row_rngs.iter_mut().map(|r| sample_ball(r, cfg.epsilon)).collect();

    let mut current = x.clone();
    let mut probe = Matrix::zeros(n, 2);
    for step in 1..=cfg.steps {
        if cfg.resample_delta && step > 1 {
            for (d, r) in deltas.iter_mut().zip(row_rngs.iter_mut()) {
                *d = sample_ball(r, cfg.epsilon);
            }
        }
        for r in 0..n {
            probe.set(r, 0, current.get(r, 0) + deltas[r][0]);
            probe.set(r, 1, current.get(r, 1) + deltas[r][1]);
        }
        let grads = score_gradient(model, &probe);
        for r in 0..n {
            let g = [grads.get(r, 0), grads.get(r, 1)];
            let moved = tangent_project(deltas[r], g, cfg.grad_tolerance);
            current.set(r, 0, current.get(r, 0) + moved[0]);
            current.set(r, 1, current.get(r, 1) + moved[1]);
        }
        if let Some(row) = current.first_non_finite_row() {
            return Err(Error::DamDiverged { step, row });
        }
    }
    Ok(current)
}
