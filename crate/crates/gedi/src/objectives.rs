//! Discriminative losses: optimal-transport cluster assignment via
//! Sinkhorn-Knopp, the swapped-prediction cluster loss, the negative-free
//! covariance loss, and the reference InfoNCE and Barlow-style losses, plus
//! the weighted composite.
//!
//! Assignments are always detached: they are targets computed from plain
//! matrices, never differentiated through. The assignment entropy lives
//! inside the entropic solver; only the cross-entropy term is differentiated.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Entropic-regularization strength and the minimum number of row/column
/// rescaling sweeps.
#[derive(Debug, Clone, Copy)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub iterations: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig { epsilon: 0.05, iterations: 3 }
    }
}

/// Row-stochastic soft assignment with equipartition column marginals:
/// rows sum to 1/n, columns to 1/c.
#[derive(Debug, Clone)]
pub struct AssignmentMatrix {
    pub q: Matrix,
}

impl AssignmentMatrix {
    /// Worst absolute row- and column-marginal residuals.
    pub fn marginal_residuals(&self) -> (f64, f64) {
        let (n, c) = self.q.shape();
        let mut row_res: f64 = 0.0;
        for r in 0..n {
            let s: f64 = self.q.row(r).iter().sum();
            row_res = row_res.max((s - 1.0 / n as f64).abs());
        }
        let mut col_res: f64 = 0.0;
        for j in 0..c {
            let s: f64 = (0..n).map(|r| self.q.get(r, j)).sum();
            col_res = col_res.max((s - 1.0 / c as f64).abs());
        }
        (row_res, col_res)
    }
}

// Convergence target for the column marginals; sweeps continue past the
// configured minimum until the residual drops below this (or the cap hits).
const COL_RESIDUAL_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 5000;

/// Entropically-regularized transport of `exp(logits/epsilon)` onto the
/// `(1/n, 1/c)` marginals by alternating rescaling, computed in the log
/// domain. Runs at least `cfg.iterations` sweeps and keeps sweeping until the
/// column marginals converge; every sweep ends on the row rescale, so row
/// sums are exact.
pub fn sinkhorn_assign(logits: &Matrix, cfg: &SinkhornConfig) -> Result<AssignmentMatrix> {
    assert!(cfg.epsilon > 0.0, "sinkhorn epsilon must be positive");
    assert!(cfg.iterations >= 1, "sinkhorn needs at least one iteration");
    assert!(logits.all_finite(), "sinkhorn logits must be finite");
    let (n, c) = logits.shape();
    assert!(n >= 1 && c >= 1, "sinkhorn needs a non-empty logit matrix");

    // Shared max subtraction keeps exponents in range; it cancels through
    // the potentials so the fixed point is unchanged.
    let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m: Vec<f64> = logits.data().iter().map(|&v| (v - max) / cfg.epsilon).collect();

    let log_row_target = (1.0 / n as f64).ln();
    let log_col_target = (1.0 / c as f64).ln();
    let mut alpha = vec![0.0f64; n];
    let mut beta = vec![0.0f64; c];
    let mut col_scratch = vec![0.0f64; c];

    let mut sweeps = 0;
    loop {
        // beta_j <- log(1/c) - lse_i(m_ij + alpha_i)
        for (j, b) in beta.iter_mut().enumerate() {
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                hi = hi.max(m[i * c + j] + alpha[i]);
            }
            let mut s = 0.0;
            for i in 0..n {
                s += (m[i * c + j] + alpha[i] - hi).exp();
            }
            *b = log_col_target - (hi + s.ln());
        }
        // alpha_i <- log(1/n) - lse_j(m_ij + beta_j)
        for (i, a) in alpha.iter_mut().enumerate() {
            let mut hi = f64::NEG_INFINITY;
            for j in 0..c {
                hi = hi.max(m[i * c + j] + beta[j]);
            }
            let mut s = 0.0;
            for j in 0..c {
                s += (m[i * c + j] + beta[j] - hi).exp();
            }
            *a = log_row_target - (hi + s.ln());
        }
        sweeps += 1;

        if sweeps >= cfg.iterations {
            col_scratch.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                for j in 0..c {
                    col_scratch[j] += (m[i * c + j] + alpha[i] + beta[j]).exp();
                }
            }
            let res = col_scratch
                .iter()
                .map(|&s| (s - 1.0 / c as f64).abs())
                .fold(0.0, f64::max);
            if res <= COL_RESIDUAL_TOL || sweeps >= MAX_SWEEPS {
                break;
            }
        }
    }

    let mut q = Matrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            q.set(i, j, (m[i * c + j] + alpha[i] + beta[j]).exp());
        }
    }
    if !q.all_finite() {
        return Err(Error::SinkhornOverflow);
    }
    Ok(AssignmentMatrix { q })
}

/// Cluster cross-entropy: assignments from one view supervise predictions on
/// the other. `-(1/n) sum_i sum_y n q_iy log softmax(logits)_iy`, which with
/// rows of `q` summing to 1/n collapses to `-sum q .* log_softmax(logits)`.
/// The assignment is a detached target.
pub fn loss_di(tape: &mut Tape, logits: NodeId, q: &AssignmentMatrix) -> NodeId {
    assert_eq!(tape.value(logits).shape(), q.q.shape(), "loss_di shape mismatch");
    let qc = tape.constant(q.q.clone());
    let lsm = tape.row_log_softmax(logits);
    let prod = tape.mul(lsm, qc);
    let total = tape.sum_all(prod);
    tape.scale(total, -1.0)
}

/// Symmetrized swapped prediction between two views: each view's assignment
/// supervises the other view's logits; the two directions are averaged.
pub fn loss_di_swapped(
    tape: &mut Tape,
    logits_a: NodeId,
    logits_b: NodeId,
    q_a: &AssignmentMatrix,
    q_b: &AssignmentMatrix,
) -> NodeId {
    let ab = loss_di(tape, logits_a, q_b);
    let ba = loss_di(tape, logits_b, q_a);
    let sum = tape.add(ab, ba);
    tape.scale(sum, 0.5)
}

/// Negative-free loss (as a minimization objective):
/// `Tr(S)/2 - log|S|/2 + (1/2) sum_i ||h_a_i - h_b_i||^2` where
/// `S = sum_i (z*_i - mean)(z*_i - mean)^T + beta I` is the unnormalized
/// sample covariance of the auxiliary embeddings, kept positive-definite by
/// `beta > 0`. Minimizing drives the covariance spectrum to 1 and the two
/// views together.
pub fn loss_nf(tape: &mut Tape, zstar: NodeId, h_a: NodeId, h_b: NodeId, beta: f64) -> NodeId {
    assert!(beta > 0.0, "beta must be positive");
    let (n, d) = tape.value(zstar).shape();
    assert!(n >= 2, "loss_nf needs at least 2 rows");
    assert_eq!(tape.value(h_a).shape(), tape.value(h_b).shape(), "loss_nf view shape mismatch");
    let mean = tape.mean_rows(zstar);
    let centered = tape.sub(zstar, mean);
    let centered_t = tape.transpose(centered);
    let outer = tape.matmul(centered_t, centered);
    let ridge = tape.constant(Matrix::scaled_identity(d, beta));
    let sigma = tape.add(outer, ridge);
    let tr = tape.trace(sigma);
    let ld = tape.log_det(sigma);
    let dist = tape.sum_sq_diff(h_a, h_b);
    let tr_half = tape.scale(tr, 0.5);
    let ld_half = tape.scale(ld, -0.5);
    let dist_half = tape.scale(dist, 0.5);
    let partial = tape.add(tr_half, ld_half);
    tape.add(partial, dist_half)
}

/// InfoNCE with dot-product similarity over unit embeddings:
/// `-(1/n) sum_i log( exp(z'_i . z_i / tau) / sum_k exp(z'_k . z_i / tau) )`.
///
/// The denominator doubles as an unnormalized marginal density over inputs
/// with energy `E(x) = -log sum_k exp(sim(g(x_k), g(x))/tau)`; that identity
/// is documentation only, the loss here is a reference contrastive objective.
pub fn loss_infonce(tape: &mut Tape, z: NodeId, zp: NodeId, tau: f64) -> NodeId {
    assert!(tau > 0.0, "temperature must be positive");
    let n = tape.value(z).rows();
    assert!(n >= 2, "loss_infonce needs at least 2 rows");
    assert_eq!(tape.value(z).shape(), tape.value(zp).shape(), "loss_infonce shape mismatch");
    for node in [z, zp] {
        let v = tape.value(node);
        for r in 0..v.rows() {
            let norm: f64 = v.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "loss_infonce expects unit rows (row {r})");
        }
    }
    let zp_t = tape.transpose(zp);
    let sim = tape.matmul(z, zp_t); // sim[i][k] = z_i . z'_k
    let scaled = tape.scale(sim, 1.0 / tau);
    let pos = tape.trace(scaled);
    let lse = tape.row_log_sum_exp(scaled);
    let denom = tape.sum_all(lse);
    let diff = tape.sub(pos, denom);
    tape.scale(diff, -1.0 / n as f64)
}

/// Redundancy-reduction loss: `|| CCorr(G, G') .* Lambda - I ||_F^2` where the
/// cross-correlation is taken between per-column standardized views
/// (batch-norm semantics) and `Lambda` keeps the diagonal at 1 while scaling
/// off-diagonal terms by `lambda`.
pub fn loss_barlow(tape: &mut Tape, g: NodeId, gp: NodeId, lambda: f64) -> NodeId {
    let (n, d) = tape.value(g).shape();
    assert!(n >= 2, "loss_barlow needs at least 2 rows");
    assert_eq!(tape.value(gp).shape(), (n, d), "loss_barlow shape mismatch");
    for (name, node) in [("first", g), ("second", gp)] {
        let v = tape.value(node);
        for j in 0..d {
            let mean: f64 = (0..n).map(|r| v.get(r, j)).sum::<f64>() / n as f64;
            let var: f64 = (0..n).map(|r| (v.get(r, j) - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(var > 1e-12, "loss_barlow: zero-variance column {j} in {name} view");
        }
    }
    let ones = tape.constant(Matrix::filled(1, d, 1.0));
    let zeros = tape.constant(Matrix::zeros(1, d));
    let (h, _) = tape.batch_norm_train(g, ones, zeros, 1e-5);
    let (hp, _) = tape.batch_norm_train(gp, ones, zeros, 1e-5);
    let ht = tape.transpose(h);
    let cross = tape.matmul(ht, hp);
    let ccorr = tape.scale(cross, 1.0 / n as f64);
    let mut mask = Matrix::filled(d, d, lambda);
    for i in 0..d {
        mask.set(i, i, 1.0);
    }
    let mask = tape.constant(mask);
    let masked = tape.mul(ccorr, mask);
    let identity = tape.constant(Matrix::scaled_identity(d, 1.0));
    tape.sum_sq_diff(masked, identity)
}

/// Per-term weights of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub gen: f64,
    pub nf: f64,
    pub di_aug: f64,
    pub di_dam: f64,
}

impl LossWeights {
    /// Defaults: generative 1, negative-free 1/batch, cluster loss 1000 on
    /// the augmentation pair and 500 on the manifold pair.
    pub fn for_batch(batch_size: usize) -> Self {
        assert!(batch_size > 0);
        LossWeights { gen: 1.0, nf: 1.0 / batch_size as f64, di_aug: 1000.0, di_dam: 500.0 }
    }

    pub fn assert_non_negative(&self) {
        assert!(
            self.gen >= 0.0 && self.nf >= 0.0 && self.di_aug >= 0.0 && self.di_dam >= 0.0,
            "loss weights must be non-negative"
        );
    }
}

/// Weighted sum of the four minimization losses.
pub fn gedi_total(
    tape: &mut Tape,
    gen: NodeId,
    nf: NodeId,
    di_aug: NodeId,
    di_dam: NodeId,
    weights: &LossWeights,
) -> NodeId {
    weights.assert_non_negative();
    let g = tape.scale(gen, weights.gen);
    let f = tape.scale(nf, weights.nf);
    let a = tape.scale(di_aug, weights.di_aug);
    let d = tape.scale(di_dam, weights.di_dam);
    let ga = tape.add(g, f);
    let ad = tape.add(a, d);
    tape.add(ga, ad)
}
