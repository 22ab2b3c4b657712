//! Central finite-difference gradient checking.
//!
//! The checker treats the graph under test as a black-box scalar function of
//! its leaf matrices: it perturbs one entry at a time and compares the
//! two-sided difference quotient against the gradient that `backprop`
//! reports. Used throughout the test suites; exposed as a normal module so
//! integration tests and downstream users can reuse it.

use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Default relative-error tolerance at 64-bit precision.
pub const FD_TOL: f64 = 1e-4;

/// Worst mismatch found by [`check_gradients`].
#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub leaf: usize,
    pub entry: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Compare backprop gradients against central finite differences.
///
/// `build` must construct the graph from the given leaf values, with every
/// leaf registered as a variable, and return `(tape, leaf ids, root)`. It is
/// invoked `2 * total entries + 1` times, so keep instances small.
///
/// Relative error uses `|a - n| / max(1, |a|, |n|)`, which degrades to an
/// absolute comparison near zero.
pub fn check_gradients(
    leaves: &[Matrix],
    step: f64,
    tol: f64,
    build: impl Fn(&[Matrix]) -> (Tape, Vec<NodeId>, NodeId),
) -> Result<(), GradMismatch> {
    let (mut tape, ids, root) = build(leaves);
    tape.backprop(root);
    let analytic: Vec<Matrix> = ids
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            tape.grad(id)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(leaves[k].rows(), leaves[k].cols()))
        })
        .collect();

    let eval = |ls: &[Matrix]| -> f64 {
        let (t, _, r) = build(ls);
        t.value(r).scalar_value()
    };

    for (k, leaf) in leaves.iter().enumerate() {
        for e in 0..leaf.data().len() {
            let mut plus = leaves.to_vec();
            plus[k].data_mut()[e] += step;
            let mut minus = leaves.to_vec();
            minus[k].data_mut()[e] -= step;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * step);
            let a = analytic[k].data()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            if rel > tol {
                return Err(GradMismatch { leaf: k, entry: e, analytic: a, numeric, rel_error: rel });
            }
        }
    }
    Ok(())
}

/// `check_gradients` with the default step and tolerance; panics on mismatch.
pub fn assert_gradients(
    leaves: &[Matrix],
    build: impl Fn(&[Matrix]) -> (Tape, Vec<NodeId>, NodeId),
) {
    if let Err(m) = check_gradients(leaves, FD_STEP, FD_TOL, build) {
        panic!(
            "gradient check failed: leaf {} entry {}: analytic {:.9e} vs finite-difference {:.9e} (rel {:.3e})",
            m.leaf, m.entry, m.analytic, m.numeric, m.rel_error
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catches_a_wrong_gradient() {
        // y = 2x built with a deliberately inconsistent forward (3x) must fail.
        let leaves = vec![Matrix::scalar(1.5)];
        let res = check_gradients(&leaves, FD_STEP, FD_TOL, |ls| {
            let mut t = Tape::new();
            let x = t.variable(ls[0].clone());
            let y = t.scale(x, 2.0);
            // Perturbed evaluations see a different function than backprop.
            let fudge = if (ls[0].scalar_value() - 1.5).abs() > 1e-12 {
                t.scale(y, 1.5)
            } else {
                y
            };
            (t, vec![x], fudge)
        });
        assert!(res.is_err());
    }

    #[test]
    fn passes_on_a_simple_chain() {
        let leaves = vec![Matrix::from_rows(&[vec![0.7, -0.3], vec![1.2, 0.4]])];
        assert_gradients(&leaves, |ls| {
            let mut t = Tape::new();
            let x = t.variable(ls[0].clone());
            let a = t.leaky_relu(x, 0.2);
            let s = t.row_softmax(a);
            let zero = t.constant(Matrix::zeros(2, 2));
            let root = t.sum_sq_diff(s, zero);
            (t, vec![x], root)
        });
    }
}
