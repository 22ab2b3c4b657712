//! Reverse-mode automatic differentiation over dense 2-D matrices.
//!
//! A [`Tape`] is a Wengert list: the forward pass appends one node per
//! operation (caching the forward value), and [`Tape::backprop`] replays the
//! list in reverse, accumulating vector-Jacobian products. Leaves are either
//! constants or variables; only variables (parameters, or data inputs whose
//! gradient is explicitly requested) receive gradients, and subgraphs that
//! cannot reach a variable are skipped entirely during the reverse sweep.
//!
//! Shape mismatches and domain violations (non-SPD input to `log_det`, a zero
//! row fed to `row_l2_normalize`) are contract violations and panic with a
//! descriptive message.

use crate::matrix::{cholesky, gemm, spd_inverse_from_cholesky, Matrix};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Batch statistics produced by a train-mode batch-norm forward, for the
/// caller to fold into its running averages.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Matrix,
    /// Biased (1/n) variance, the one used for normalization.
    pub var_biased: Matrix,
    /// Unbiased (1/(n-1)) variance, the one folded into running averages.
    pub var_unbiased: Matrix,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    /// Elementwise add; rhs may be 1xd (broadcast over rows) or nx1
    /// (broadcast over columns).
    Add,
    /// Elementwise multiply, same broadcast rules as `Add`.
    Mul,
    Scale(f64),
    LeakyRelu(f64),
    RowSoftmax,
    RowLogSumExp,
    RowL2Normalize,
    /// Train-mode batch norm over columns; saves the batch statistics it
    /// normalized with. Inputs: x, gamma, beta.
    BatchNormTrain { mean: Matrix, invstd: Matrix },
    /// Eval-mode batch norm: running statistics are op attributes, constants
    /// with respect to differentiation. Inputs: x, gamma, beta.
    BatchNormEval { mean: Matrix, invstd: Matrix },
    MeanRows,
    Trace,
    /// log|X| for symmetric positive-definite X; saves the Cholesky factor.
    LogDet { chol: Matrix },
    SumSqDiff,
    Transpose,
    SelectRows(Vec<usize>),
    SelectCols(Vec<usize>),
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Matrix,
    needs_grad: bool,
}

/// Wengert tape. One tape per forward/backward cycle; build a fresh one for
/// every training step.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that never receives a gradient (data, targets, fixed tensors).
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, vec![], value, false)
    }

    /// Leaf that receives a gradient: a parameter, or a data input whose
    /// gradient is requested (SGLD and DAM differentiate with respect to
    /// inputs).
    pub fn variable(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, vec![], value, true)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated for `id` by the last `backprop` call. `None` if
    /// the node is not a variable or no gradient flowed to it.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Matrix, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, inputs, value, needs_grad });
        id
    }

    fn push_derived(&mut self, op: Op, inputs: Vec<NodeId>, value: Matrix) -> NodeId {
        let needs = inputs.iter().any(|&i| self.nodes[i.0].needs_grad);
        self.push(op, inputs, value, needs)
    }

    // ── Forward operations ──────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(
            va.cols(),
            vb.rows(),
            "matmul shape mismatch: {}x{} * {}x{}",
            va.rows(),
            va.cols(),
            vb.rows(),
            vb.cols()
        );
        let mut out = Matrix::zeros(va.rows(), vb.cols());
        gemm(1.0, va, false, vb, false, 0.0, &mut out);
        self.push_derived(Op::MatMul, vec![a, b], out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = broadcast_zip(self.value(a), self.value(b), "add", |x, y| x + y);
        self.push_derived(Op::Add, vec![a, b], out)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = broadcast_zip(self.value(a), self.value(b), "mul", |x, y| x * y);
        self.push_derived(Op::Mul, vec![a, b], out)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let out = self.value(a).map(|v| k * v);
        self.push_derived(Op::Scale(k), vec![a], out)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let out = self.value(a).map(|v| if v > 0.0 { v } else { slope * v });
        self.push_derived(Op::LeakyRelu(slope), vec![a], out)
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut out = Matrix::zeros(v.rows(), v.cols());
        for r in 0..v.rows() {
            let row = v.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &x) in out.row_mut(r).iter_mut().zip(row) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in out.row_mut(r) {
                *o /= sum;
            }
        }
        self.push_derived(Op::RowSoftmax, vec![a], out)
    }

    /// Per-row log-sum-exp, `n x d -> n x 1`.
    pub fn row_log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut out = Matrix::zeros(v.rows(), 1);
        for r in 0..v.rows() {
            let row = v.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
            out.set(r, 0, max + sum.ln());
        }
        self.push_derived(Op::RowLogSumExp, vec![a], out)
    }

    pub fn row_l2_normalize(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut out = Matrix::zeros(v.rows(), v.cols());
        for r in 0..v.rows() {
            let norm = row_norm(v.row(r));
            assert!(norm > 0.0, "row_l2_normalize: zero row at index {r}");
            for (o, &x) in out.row_mut(r).iter_mut().zip(v.row(r)) {
                *o = x / norm;
            }
        }
        self.push_derived(Op::RowL2Normalize, vec![a], out)
    }

    /// Train-mode batch norm over columns with affine parameters. Returns the
    /// output node and the batch statistics (so the caller can update running
    /// averages). Requires at least 2 rows.
    pub fn batch_norm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> (NodeId, BatchStats) {
        let v = self.value(x);
        let (n, d) = v.shape();
        assert!(n >= 2, "batch_norm_train needs a batch of at least 2 rows, got {n}");
        self.check_affine_shapes(gamma, beta, d);
        let mut mean = Matrix::zeros(1, d);
        for r in 0..n {
            for c in 0..d {
                mean.data_mut()[c] += v.get(r, c);
            }
        }
        for c in 0..d {
            mean.data_mut()[c] /= n as f64;
        }
        let mut var = Matrix::zeros(1, d);
        for r in 0..n {
            for c in 0..d {
                let diff = v.get(r, c) - mean.data()[c];
                var.data_mut()[c] += diff * diff;
            }
        }
        let var_unbiased = var.map(|s| s / (n as f64 - 1.0));
        let var_biased = var.map(|s| s / n as f64);
        let invstd = var_biased.map(|s| 1.0 / (s + eps).sqrt());
        let out = bn_forward(v, self.value(gamma), self.value(beta), &mean, &invstd);
        let stats = BatchStats { mean: mean.clone(), var_biased, var_unbiased };
        let id = self.push_derived(
            Op::BatchNormTrain { mean, invstd },
            vec![x, gamma, beta],
            out,
        );
        (id, stats)
    }

    /// Eval-mode batch norm: normalizes with the provided running statistics,
    /// which are constants with respect to differentiation.
    pub fn batch_norm_eval(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &Matrix,
        running_var: &Matrix,
        eps: f64,
    ) -> NodeId {
        let v = self.value(x);
        let d = v.cols();
        self.check_affine_shapes(gamma, beta, d);
        assert_eq!(running_mean.shape(), (1, d), "batch_norm_eval running mean shape");
        assert_eq!(running_var.shape(), (1, d), "batch_norm_eval running var shape");
        let invstd = running_var.map(|s| 1.0 / (s + eps).sqrt());
        let out = bn_forward(v, self.value(gamma), self.value(beta), running_mean, &invstd);
        self.push_derived(
            Op::BatchNormEval { mean: running_mean.clone(), invstd },
            vec![x, gamma, beta],
            out,
        )
    }

    fn check_affine_shapes(&self, gamma: NodeId, beta: NodeId, d: usize) {
        assert_eq!(self.value(gamma).shape(), (1, d), "batch norm gamma shape");
        assert_eq!(self.value(beta).shape(), (1, d), "batch norm beta shape");
    }

    /// Column means: `n x d -> 1 x d`.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let (n, d) = v.shape();
        assert!(n > 0, "mean_rows of an empty matrix");
        let mut out = Matrix::zeros(1, d);
        for r in 0..n {
            for c in 0..d {
                out.data_mut()[c] += v.get(r, c);
            }
        }
        for c in 0..d {
            out.data_mut()[c] /= n as f64;
        }
        self.push_derived(Op::MeanRows, vec![a], out)
    }

    pub fn trace(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rows(), v.cols(), "trace needs a square matrix");
        let t: f64 = (0..v.rows()).map(|i| v.get(i, i)).sum();
        self.push_derived(Op::Trace, vec![a], Matrix::scalar(t))
    }

    /// log-determinant of a symmetric positive-definite matrix via Cholesky.
    /// Panics on a non-SPD input, reporting the offending leading minor.
    pub fn log_det(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rows(), v.cols(), "log_det needs a square matrix");
        let sym_err = v.max_abs_diff(&v.transposed());
        assert!(
            sym_err < 1e-8,
            "log_det needs a symmetric matrix (asymmetry {sym_err:.3e})"
        );
        let chol = match cholesky(v) {
            Ok(l) => l,
            Err(minor) => panic!(
                "log_det: matrix is not positive-definite (leading minor {minor} failed)"
            ),
        };
        let val: f64 = (0..chol.rows()).map(|i| 2.0 * chol.get(i, i).ln()).sum();
        self.push_derived(Op::LogDet { chol }, vec![a], Matrix::scalar(val))
    }

    /// Scalar sum of squared elementwise differences.
    pub fn sum_sq_diff(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.shape(), vb.shape(), "sum_sq_diff shape mismatch");
        let s: f64 = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push_derived(Op::SumSqDiff, vec![a, b], Matrix::scalar(s))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).transposed();
        self.push_derived(Op::Transpose, vec![a], out)
    }

    pub fn select_rows(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        let v = self.value(a);
        let mut out = Matrix::zeros(indices.len(), v.cols());
        for (k, &r) in indices.iter().enumerate() {
            assert!(r < v.rows(), "select_rows: index {r} out of {} rows", v.rows());
            out.row_mut(k).copy_from_slice(v.row(r));
        }
        self.push_derived(Op::SelectRows(indices.to_vec()), vec![a], out)
    }

    pub fn select_cols(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        let v = self.value(a);
        let mut out = Matrix::zeros(v.rows(), indices.len());
        for r in 0..v.rows() {
            for (k, &c) in indices.iter().enumerate() {
                assert!(c < v.cols(), "select_cols: index {c} out of {} cols", v.cols());
                out.set(r, k, v.get(r, c));
            }
        }
        self.push_derived(Op::SelectCols(indices.to_vec()), vec![a], out)
    }

    // ── Composite helpers (compositions of the primitives above) ───────

    /// Sum of all entries as a 1x1 node, via ones-vector contractions.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let (n, d) = self.value(a).shape();
        if (n, d) == (1, 1) {
            return a;
        }
        let ones_row = self.constant(Matrix::filled(1, n, 1.0));
        let col_sums = self.matmul(ones_row, a); // 1 x d
        if d == 1 {
            return col_sums;
        }
        let ones_col = self.constant(Matrix::filled(d, 1, 1.0));
        self.matmul(col_sums, ones_col)
    }

    /// Mean of all entries as a 1x1 node.
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let (n, d) = self.value(a).shape();
        let s = self.sum_all(a);
        self.scale(s, 1.0 / (n as f64 * d as f64))
    }

    /// `a - b` with the same broadcast rules as `add`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// Per-row log-softmax: `x - lse(x)` broadcast over columns.
    pub fn row_log_softmax(&mut self, a: NodeId) -> NodeId {
        let lse = self.row_log_sum_exp(a);
        self.sub(a, lse)
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root. Gradients of all variables reached
    /// by the sweep are then available through [`Tape::grad`].
    pub fn backprop(&mut self, root: NodeId) {
        assert!(
            self.value(root).is_scalar(),
            "backprop root must be 1x1, got {}x{}",
            self.value(root).rows(),
            self.value(root).cols()
        );
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::scalar(1.0));

        for idx in (0..self.nodes.len()).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g_out) = grads[idx].take() else { continue };
            self.backward_node(idx, &g_out, &mut grads);
            // Leaves keep their accumulated gradient for readout.
            if matches!(self.nodes[idx].op, Op::Leaf) {
                grads[idx] = Some(g_out);
            }
        }
        self.grads = grads;
    }

    fn backward_node(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let needs = |i: usize| self.nodes[node.inputs[i].0].needs_grad;
        let val = |i: usize| &self.nodes[node.inputs[i].0].value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul => {
                // c = a·b  =>  da = g·bᵀ, db = aᵀ·g
                if needs(0) {
                    let a_shape = val(0).shape();
                    let da = grads[node.inputs[0].0]
                        .get_or_insert_with(|| Matrix::zeros(a_shape.0, a_shape.1));
                    gemm(1.0, g, false, val(1), true, 1.0, da);
                }
                if needs(1) {
                    let b_shape = val(1).shape();
                    let db = grads[node.inputs[1].0]
                        .get_or_insert_with(|| Matrix::zeros(b_shape.0, b_shape.1));
                    gemm(1.0, val(0), true, g, false, 1.0, db);
                }
            }
            Op::Add => {
                if needs(0) {
                    accumulate(grads, node.inputs[0], g.clone());
                }
                if needs(1) {
                    accumulate(grads, node.inputs[1], reduce_to_shape(g, val(1).shape()));
                }
            }
            Op::Mul => {
                if needs(0) {
                    let mut da = g.clone();
                    apply_broadcast_mul(&mut da, val(1));
                    accumulate(grads, node.inputs[0], da);
                }
                if needs(1) {
                    let mut prod = g.clone();
                    for (p, &x) in prod.data_mut().iter_mut().zip(val(0).data()) {
                        *p *= x;
                    }
                    accumulate(grads, node.inputs[1], reduce_to_shape(&prod, val(1).shape()));
                }
            }
            Op::Scale(k) => {
                if needs(0) {
                    accumulate(grads, node.inputs[0], g.map(|v| k * v));
                }
            }
            Op::LeakyRelu(slope) => {
                if needs(0) {
                    let x = val(0);
                    let mut dx = g.clone();
                    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                        if v <= 0.0 {
                            *d *= slope;
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::RowSoftmax => {
                if needs(0) {
                    let s = &node.value;
                    let mut dx = Matrix::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let dot: f64 =
                            g.row(r).iter().zip(s.row(r)).map(|(a, b)| a * b).sum();
                        for ((d, &gv), &sv) in
                            dx.row_mut(r).iter_mut().zip(g.row(r)).zip(s.row(r))
                        {
                            *d = sv * (gv - dot);
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::RowLogSumExp => {
                if needs(0) {
                    let x = val(0);
                    let lse = &node.value;
                    let mut dx = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let gr = g.get(r, 0);
                        let l = lse.get(r, 0);
                        for (d, &xv) in dx.row_mut(r).iter_mut().zip(x.row(r)) {
                            *d = gr * (xv - l).exp();
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::RowL2Normalize => {
                if needs(0) {
                    let x = val(0);
                    let y = &node.value;
                    let mut dx = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let norm = row_norm(x.row(r));
                        let dot: f64 =
                            g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for ((d, &gv), &yv) in
                            dx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r))
                        {
                            *d = (gv - yv * dot) / norm;
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::BatchNormTrain { mean, invstd } => {
                self.backward_batch_norm(node, g, grads, mean, invstd, true);
            }
            Op::BatchNormEval { mean, invstd } => {
                self.backward_batch_norm(node, g, grads, mean, invstd, false);
            }
            Op::MeanRows => {
                if needs(0) {
                    let (n, d) = val(0).shape();
                    let mut dx = Matrix::zeros(n, d);
                    for r in 0..n {
                        for c in 0..d {
                            dx.set(r, c, g.get(0, c) / n as f64);
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::Trace => {
                if needs(0) {
                    let n = val(0).rows();
                    let mut dx = Matrix::zeros(n, n);
                    let gs = g.scalar_value();
                    for i in 0..n {
                        dx.set(i, i, gs);
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::LogDet { chol } => {
                if needs(0) {
                    // d log|X| / dX = X⁻¹ for symmetric X.
                    let inv = spd_inverse_from_cholesky(chol);
                    accumulate(grads, node.inputs[0], inv.map(|v| v * g.scalar_value()));
                }
            }
            Op::SumSqDiff => {
                let gs = g.scalar_value();
                let a = val(0);
                let b = val(1);
                if needs(0) {
                    let mut da = Matrix::zeros(a.rows(), a.cols());
                    for ((d, &x), &y) in da.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
                        *d = 2.0 * gs * (x - y);
                    }
                    accumulate(grads, node.inputs[0], da);
                }
                if needs(1) {
                    let mut db = Matrix::zeros(b.rows(), b.cols());
                    for ((d, &x), &y) in db.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
                        *d = -2.0 * gs * (x - y);
                    }
                    accumulate(grads, node.inputs[1], db);
                }
            }
            Op::Transpose => {
                if needs(0) {
                    accumulate(grads, node.inputs[0], g.transposed());
                }
            }
            Op::SelectRows(indices) => {
                if needs(0) {
                    let (n, d) = val(0).shape();
                    let mut dx = Matrix::zeros(n, d);
                    for (k, &r) in indices.iter().enumerate() {
                        for c in 0..d {
                            dx.set(r, c, dx.get(r, c) + g.get(k, c));
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
            Op::SelectCols(indices) => {
                if needs(0) {
                    let (n, d) = val(0).shape();
                    let mut dx = Matrix::zeros(n, d);
                    for r in 0..n {
                        for (k, &c) in indices.iter().enumerate() {
                            dx.set(r, c, dx.get(r, c) + g.get(r, k));
                        }
                    }
                    accumulate(grads, node.inputs[0], dx);
                }
            }
        }
    }

    fn backward_batch_norm(
        &self,
        node: &Node,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
        mean: &Matrix,
        invstd: &Matrix,
        train: bool,
    ) {
        let x = &self.nodes[node.inputs[0].0].value;
        let gamma = &self.nodes[node.inputs[1].0].value;
        let (n, d) = x.shape();
        let nf = n as f64;

        // xhat is re-derived from the saved statistics.
        let xhat = {
            let mut m = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    m.set(r, c, (x.get(r, c) - mean.data()[c]) * invstd.data()[c]);
                }
            }
            m
        };

        if self.nodes[node.inputs[2].0].needs_grad {
            let mut dbeta = Matrix::zeros(1, d);
            for r in 0..n {
                for c in 0..d {
                    dbeta.data_mut()[c] += g.get(r, c);
                }
            }
            accumulate(grads, node.inputs[2], dbeta);
        }
        if self.nodes[node.inputs[1].0].needs_grad {
            let mut dgamma = Matrix::zeros(1, d);
            for r in 0..n {
                for c in 0..d {
                    dgamma.data_mut()[c] += g.get(r, c) * xhat.get(r, c);
                }
            }
            accumulate(grads, node.inputs[1], dgamma);
        }
        if self.nodes[node.inputs[0].0].needs_grad {
            let mut dx = Matrix::zeros(n, d);
            if train {
                // Batch statistics depend on x, so the per-column means of the
                // upstream gradient fold back in.
                for c in 0..d {
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xhat = 0.0;
                    for r in 0..n {
                        let dy = g.get(r, c) * gamma.data()[c];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat.get(r, c);
                    }
                    for r in 0..n {
                        let dy = g.get(r, c) * gamma.data()[c];
                        let v = invstd.data()[c]
                            * (dy - sum_dy / nf - xhat.get(r, c) * sum_dy_xhat / nf);
                        dx.set(r, c, v);
                    }
                }
            } else {
                for r in 0..n {
                    for c in 0..d {
                        dx.set(r, c, g.get(r, c) * gamma.data()[c] * invstd.data()[c]);
                    }
                }
            }
            accumulate(grads, node.inputs[0], dx);
        }
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn bn_forward(x: &Matrix, gamma: &Matrix, beta: &Matrix, mean: &Matrix, invstd: &Matrix) -> Matrix {
    let (n, d) = x.shape();
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            let xhat = (x.get(r, c) - mean.data()[c]) * invstd.data()[c];
            out.set(r, c, gamma.data()[c] * xhat + beta.data()[c]);
        }
    }
    out
}

/// Apply `f` elementwise with the rhs broadcast rules: same shape, one row
/// (broadcast over rows), or one column (broadcast over columns).
fn broadcast_zip(a: &Matrix, b: &Matrix, what: &str, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let (n, d) = a.shape();
    let mut out = Matrix::zeros(n, d);
    if b.shape() == (n, d) {
        for ((o, &x), &y) in out.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
            *o = f(x, y);
        }
    } else if b.shape() == (1, d) {
        for r in 0..n {
            for c in 0..d {
                out.set(r, c, f(a.get(r, c), b.data()[c]));
            }
        }
    } else if b.shape() == (n, 1) {
        for r in 0..n {
            for c in 0..d {
                out.set(r, c, f(a.get(r, c), b.get(r, 0)));
            }
        }
    } else {
        panic!(
            "{what} shape mismatch: {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        );
    }
    out
}

/// In-place `g *= bc(b)` following the rhs broadcast rules.
fn apply_broadcast_mul(g: &mut Matrix, b: &Matrix) {
    let (n, d) = g.shape();
    if b.shape() == (n, d) {
        for (x, &y) in g.data_mut().iter_mut().zip(b.data()) {
            *x *= y;
        }
    } else if b.shape() == (1, d) {
        for r in 0..n {
            for c in 0..d {
                g.set(r, c, g.get(r, c) * b.data()[c]);
            }
        }
    } else {
        for r in 0..n {
            for c in 0..d {
                g.set(r, c, g.get(r, c) * b.get(r, 0));
            }
        }
    }
}

/// Reduce a full-shape gradient down to a broadcast operand's shape by
/// summation.
fn reduce_to_shape(g: &Matrix, shape: (usize, usize)) -> Matrix {
    let (n, d) = g.shape();
    if shape == (n, d) {
        return g.clone();
    }
    if shape == (1, d) {
        let mut out = Matrix::zeros(1, d);
        for r in 0..n {
            for c in 0..d {
                out.data_mut()[c] += g.get(r, c);
            }
        }
        return out;
    }
    if shape == (n, 1) {
        let mut out = Matrix::zeros(n, 1);
        for r in 0..n {
            let s: f64 = g.row(r).iter().sum();
            out.set(r, 0, s);
        }
        return out;
    }
    panic!("cannot reduce {n}x{d} gradient to {}x{}", shape.0, shape.1);
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_scaled(&g, 1.0),
        slot @ None => *slot = Some(g),
    }
}
