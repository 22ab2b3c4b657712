//! The network: encoder MLP (2-100-100-2, LeakyReLU), projection head
//! `proj` (2-4-2, batch norm on every layer, final L2 row normalization), the
//! auxiliary head `proj_star` (same architecture, no normalization), the
//! prototype matrix, and the energy head.
//!
//! Parameters live in plain matrices. For a differentiable pass the model is
//! *bound* onto a fresh tape ([`GediModel::bind`]), which clones the selected
//! parameters in as variables and the rest as constants; forward helpers then
//! operate on the bound node ids. The convenience methods (`encode`,
//! `embed_eval`, `predict_labels`, ...) build a throwaway tape internally so
//! the plain and differentiable paths share one forward definition.

use rand::Rng as _;
use rand_distr::Normal;

use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tape::{BatchStats, NodeId, Tape};

pub const ENC_HIDDEN: usize = 100;
pub const PROJ_HIDDEN: usize = 4;
/// Latent width h: encoder output, embedding, and prototype rows.
pub const LATENT: usize = 2;
pub const LEAKY_SLOPE: f64 = 0.2;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Which parameters a bound tape treats as variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    /// Everything constant (sampling, augmentation walks, evaluation).
    None,
    /// The energy path only: the encoder driving the density plus its head.
    Generative,
    /// Every parameter.
    All,
}

/// Model flavor fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Shared encoder, vector energy head.
    Standard,
    /// Scalar output head on the encoder instead of the vector head.
    ScalarHead,
    /// A second, independent encoder drives the density; the primary encoder
    /// feeds the heads. Gradients never cross between them.
    TwoEncoders,
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Matrix,
    pub running_var: Matrix,
}

impl BatchNorm {
    fn new(d: usize) -> Self {
        BatchNorm {
            gamma: Matrix::filled(1, d, 1.0),
            beta: Matrix::zeros(1, d),
            running_mean: Matrix::zeros(1, d),
            running_var: Matrix::filled(1, d, 1.0),
        }
    }

    fn update_running(&mut self, stats: &BatchStats) {
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(stats.mean.data()) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(stats.var_unbiased.data()) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
}

#[derive(Debug, Clone)]
pub struct ProjHead {
    pub l1: Linear,
    pub bn1: BatchNorm,
    pub l2: Linear,
    pub bn2: BatchNorm,
    /// Final L2 row normalization (`proj` yes, `proj_star` no).
    pub normalize: bool,
}

#[derive(Debug, Clone)]
pub enum EnergyHead {
    /// s(x) = u . enc(x)
    VectorU(Matrix),
    /// s(x) = w . enc(x) + b, a one-neuron output layer.
    Scalar(Linear),
}

#[derive(Debug, Clone)]
pub struct GediModel {
    pub enc: Encoder,
    /// Present only for [`ModelKind::TwoEncoders`].
    pub enc_gen: Option<Encoder>,
    pub proj: ProjHead,
    pub proj_star: ProjHead,
    /// h x c prototype matrix; columns are cluster centers.
    pub prototypes: Matrix,
    pub head: EnergyHead,
    pub tau: f64,
}

fn kaiming_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    // Fan-in Kaiming with the LeakyReLU(0.2) gain; bound = gain * sqrt(3/fan_in).
    let gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
    let bound = gain * (3.0 / rows as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    m
}

fn linear_init(input: usize, output: usize, rng: &mut Rng) -> Linear {
    Linear { w: kaiming_uniform(input, output, rng), b: Matrix::zeros(1, output) }
}

fn proj_head_init(normalize: bool, rng: &mut Rng) -> ProjHead {
    ProjHead {
        l1: linear_init(LATENT, PROJ_HIDDEN, rng),
        bn1: BatchNorm::new(PROJ_HIDDEN),
        l2: linear_init(PROJ_HIDDEN, LATENT, rng),
        bn2: BatchNorm::new(LATENT),
        normalize,
    }
}

fn encoder_init(rng: &mut Rng) -> Encoder {
    Encoder {
        l1: linear_init(2, ENC_HIDDEN, rng),
        l2: linear_init(ENC_HIDDEN, ENC_HIDDEN, rng),
        l3: linear_init(ENC_HIDDEN, LATENT, rng),
    }
}

impl GediModel {
    /// Deterministic initialization given the RNG: Kaiming-uniform weights,
    /// zero biases, prototypes from N(0, 0.01), zero energy head.
    pub fn new(kind: ModelKind, c: usize, tau: f64, rng: &mut Rng) -> Self {
        assert!(c >= 1, "need at least one prototype");
        assert!(tau > 0.0, "temperature must be positive");
        let enc = encoder_init(rng);
        let proj = proj_head_init(true, rng);
        let proj_star = proj_head_init(false, rng);
        let proto_dist = Normal::new(0.0, 0.1).unwrap();
        let mut prototypes = Matrix::zeros(LATENT, c);
        for v in prototypes.data_mut() {
            *v = rng.sample(proto_dist);
        }
        let head = match kind {
            ModelKind::ScalarHead => {
                EnergyHead::Scalar(Linear { w: Matrix::zeros(LATENT, 1), b: Matrix::zeros(1, 1) })
            }
            _ => EnergyHead::VectorU(Matrix::zeros(LATENT, 1)),
        };
        let enc_gen = match kind {
            ModelKind::TwoEncoders => Some(encoder_init(rng)),
            _ => None,
        };
        GediModel { enc, enc_gen, proj, proj_star, prototypes, head, tau }
    }

    pub fn cluster_count(&self) -> usize {
        self.prototypes.cols()
    }

    /// The encoder the density is computed from.
    pub fn energy_encoder(&self) -> &Encoder {
        self.enc_gen.as_ref().unwrap_or(&self.enc)
    }

    // ── Binding onto a tape ─────────────────────────────────────────────

    pub fn bind(&self, tape: &mut Tape, trainable: Trainable) -> BoundModel {
        let gen_train = matches!(trainable, Trainable::Generative | Trainable::All);
        let all_train = matches!(trainable, Trainable::All);
        // With two encoders the generative set is enc_gen + head, not enc.
        let enc_is_generative = self.enc_gen.is_none();
        let enc = bind_encoder(tape, &self.enc, if enc_is_generative { gen_train } else { all_train });
        let enc_gen = self.enc_gen.as_ref().map(|e| bind_encoder(tape, e, gen_train));
        let proj = bind_proj(tape, &self.proj, all_train);
        let proj_star = bind_proj(tape, &self.proj_star, all_train);
        let prototypes = bind_leaf(tape, &self.prototypes, all_train);
        let head = match &self.head {
            EnergyHead::VectorU(u) => BoundEnergyHead::VectorU(bind_leaf(tape, u, gen_train)),
            EnergyHead::Scalar(l) => BoundEnergyHead::Scalar(BoundLinear {
                w: bind_leaf(tape, &l.w, gen_train),
                b: bind_leaf(tape, &l.b, gen_train),
            }),
        };
        BoundModel { enc, enc_gen, proj, proj_star, prototypes, head }
    }

    // ── Plain-matrix convenience API (throwaway internal tape) ──────────

    /// Encoder forward; the encoder has no batch norm, so there is no mode.
    pub fn encode(&self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, &bound.enc, xid);
        tape.value(h).clone()
    }

    /// `proj(enc(x))` with unit rows, eval-mode batch norm.
    pub fn embed_eval(&self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, &bound.enc, xid);
        let z = proj_forward_eval(&mut tape, &bound.proj, &self.proj, h);
        tape.value(z).clone()
    }

    /// Train-mode embedding: normalizes with batch statistics and updates the
    /// running averages. Needs a batch of at least 2 rows.
    pub fn embed_train(&mut self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, &bound.enc, xid);
        let z = proj_forward_train(&mut tape, &bound.proj, &mut self.proj, h);
        tape.value(z).clone()
    }

    /// `proj_star(enc(x))`, eval mode; rows are not normalized.
    pub fn embed_star_eval(&self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, &bound.enc, xid);
        let z = proj_forward_eval(&mut tape, &bound.proj_star, &self.proj_star, h);
        tape.value(z).clone()
    }

    pub fn embed_star_train(&mut self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, &bound.enc, xid);
        let z = proj_forward_train(&mut tape, &bound.proj_star, &mut self.proj_star, h);
        tape.value(z).clone()
    }

    /// `s_i = head(enc(x_i))`: the log of the unnormalized density. The
    /// energy is its negation.
    pub fn log_unnormalized_density(&self, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::None);
        let xid = tape.constant(x.clone());
        let h = encoder_forward(&mut tape, bound.density_encoder(), xid);
        let s = density_forward(&mut tape, &bound, h);
        tape.value(s).clone()
    }

    /// Prototype logits `L[i][y] = (U_col_y . z_i) / tau` for unit-row `z`.
    pub fn cluster_logits(&self, z: &Matrix) -> Matrix {
        let mut logits = z.matmul(&self.prototypes);
        for v in logits.data_mut() {
            *v /= self.tau;
        }
        logits
    }

    /// Arg-max cluster per point from the eval-mode embedding, ties broken
    /// toward the lowest index.
    pub fn predict_labels(&self, x: &Matrix) -> Vec<usize> {
        let z = self.embed_eval(x);
        let logits = self.cluster_logits(&z);
        argmax_rows(&logits)
    }

    // ── Parameter enumeration ───────────────────────────────────────────

    /// Trainable parameters for a given set, in the same order that
    /// [`GediModel::bind`] registers them. Names match checkpoint entries.
    pub fn trainable_params_mut(&mut self, set: Trainable) -> Vec<(&'static str, &mut Matrix)> {
        let mut out: Vec<(&'static str, &mut Matrix)> = Vec::new();
        let gen_set = matches!(set, Trainable::Generative | Trainable::All);
        let all_set = matches!(set, Trainable::All);
        let enc_in_set = if self.enc_gen.is_none() { gen_set } else { all_set };
        if enc_in_set {
            push_encoder(&mut out, "enc", &mut self.enc);
        }
        if let (Some(e), true) = (self.enc_gen.as_mut(), gen_set) {
            push_encoder(&mut out, "enc_gen", e);
        }
        if all_set {
            push_proj(&mut out, "proj", &mut self.proj);
            push_proj(&mut out, "proj_star", &mut self.proj_star);
            out.push(("prototypes", &mut self.prototypes));
        }
        if gen_set {
            match &mut self.head {
                EnergyHead::VectorU(u) => out.push(("energy_u", u)),
                EnergyHead::Scalar(l) => {
                    out.push(("jem.w", &mut l.w));
                    out.push(("jem.b", &mut l.b));
                }
            }
        }
        out
    }
}

fn push_encoder<'a>(out: &mut Vec<(&'static str, &'a mut Matrix)>, name: &'static str, e: &'a mut Encoder) {
    let names: [&'static str; 6] = match name {
        "enc" => ["enc.w1", "enc.b1", "enc.w2", "enc.b2", "enc.w3", "enc.b3"],
        _ => ["enc_gen.w1", "enc_gen.b1", "enc_gen.w2", "enc_gen.b2", "enc_gen.w3", "enc_gen.b3"],
    };
    out.push((names[0], &mut e.l1.w));
    out.push((names[1], &mut e.l1.b));
    out.push((names[2], &mut e.l2.w));
    out.push((names[3], &mut e.l2.b));
    out.push((names[4], &mut e.l3.w));
    out.push((names[5], &mut e.l3.b));
}

fn push_proj<'a>(out: &mut Vec<(&'static str, &'a mut Matrix)>, name: &'static str, p: &'a mut ProjHead) {
    let names: [&'static str; 8] = match name {
        "proj" => [
            "proj.w1",
            "proj.b1",
            "proj.bn1.gamma",
            "proj.bn1.beta",
            "proj.w2",
            "proj.b2",
            "proj.bn2.gamma",
            "proj.bn2.beta",
        ],
        _ => [
            "proj_star.w1",
            "proj_star.b1",
            "proj_star.bn1.gamma",
            "proj_star.bn1.beta",
            "proj_star.w2",
            "proj_star.b2",
            "proj_star.bn2.gamma",
            "proj_star.bn2.beta",
        ],
    };
    out.push((names[0], &mut p.l1.w));
    out.push((names[1], &mut p.l1.b));
    out.push((names[2], &mut p.bn1.gamma));
    out.push((names[3], &mut p.bn1.beta));
    out.push((names[4], &mut p.l2.w));
    out.push((names[5], &mut p.l2.b));
    out.push((names[6], &mut p.bn2.gamma));
    out.push((names[7], &mut p.bn2.beta));
}

// ── Bound (on-tape) mirror of the model ─────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub w: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundBn {
    pub gamma: NodeId,
    pub beta: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundEncoder {
    pub l1: BoundLinear,
    pub l2: BoundLinear,
    pub l3: BoundLinear,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundProj {
    pub l1: BoundLinear,
    pub bn1: BoundBn,
    pub l2: BoundLinear,
    pub bn2: BoundBn,
}

#[derive(Debug, Clone, Copy)]
pub enum BoundEnergyHead {
    VectorU(NodeId),
    Scalar(BoundLinear),
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub enc: BoundEncoder,
    pub enc_gen: Option<BoundEncoder>,
    pub proj: BoundProj,
    pub proj_star: BoundProj,
    pub prototypes: NodeId,
    pub head: BoundEnergyHead,
}

impl BoundModel {
    /// The bound encoder the density path runs through.
    pub fn density_encoder(&self) -> &BoundEncoder {
        self.enc_gen.as_ref().unwrap_or(&self.enc)
    }

    /// Trainable leaf ids in the bind order matching
    /// [`GediModel::trainable_params_mut`].
    pub fn trainable_ids(&self, model: &GediModel, set: Trainable) -> Vec<NodeId> {
        let mut out = Vec::new();
        let gen_set = matches!(set, Trainable::Generative | Trainable::All);
        let all_set = matches!(set, Trainable::All);
        let enc_in_set = if model.enc_gen.is_none() { gen_set } else { all_set };
        let push_enc = |out: &mut Vec<NodeId>, e: &BoundEncoder| {
            out.extend([e.l1.w, e.l1.b, e.l2.w, e.l2.b, e.l3.w, e.l3.b]);
        };
        let push_proj = |out: &mut Vec<NodeId>, p: &BoundProj| {
            out.extend([
                p.l1.w, p.l1.b, p.bn1.gamma, p.bn1.beta, p.l2.w, p.l2.b, p.bn2.gamma, p.bn2.beta,
            ]);
        };
        if enc_in_set {
            push_enc(&mut out, &self.enc);
        }
        if let (Some(e), true) = (self.enc_gen.as_ref(), gen_set) {
            push_enc(&mut out, e);
        }
        if all_set {
            push_proj(&mut out, &self.proj);
            push_proj(&mut out, &self.proj_star);
            out.push(self.prototypes);
        }
        if gen_set {
            match &self.head {
                BoundEnergyHead::VectorU(u) => out.push(*u),
                BoundEnergyHead::Scalar(l) => out.extend([l.w, l.b]),
            }
        }
        out
    }
}

fn bind_leaf(tape: &mut Tape, m: &Matrix, trainable: bool) -> NodeId {
    if trainable {
        tape.variable(m.clone())
    } else {
        tape.constant(m.clone())
    }
}

fn bind_linear(tape: &mut Tape, l: &Linear, trainable: bool) -> BoundLinear {
    BoundLinear { w: bind_leaf(tape, &l.w, trainable), b: bind_leaf(tape, &l.b, trainable) }
}

fn bind_encoder(tape: &mut Tape, e: &Encoder, trainable: bool) -> BoundEncoder {
    BoundEncoder {
        l1: bind_linear(tape, &e.l1, trainable),
        l2: bind_linear(tape, &e.l2, trainable),
        l3: bind_linear(tape, &e.l3, trainable),
    }
}

fn bind_proj(tape: &mut Tape, p: &ProjHead, trainable: bool) -> BoundProj {
    BoundProj {
        l1: bind_linear(tape, &p.l1, trainable),
        bn1: BoundBn {
            gamma: bind_leaf(tape, &p.bn1.gamma, trainable),
            beta: bind_leaf(tape, &p.bn1.beta, trainable),
        },
        l2: bind_linear(tape, &p.l2, trainable),
        bn2: BoundBn {
            gamma: bind_leaf(tape, &p.bn2.gamma, trainable),
            beta: bind_leaf(tape, &p.bn2.beta, trainable),
        },
    }
}

// ── Forward passes over bound ids ────────────────────────────────────────

pub fn linear_forward(tape: &mut Tape, l: &BoundLinear, x: NodeId) -> NodeId {
    let xw = tape.matmul(x, l.w);
    tape.add(xw, l.b)
}

/// Encoder: two LeakyReLU hidden layers, linear output.
pub fn encoder_forward(tape: &mut Tape, e: &BoundEncoder, x: NodeId) -> NodeId {
    let a1 = linear_forward(tape, &e.l1, x);
    let r1 = tape.leaky_relu(a1, LEAKY_SLOPE);
    let a2 = linear_forward(tape, &e.l2, r1);
    let r2 = tape.leaky_relu(a2, LEAKY_SLOPE);
    linear_forward(tape, &e.l3, r2)
}

/// Projection head in train mode; updates `head`'s running statistics.
pub fn proj_forward_train(tape: &mut Tape, ids: &BoundProj, head: &mut ProjHead, h: NodeId) -> NodeId {
    let a1 = linear_forward(tape, &ids.l1, h);
    let (n1, stats1) = tape.batch_norm_train(a1, ids.bn1.gamma, ids.bn1.beta, BN_EPS);
    head.bn1.update_running(&stats1);
    let r1 = tape.leaky_relu(n1, LEAKY_SLOPE);
    let a2 = linear_forward(tape, &ids.l2, r1);
    let (n2, stats2) = tape.batch_norm_train(a2, ids.bn2.gamma, ids.bn2.beta, BN_EPS);
    head.bn2.update_running(&stats2);
    if head.normalize {
        tape.row_l2_normalize(n2)
    } else {
        n2
    }
}

/// Projection head in eval mode (frozen running statistics).
pub fn proj_forward_eval(tape: &mut Tape, ids: &BoundProj, head: &ProjHead, h: NodeId) -> NodeId {
    let a1 = linear_forward(tape, &ids.l1, h);
    let n1 = tape.batch_norm_eval(
        a1,
        ids.bn1.gamma,
        ids.bn1.beta,
        &head.bn1.running_mean,
        &head.bn1.running_var,
        BN_EPS,
    );
    let r1 = tape.leaky_relu(n1, LEAKY_SLOPE);
    let a2 = linear_forward(tape, &ids.l2, r1);
    let n2 = tape.batch_norm_eval(
        a2,
        ids.bn2.gamma,
        ids.bn2.beta,
        &head.bn2.running_mean,
        &head.bn2.running_var,
        BN_EPS,
    );
    if head.normalize {
        tape.row_l2_normalize(n2)
    } else {
        n2
    }
}

/// Density scores `s` (n x 1) from encoder output on the energy path.
pub fn density_forward(tape: &mut Tape, bound: &BoundModel, h: NodeId) -> NodeId {
    match &bound.head {
        BoundEnergyHead::VectorU(u) => tape.matmul(h, *u),
        BoundEnergyHead::Scalar(l) => linear_forward(tape, l, h),
    }
}

/// Prototype logits `z U / tau` (n x c).
pub fn cluster_logits_forward(tape: &mut Tape, bound: &BoundModel, z: NodeId, tau: f64) -> NodeId {
    let zu = tape.matmul(z, bound.prototypes);
    tape.scale(zu, 1.0 / tau)
}

pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
