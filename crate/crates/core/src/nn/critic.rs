use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{invalid, Error, Result};

/// Added to every embedding norm before dividing.
pub const NORM_EPS: f64 = 1e-12;

/// Fully connected encoder with `tanh` on hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpEncoder {
    dims: Vec<usize>,
    /// `weights[l]` has shape `dims[l] × dims[l+1]`.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Activations kept from a batched encoder pass: `acts[0]` is the input,
/// `acts[l+1]` the output of layer `l` (post-`tanh` for hidden layers).
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    acts: Vec<Matrix>,
}

impl EncoderTrace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace holds at least the input")
    }
}

impl MlpEncoder {
    /// Encoder with layer sizes `dims` (input first). Weights and biases are
    /// drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return invalid(format!("encoder needs ≥1 layer of non-zero width, got {dims:?}"));
        }
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
                rng.random_range(-bound..bound)
            }));
            biases.push((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Ok(MlpEncoder {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Encoder with explicit parameters.
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return invalid("encoder needs matching, non-empty weight and bias lists");
        }
        let mut dims = vec![weights[0].rows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.rows() != *dims.last().unwrap() {
                return Err(Error::Dimension {
                    expected: *dims.last().unwrap(),
                    got: w.rows(),
                    context: "encoder layer input width",
                });
            }
            if b.len() != w.cols() {
                return Err(Error::Dimension {
                    expected: w.cols(),
                    got: b.len(),
                    context: "encoder bias length",
                });
            }
            dims.push(w.cols());
        }
        Ok(MlpEncoder {
            dims,
            weights,
            biases,
        })
    }

    pub fn zeros_like(&self) -> Self {
        MlpEncoder {
            dims: self.dims.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.data().len() + b.len())
            .sum()
    }

    /// Single-vector forward pass with plain loops.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
                context: "encoder input",
            });
        }
        let last = self.weights.len() - 1;
        let mut h = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.clone();
            for (i, hi) in h.iter().enumerate() {
                for (o, wij) in next.iter_mut().zip(w.row(i)) {
                    *o += hi * wij;
                }
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            h = next;
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<EncoderTrace> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.cols(),
                context: "encoder batch input",
            });
        }
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut a = acts[l].matmul(w)?;
            a.add_row_broadcast(b);
            if l < last {
                a.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(a);
        }
        Ok(EncoderTrace { acts })
    }

    /// Accumulate parameter gradients into `grad` given the adjoint of the
    /// encoder output.
    fn backward(&self, trace: &EncoderTrace, d_out: Matrix, grad: &mut MlpEncoder) -> Result<()> {
        let last = self.weights.len() - 1;
        let mut delta = d_out;
        for l in (0..self.weights.len()).rev() {
            if l < last {
                let h = &trace.acts[l + 1];
                for (d, hv) in delta.data_mut().iter_mut().zip(h.data()) {
                    *d *= 1.0 - hv * hv;
                }
            }
            let gw = trace.acts[l].matmul_tn(&delta)?;
            for (g, v) in grad.weights[l].data_mut().iter_mut().zip(gw.data()) {
                *g += v;
            }
            for (g, v) in grad.biases[l].iter_mut().zip(delta.col_sums()) {
                *g += v;
            }
            if l > 0 {
                delta = delta.matmul_nt(&self.weights[l])?;
            }
        }
        Ok(())
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
    }

    fn load_params(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&src[at..at + n]);
            at += n;
            let m = b.len();
            b.copy_from_slice(&src[at..at + m]);
            at += m;
        }
        at
    }
}

/// Separable critic `T(x, z) = M · (tanh(w · cos⟨f(x), g(z)⟩ + b) − t)`.
///
/// `scale` is `M` and `shift` is `t`; both are fixed hyperparameters, while the
/// encoders and the head scalars `w`, `b` are learned. Scores always lie in
/// `[−M(1+t), M(1−t)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub f: MlpEncoder,
    pub g: MlpEncoder,
    pub w: f64,
    pub b: f64,
    scale: f64,
    shift: f64,
}

/// Intermediates of a batched forward pass, consumed by [`Critic::backward`].
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    fx: EncoderTrace,
    gz: EncoderTrace,
    f_norm: Vec<f64>,
    g_norm: Vec<f64>,
    f_unit: Matrix,
    g_unit: Matrix,
    cos: Matrix,
    tanh: Matrix,
    scores: Matrix,
}

impl ForwardTrace {
    /// Pairwise score matrix, rows index x and columns index z.
    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn into_scores(self) -> Matrix {
        self.scores
    }
}

/// Gradient buffers laid out exactly like a [`Critic`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTape {
    pub f: MlpEncoder,
    pub g: MlpEncoder,
    pub w: f64,
    pub b: f64,
}

impl GradientTape {
    pub fn zeros_for(c: &Critic) -> Self {
        GradientTape {
            f: c.f.zeros_like(),
            g: c.g.zeros_like(),
            w: 0.0,
            b: 0.0,
        }
    }

    pub fn zero(&mut self) {
        for enc in [&mut self.f, &mut self.g] {
            enc.weights
                .iter_mut()
                .for_each(|w| w.data_mut().fill(0.0));
            enc.biases.iter_mut().for_each(|b| b.fill(0.0));
        }
        self.w = 0.0;
        self.b = 0.0;
    }

    /// Flattened in the same order as [`Critic::params`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.f.num_params() + self.g.num_params() + 2);
        self.f.push_params(&mut out);
        self.g.push_params(&mut out);
        out.push(self.w);
        out.push(self.b);
        out
    }
}

/// Flat checkpoint record: layer sizes plus every parameter in
/// [`Critic::params`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticRecord {
    pub f_layer_dims: Vec<usize>,
    pub g_layer_dims: Vec<usize>,
    pub scale: f64,
    pub shift: f64,
    pub params: Vec<f64>,
}

impl Critic {
    pub fn new(f: MlpEncoder, g: MlpEncoder, w: f64, b: f64, scale: f64, shift: f64) -> Result<Self> {
        if f.output_dim() != g.output_dim() {
            return Err(Error::Dimension {
                expected: f.output_dim(),
                got: g.output_dim(),
                context: "embedding widths of f and g",
            });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid(format!("score scale M must be positive, got {scale}"));
        }
        if !(-1.0..=1.0).contains(&shift) {
            return invalid(format!("score shift t must lie in [-1, 1], got {shift}"));
        }
        Ok(Critic {
            f,
            g,
            w,
            b,
            scale,
            shift,
        })
    }

    /// Randomly initialised critic with `layers` linear maps per encoder, all
    /// `hidden` wide. Head starts at `w = 1`, `b = 0`.
    pub fn init<R: Rng + ?Sized>(
        dim_x: usize,
        dim_z: usize,
        layers: usize,
        hidden: usize,
        scale: f64,
        shift: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if layers == 0 {
            return invalid("encoders need at least one layer");
        }
        let dims = |input: usize| {
            let mut d = vec![input];
            d.extend(std::iter::repeat_n(hidden, layers));
            d
        };
        let f = MlpEncoder::new(&dims(dim_x), rng)?;
        let g = MlpEncoder::new(&dims(dim_z), rng)?;
        Critic::new(f, g, 1.0, 0.0, scale, shift)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `L = −M(1+t)`
    pub fn lower_bound(&self) -> f64 {
        -self.scale * (1.0 + self.shift)
    }

    /// `U = M(1−t)`
    pub fn upper_bound(&self) -> f64 {
        self.scale * (1.0 - self.shift)
    }

    pub fn num_params(&self) -> usize {
        self.f.num_params() + self.g.num_params() + 2
    }

    /// All learnable parameters: f layers (weights row-major, then bias), g
    /// layers likewise, then `w`, `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.f.push_params(&mut out);
        self.g.push_params(&mut out);
        out.push(self.w);
        out.push(self.b);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: p.len(),
                context: "critic parameter vector",
            });
        }
        let mut at = self.f.load_params(p);
        at += self.g.load_params(&p[at..]);
        self.w = p[at];
        self.b = p[at + 1];
        Ok(())
    }

    #[inline]
    fn head(&self, cos: f64) -> f64 {
        self.scale * (tanh(self.w * cos + self.b) - self.shift)
    }

    /// Score of a single pair.
    pub fn forward(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let fx = self.f.forward(x)?;
        let gz = self.g.forward(z)?;
        let nf = fx.iter().map(|v| v * v).sum::<f64>().sqrt() + NORM_EPS;
        let ng = gz.iter().map(|v| v * v).sum::<f64>().sqrt() + NORM_EPS;
        let dot: f64 = fx.iter().zip(&gz).map(|(a, b)| (a / nf) * (b / ng)).sum();
        Ok(self.head(dot))
    }

    /// All pairwise scores `T(x_i, z_j)` with intermediates for backprop.
    pub fn forward_batch(&self, x: &Matrix, z: &Matrix) -> Result<ForwardTrace> {
        let fx = self.f.forward_batch(x)?;
        let gz = self.g.forward_batch(z)?;
        let (f_unit, f_norm) = normalize_rows(fx.output());
        let (g_unit, g_norm) = normalize_rows(gz.output());
        let cos = f_unit.matmul_nt(&g_unit)?;
        let tanh = cos.map(|c| tanh(self.w * c + self.b));
        let (m, t) = (self.scale, self.shift);
        let scores = tanh.map(|th| m * (th - t));
        Ok(ForwardTrace {
            fx,
            gz,
            f_norm,
            g_norm,
            f_unit,
            g_unit,
            cos,
            tanh,
            scores,
        })
    }

    /// Score matrix only.
    pub fn scores(&self, x: &Matrix, z: &Matrix) -> Result<Matrix> {
        Ok(self.forward_batch(x, z)?.into_scores())
    }

    /// Scores of aligned pairs `(x_i, z_i)` without forming the full matrix.
    pub fn paired_scores(&self, x: &Matrix, z: &Matrix) -> Result<Vec<f64>> {
        if x.rows() != z.rows() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: z.rows(),
                context: "paired score rows",
            });
        }
        let (fu, _) = normalize_rows(self.f.forward_batch(x)?.output());
        let (gu, _) = normalize_rows(self.g.forward_batch(z)?.output());
        Ok(fu
            .row_iter()
            .zip(gu.row_iter())
            .map(|(a, b)| self.head(a.iter().zip(b).map(|(p, q)| p * q).sum()))
            .collect())
    }

    /// Reverse-mode gradients of a scalar loss whose adjoint with respect to
    /// the score matrix is `adjoint` (same shape as `trace.scores()`).
    pub fn backward(&self, trace: &ForwardTrace, adjoint: &Matrix) -> Result<GradientTape> {
        if adjoint.shape() != trace.scores.shape() {
            return Err(Error::Dimension {
                expected: trace.scores.rows() * trace.scores.cols(),
                got: adjoint.rows() * adjoint.cols(),
                context: "score adjoint shape",
            });
        }
        let mut tape = GradientTape::zeros_for(self);
        // d pre-activation of the head
        let mut d_pre = adjoint.clone();
        for (d, th) in d_pre.data_mut().iter_mut().zip(trace.tanh.data()) {
            *d *= self.scale * (1.0 - th * th);
        }
        tape.b = d_pre.data().iter().sum();
        tape.w = d_pre
            .data()
            .iter()
            .zip(trace.cos.data())
            .map(|(d, c)| d * c)
            .sum();
        let d_cos = d_pre.map(|d| d * self.w);
        let d_fu = d_cos.matmul(&trace.g_unit)?;
        let d_gu = d_cos.matmul_tn(&trace.f_unit)?;
        let d_f = unnormalize_adjoint(trace.fx.output(), &trace.f_unit, &trace.f_norm, d_fu);
        let d_g = unnormalize_adjoint(trace.gz.output(), &trace.g_unit, &trace.g_norm, d_gu);
        self.f.backward(&trace.fx, d_f, &mut tape.f)?;
        self.g.backward(&trace.gz, d_g, &mut tape.g)?;
        Ok(tape)
    }

    pub fn to_record(&self) -> CriticRecord {
        CriticRecord {
            f_layer_dims: self.f.layer_dims().to_vec(),
            g_layer_dims: self.g.layer_dims().to_vec(),
            scale: self.scale,
            shift: self.shift,
            params: self.params(),
        }
    }

    pub fn from_record(rec: &CriticRecord) -> Result<Self> {
        let zeros = |dims: &[usize]| -> Result<MlpEncoder> {
            if dims.len() < 2 {
                return invalid("record encoder needs at least two layer sizes");
            }
            let weights = dims
                .windows(2)
                .map(|p| Matrix::zeros(p[0], p[1]))
                .collect();
            let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
            MlpEncoder::from_parts(weights, biases)
        };
        let mut c = Critic::new(
            zeros(&rec.f_layer_dims)?,
            zeros(&rec.g_layer_dims)?,
            0.0,
            0.0,
            rec.scale,
            rec.shift,
        )?;
        c.set_params(&rec.params)?;
        Ok(c)
    }
}

/// `tanh` through a single `exp`; several times cheaper than libm's `tanh`
/// and accurate to a few ulps in absolute terms, which is what the bounded
/// scores need. Saturates correctly when `exp` overflows or underflows.
#[inline]
fn tanh(u: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

fn normalize_rows(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut unit = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let r = unit.row_mut(i);
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = n + NORM_EPS;
        r.iter_mut().for_each(|v| *v /= s);
        norms.push(n);
    }
    (unit, norms)
}

/// Adjoint of `u = v / (‖v‖ + eps)` mapped back to `v`.
fn unnormalize_adjoint(v: &Matrix, unit: &Matrix, norms: &[f64], mut d_unit: Matrix) -> Matrix {
    for (i, &n) in norms.iter().enumerate().take(v.rows()) {
        let s = n + NORM_EPS;
        let proj: f64 = unit.row(i).iter().zip(d_unit.row(i)).map(|(a, b)| a * b).sum();
        let vi = v.row(i);
        let d = d_unit.row_mut(i);
        // ∂u/∂v = I/s − v vᵀ /(s² n); u = v/s so v vᵀ/(s² n) = u vᵀ/(s n)
        let radial = if n > 0.0 { proj / (s * n) } else { 0.0 };
        for (dj, vj) in d.iter_mut().zip(vi) {
            *dj = *dj / s - radial * vj;
        }
    }
    d_unit
}
