//! One-hidden-layer sigmoid networks trained by per-example SGD, and the
//! two-network chain used as an autoencoder.
//!
//! The flat parameter order used by [`Mlp::params`] and the gradient routines
//! is `w_ih, b_h, w_ho, b_o`, each weight matrix row-major by destination
//! unit: `w_ih[k * n_in + i]` is the weight from input `i` to hidden unit `k`.
//! Internally weights are stored source-major so that a layer's units
//! accumulate side by side.

use std::cell::RefCell;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lang::{decide_component, decide_slice, BitVector, ProbVector, MAX_LEN};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Loss {
    /// Binary cross-entropy summed over the outputs.
    CrossEntropy,
    /// Squared error averaged over the outputs. The default, since the
    /// default learning rates only train stably at this gradient scale.
    #[default]
    SquaredError,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::CrossEntropy => "cross_entropy",
            Loss::SquaredError => "squared_error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cross_entropy" | "ce" => Some(Loss::CrossEntropy),
            "squared_error" | "mse" => Some(Loss::SquaredError),
            _ => None,
        }
    }

    /// Loss value and its derivative with respect to the output
    /// pre-activations, written into `delta`.
    fn eval(self, out: &[f64], target: &[f64], delta: &mut [f64]) -> f64 {
        match self {
            Loss::CrossEntropy => {
                let mut loss = 0.0;
                for ((d, &p), &y) in delta.iter_mut().zip(out).zip(target) {
                    let pc = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                    loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
                    *d = p - y;
                }
                loss
            }
            Loss::SquaredError => {
                let scale = 1.0 / out.len() as f64;
                let mut loss = 0.0;
                for ((d, &p), &y) in delta.iter_mut().zip(out).zip(target) {
                    let e = p - y;
                    loss += e * e;
                    *d = 2.0 * scale * e * p * (1.0 - p);
                }
                loss * scale
            }
        }
    }
}

/// Per-example loss of `out` against `target`.
pub fn loss_value(loss: Loss, out: &[f64], target: &[f64]) -> f64 {
    let mut delta = vec![0.0; out.len()];
    loss.eval(out, target, &mut delta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub loss: Loss,
    pub epochs: usize,
}

impl TrainConfig {
    pub fn new(eta: f64, loss: Loss, epochs: usize) -> Result<Self> {
        let cfg = TrainConfig { eta, loss, epochs };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", format!("{} must be > 0", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Bound on `|1 / (1 + approx_exp(-a)) - sigmoid(a)|`, with ample slack.
const SIGMOID_TOL: f64 = 1e-11;

/// `exp(x)` to about 1e-14 relative error for `x` in `[-700, 700]` (inputs
/// are clamped to that range); branch-free so loops over it vectorize.
#[inline]
fn approx_exp(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.clamp(-700.0, 700.0);
    let kf = (x * std::f64::consts::LOG2_E + SHIFT) - SHIFT;
    let r = (x - kf * LN2_HI) - kf * LN2_LO;
    // Taylor series to degree 12 on |r| <= ln(2) / 2
    let mut p = 1.0 / 479_001_600.0;
    for c in [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    // The low bits of the shifted value hold the integer `kf`.
    let k_bits = (x * std::f64::consts::LOG2_E + SHIFT)
        .to_bits()
        .wrapping_sub(SHIFT.to_bits());
    let scale = f64::from_bits(k_bits.wrapping_add(1023) << 52);
    p * scale
}

/// `decide_component(sigmoid(z))`, evaluating the sigmoid only near zero.
#[inline]
fn decide_preactivation(z: f64) -> u8 {
    if z <= 0.0 {
        // exp(-z) >= 1, so the sigmoid is at most 0.5
        0
    } else if z > 1e-3 {
        1
    } else {
        decide_component(sigmoid(z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    /// `t_ih[i * n_hidden + k]`: input `i` to hidden unit `k`.
    t_ih: Vec<f64>,
    b_h: Vec<f64>,
    /// `t_ho[k * n_out + j]`: hidden unit `k` to output `j`.
    t_ho: Vec<f64>,
    b_o: Vec<f64>,
}

/// Activations of one forward pass, kept for backpropagation.
struct Pass {
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl Mlp {
    /// A network with every parameter zero.
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Result<Self> {
        for (key, v) in [("n_in", n_in), ("n_hidden", n_hidden), ("n_out", n_out)] {
            if v == 0 {
                return Err(Error::config(key, "layer size must be at least 1"));
            }
        }
        Ok(Mlp {
            n_in,
            n_hidden,
            n_out,
            t_ih: vec![0.0; n_hidden * n_in],
            b_h: vec![0.0; n_hidden],
            t_ho: vec![0.0; n_out * n_hidden],
            b_o: vec![0.0; n_out],
        })
    }

    /// Glorot-uniform weights, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`
    /// per layer, and zero biases.
    pub fn init_glorot<R: Rng + ?Sized>(
        n_in: usize,
        n_hidden: usize,
        n_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(n_in, n_hidden, n_out)?;
        // Drawn in flat parameter order.
        let a1 = glorot_bound(n_in, n_hidden);
        for k in 0..n_hidden {
            for i in 0..n_in {
                net.t_ih[i * n_hidden + k] = a1 * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        let a2 = glorot_bound(n_hidden, n_out);
        for j in 0..n_out {
            for k in 0..n_hidden {
                net.t_ho[k * n_out + j] = a2 * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Input-to-hidden weights, `[k * n_in + i]`.
    pub fn weights_ih(&self) -> Vec<f64> {
        transpose(&self.t_ih, self.n_in, self.n_hidden)
    }

    /// Hidden-to-output weights, `[j * n_hidden + k]`.
    pub fn weights_ho(&self) -> Vec<f64> {
        transpose(&self.t_ho, self.n_hidden, self.n_out)
    }

    pub fn bias_h(&self) -> &[f64] {
        &self.b_h
    }

    pub fn bias_o(&self) -> &[f64] {
        &self.b_o
    }

    pub fn num_params(&self) -> usize {
        self.t_ih.len() + self.b_h.len() + self.t_ho.len() + self.b_o.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend(self.weights_ih());
        p.extend_from_slice(&self.b_h);
        p.extend(self.weights_ho());
        p.extend_from_slice(&self.b_o);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        let (a, rest) = params.split_at(self.t_ih.len());
        let (b, rest) = rest.split_at(self.b_h.len());
        let (c, d) = rest.split_at(self.t_ho.len());
        self.t_ih = transpose(a, self.n_hidden, self.n_in);
        self.b_h.copy_from_slice(b);
        self.t_ho = transpose(c, self.n_out, self.n_hidden);
        self.b_o.copy_from_slice(d);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.t_ih
            .iter()
            .chain(&self.b_h)
            .chain(&self.t_ho)
            .chain(&self.b_o)
            .all(|w| w.is_finite())
    }

    pub fn forward(&self, input: &BitVector) -> Result<ProbVector> {
        self.check_input(input.len())?;
        Ok(ProbVector::new_unchecked(
            self.forward_reals(&input.to_reals())?,
        ))
    }

    /// Forward pass on real-valued inputs.
    pub fn forward_reals(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut hidden = vec![0.0; self.n_hidden];
        let mut out = vec![0.0; self.n_out];
        self.forward_into(input, &mut hidden, &mut out);
        Ok(out)
    }

    /// `decide(forward(input))` without allocating; `scratch` holds
    /// `n_hidden + n_out` values.
    pub fn decide_with(&self, input: &[f64], scratch: &mut [f64]) -> BitVector {
        let (hidden, out) = scratch.split_at_mut(self.n_hidden);
        let out = &mut out[..self.n_out];
        self.forward_into(input, hidden, out);
        decide_slice(out)
    }

    pub fn scratch_len(&self) -> usize {
        self.n_hidden + self.n_out
    }

    /// Decision index of every binary input, in input-index order; identical
    /// to calling [`Mlp::decide_with`] on each input.
    ///
    /// Hidden pre-activations share prefix sums across inputs with common
    /// leading bits, accumulated in the same order as the per-input fold.
    pub fn tabulate_decisions(&self) -> Result<Vec<u32>> {
        let n = self.n_in;
        if n == 0 || n > MAX_LEN || self.n_out > 32 {
            return Err(Error::config(
                "n",
                format!("cannot tabulate a {n}-input, {}-output network", self.n_out),
            ));
        }
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected above.
            return Ok(unsafe { self.tabulate_avx2() });
        }
        Ok(self.tabulate_impl())
    }

    // Same arithmetic as the portable path; without implicit fused
    // multiply-adds the results are bitwise identical.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn tabulate_avx2(&self) -> Vec<u32> {
        self.tabulate_impl()
    }

    #[inline(always)]
    fn tabulate_impl(&self) -> Vec<u32> {
        let (n, h) = (self.n_in, self.n_hidden);
        let n_out = self.n_out;
        let (cols, rows_o) = (&self.t_ih, &self.t_ho);
        let mut z = vec![0.0; n_out];
        let mut margins = vec![0.0; n_out];
        for row in rows_o.chunks_exact(n_out) {
            for (m, w) in margins.iter_mut().zip(row) {
                *m += w.abs();
            }
        }
        for m in &mut margins {
            *m = SIGMOID_TOL * (*m + 1.0) + 1e-9;
        }
        // levels[l]: pre-activations after folding the first `l` inputs.
        let mut levels = vec![0.0; (n + 1) * h];
        levels[..h].copy_from_slice(&self.b_h);
        let mut hidden = vec![0.0; h];
        let total = 1usize << n;
        let mut out = Vec::with_capacity(total);
        for u in 0..total {
            let first = if u == 0 {
                0
            } else {
                n - 1 - u.trailing_zeros() as usize
            };
            for i in first..n {
                let (lo, hi) = levels.split_at_mut((i + 1) * h);
                let prev = &lo[i * h..];
                let next = &mut hi[..h];
                if (u >> (n - 1 - i)) & 1 == 1 {
                    let col = &cols[i * h..(i + 1) * h];
                    for ((d, &p), &w) in next.iter_mut().zip(prev).zip(col) {
                        *d = p + w;
                    }
                } else {
                    next.copy_from_slice(prev);
                }
            }
            // Fast path: approximate sigmoids, accepted when every output
            // is farther from zero than the approximation error allows.
            for (v, &a) in hidden.iter_mut().zip(&levels[n * h..]) {
                *v = 1.0 / (1.0 + approx_exp(-a));
            }
            affine(rows_o, &self.b_o, &hidden, &mut z);
            let mut index = 0u32;
            let mut certain = true;
            for (&zj, &b) in z.iter().zip(&margins) {
                if zj > b {
                    index = (index << 1) | 1;
                } else if zj < -b {
                    index <<= 1;
                } else {
                    certain = false;
                    break;
                }
            }
            if !certain {
                for (v, &a) in hidden.iter_mut().zip(&levels[n * h..]) {
                    *v = sigmoid(a);
                }
                affine(rows_o, &self.b_o, &hidden, &mut z);
                index = z.iter().fold(0u32, |acc, &zj| {
                    (acc << 1) | decide_preactivation(zj) as u32
                });
            }
            out.push(index);
        }
        out
    }

    /// Each unit sums `bias + w_0 x_0 + w_1 x_1 + ...` in source order.
    #[inline]
    pub(crate) fn forward_into(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        affine(&self.t_ih, &self.b_h, x, hidden);
        for h in hidden.iter_mut() {
            *h = sigmoid(*h);
        }
        affine(&self.t_ho, &self.b_o, hidden, out);
        for o in out.iter_mut() {
            *o = sigmoid(*o);
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.n_in {
            return Err(Error::Dimension {
                expected: self.n_in,
                actual: len,
            });
        }
        Ok(())
    }

    fn check_target(&self, len: usize) -> Result<()> {
        if len != self.n_out {
            return Err(Error::Dimension {
                expected: self.n_out,
                actual: len,
            });
        }
        Ok(())
    }

    fn pass(&self, x: &[f64]) -> Pass {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut out = vec![0.0; self.n_out];
        self.forward_into(x, &mut hidden, &mut out);
        Pass { hidden, out }
    }

    /// dL/d(hidden pre-activation) from dL/d(output pre-activation).
    fn hidden_delta(&self, hidden: &[f64], delta_o: &[f64], delta_h: &mut [f64]) {
        for ((dh, row), &h) in delta_h
            .iter_mut()
            .zip(self.t_ho.chunks_exact(self.n_out))
            .zip(hidden)
        {
            *dh = dot(row, delta_o) * (h * (1.0 - h));
        }
    }

    /// dL/d(input) from dL/d(hidden pre-activation).
    fn input_delta(&self, delta_h: &[f64], delta_x: &mut [f64]) {
        for (dx, row) in delta_x
            .iter_mut()
            .zip(self.t_ih.chunks_exact(self.n_hidden))
        {
            *dx = dot(row, delta_h);
        }
    }

    /// `params += scale * grad`.
    fn apply(&mut self, x: &[f64], hidden: &[f64], delta_o: &[f64], delta_h: &[f64], scale: f64) {
        outer_update(&mut self.t_ho, &mut self.b_o, delta_o, hidden, scale);
        outer_update(&mut self.t_ih, &mut self.b_h, delta_h, x, scale);
    }

    /// Writes the gradient in flat parameter order.
    fn write_gradient(
        &self,
        x: &[f64],
        pass: &Pass,
        delta_o: &[f64],
        delta_h: &[f64],
        grad: &mut [f64],
    ) {
        let (g_ih, rest) = grad.split_at_mut(self.t_ih.len());
        let (g_bh, rest) = rest.split_at_mut(self.b_h.len());
        let (g_ho, g_bo) = rest.split_at_mut(self.t_ho.len());
        for (k, &d) in delta_h.iter().enumerate() {
            for (i, &v) in x.iter().enumerate() {
                g_ih[k * self.n_in + i] = d * v;
            }
            g_bh[k] = d;
        }
        for (j, &d) in delta_o.iter().enumerate() {
            for (k, &h) in pass.hidden.iter().enumerate() {
                g_ho[j * self.n_hidden + k] = d * h;
            }
            g_bo[j] = d;
        }
    }

    /// Loss and analytic gradient for one example, without updating.
    pub fn gradient(&self, input: &[f64], target: &[f64], loss: Loss) -> Result<(f64, Vec<f64>)> {
        self.check_input(input.len())?;
        self.check_target(target.len())?;
        let pass = self.pass(input);
        let mut delta_o = vec![0.0; self.n_out];
        let value = loss.eval(&pass.out, target, &mut delta_o);
        let mut delta_h = vec![0.0; self.n_hidden];
        self.hidden_delta(&pass.hidden, &delta_o, &mut delta_h);
        let mut grad = vec![0.0; self.num_params()];
        self.write_gradient(input, &pass, &delta_o, &delta_h, &mut grad);
        Ok((value, grad))
    }

    /// One SGD step on a single example; returns the pre-update loss.
    ///
    /// On a non-finite loss or gradient the parameters are left untouched and
    /// a numeric error is returned.
    pub fn sgd_step(&mut self, input: &[f64], target: &[f64], cfg: &TrainConfig) -> Result<f64> {
        self.check_input(input.len())?;
        self.check_target(target.len())?;
        SCRATCH.with_borrow_mut(|s| {
            let [hidden, out, delta_o, delta_h, ..] = s.take([
                self.n_hidden,
                self.n_out,
                self.n_out,
                self.n_hidden,
                0,
                0,
                0,
                0,
                0,
            ]);
            self.forward_into(input, hidden, out);
            let value = cfg.loss.eval(out, target, delta_o);
            self.hidden_delta(hidden, delta_o, delta_h);
            check_finite(value, &[delta_o, delta_h])?;
            if cfg.eta != 0.0 {
                self.apply(input, hidden, delta_o, delta_h, -cfg.eta);
            }
            Ok(value)
        })
    }
}

/// `out = bias + src^T x` for a source-major matrix, summing in source order.
/// Destination units are blocked eight at a time so the partial sums stay in
/// registers.
#[inline(always)]
fn affine(t: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    const W: usize = 8;
    let width = out.len();
    let mut j0 = 0;
    while j0 + W <= width {
        let mut acc = [0.0; W];
        acc.copy_from_slice(&bias[j0..j0 + W]);
        for (i, &v) in x.iter().enumerate() {
            let row = &t[i * width + j0..i * width + j0 + W];
            for l in 0..W {
                acc[l] += row[l] * v;
            }
        }
        out[j0..j0 + W].copy_from_slice(&acc);
        j0 += W;
    }
    if j0 < width {
        out[j0..].copy_from_slice(&bias[j0..]);
        for (i, &v) in x.iter().enumerate() {
            let row = &t[i * width + j0..(i + 1) * width];
            for (acc, &w) in out[j0..].iter_mut().zip(row) {
                *acc += w * v;
            }
        }
    }
}

/// `t += x (scale d)^T`, `bias += scale d`; rows for zero inputs are left
/// as they are.
#[inline]
fn outer_update(t: &mut [f64], bias: &mut [f64], d: &[f64], x: &[f64], scale: f64) {
    for (row, &v) in t.chunks_exact_mut(d.len()).zip(x) {
        if v == 0.0 {
            continue;
        }
        for (w, &dj) in row.iter_mut().zip(d) {
            *w += (scale * dj) * v;
        }
    }
    for (b, &dj) in bias.iter_mut().zip(d) {
        *b += scale * dj;
    }
}

/// Reusable per-thread buffers for the training steps.
#[derive(Default)]
struct Scratch {
    bufs: [Vec<f64>; 9],
}

impl Scratch {
    /// Zeroed buffers of the requested lengths.
    fn take(&mut self, lens: [usize; 9]) -> [&mut [f64]; 9] {
        for (b, &n) in self.bufs.iter_mut().zip(&lens) {
            b.clear();
            b.resize(n, 0.0);
        }
        self.bufs.each_mut().map(|b| b.as_mut_slice())
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Dot product with four interleaved partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Transposes a row-major `rows x cols` matrix.
fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn check_finite(loss: f64, deltas: &[&[f64]]) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss}")));
    }
    if deltas.iter().any(|d| d.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("gradient has a non-finite component".into()));
    }
    Ok(())
}

/// Probability a network output assigns to `target`: the product of `p_i`
/// where the target bit is 1 and `1 - p_i` where it is 0.
pub fn pair_probability(p: &ProbVector, target: &BitVector) -> Result<f64> {
    if p.len() != target.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            actual: target.len(),
        });
    }
    Ok(pair_probability_slice(p.as_slice(), target))
}

#[inline]
pub(crate) fn pair_probability_slice(p: &[f64], target: &BitVector) -> f64 {
    p.iter().enumerate().fold(1.0, |acc, (i, &pi)| {
        acc * if target.bit(i) == 1 { pi } else { 1.0 - pi }
    })
}

/// Forward pass of `second(first(x))`, the intermediate layer kept real-valued.
pub fn chain_forward(first: &Mlp, second: &Mlp, input: &[f64]) -> Result<Vec<f64>> {
    check_chain(first, second)?;
    let mid = first.forward_reals(input)?;
    second.forward_reals(&mid)
}

fn check_chain(first: &Mlp, second: &Mlp) -> Result<()> {
    if first.n_out != second.n_in {
        return Err(Error::Dimension {
            expected: first.n_out,
            actual: second.n_in,
        });
    }
    Ok(())
}

struct ChainPass {
    first: Pass,
    second: Pass,
    delta_o2: Vec<f64>,
    delta_h2: Vec<f64>,
    delta_o1: Vec<f64>,
    delta_h1: Vec<f64>,
    loss: f64,
}

fn chain_backprop(
    first: &Mlp,
    second: &Mlp,
    input: &[f64],
    target: &[f64],
    loss: Loss,
) -> Result<ChainPass> {
    check_chain(first, second)?;
    first.check_input(input.len())?;
    second.check_target(target.len())?;
    let p1 = first.pass(input);
    let p2 = second.pass(&p1.out);
    let mut delta_o2 = vec![0.0; second.n_out];
    let value = loss.eval(&p2.out, target, &mut delta_o2);
    let mut delta_h2 = vec![0.0; second.n_hidden];
    second.hidden_delta(&p2.hidden, &delta_o2, &mut delta_h2);
    let mut delta_o1 = vec![0.0; first.n_out];
    second.input_delta(&delta_h2, &mut delta_o1);
    for (d, &s) in delta_o1.iter_mut().zip(&p1.out) {
        *d *= s * (1.0 - s);
    }
    let mut delta_h1 = vec![0.0; first.n_hidden];
    first.hidden_delta(&p1.hidden, &delta_o1, &mut delta_h1);
    Ok(ChainPass {
        first: p1,
        second: p2,
        delta_o2,
        delta_h2,
        delta_o1,
        delta_h1,
        loss: value,
    })
}

/// Loss and gradient of the chain `second(first(x))` against `target`, over
/// the concatenated parameters (first network, then second).
pub fn chain_gradient(
    first: &Mlp,
    second: &Mlp,
    input: &[f64],
    target: &[f64],
    loss: Loss,
) -> Result<(f64, Vec<f64>)> {
    let c = chain_backprop(first, second, input, target, loss)?;
    let mut grad = vec![0.0; first.num_params() + second.num_params()];
    let (g1, g2) = grad.split_at_mut(first.num_params());
    first.write_gradient(input, &c.first, &c.delta_o1, &c.delta_h1, g1);
    second.write_gradient(&c.first.out, &c.second, &c.delta_o2, &c.delta_h2, g2);
    Ok((c.loss, grad))
}

/// One SGD step on the chain `second(first(x))` with target `target`,
/// updating both networks. Returns the pre-update loss.
pub fn chain_step(
    first: &mut Mlp,
    second: &mut Mlp,
    input: &[f64],
    target: &[f64],
    cfg: &TrainConfig,
) -> Result<f64> {
    check_chain(first, second)?;
    first.check_input(input.len())?;
    second.check_target(target.len())?;
    SCRATCH.with_borrow_mut(|s| {
        let [h1, o1, h2, o2, d_o2, d_h2, d_o1, d_h1, _] = s.take([
            first.n_hidden,
            first.n_out,
            second.n_hidden,
            second.n_out,
            second.n_out,
            second.n_hidden,
            first.n_out,
            first.n_hidden,
            0,
        ]);
        first.forward_into(input, h1, o1);
        second.forward_into(o1, h2, o2);
        let value = cfg.loss.eval(o2, target, d_o2);
        second.hidden_delta(h2, d_o2, d_h2);
        second.input_delta(d_h2, d_o1);
        for (d, &v) in d_o1.iter_mut().zip(o1.iter()) {
            *d *= v * (1.0 - v);
        }
        first.hidden_delta(h1, d_o1, d_h1);
        check_finite(value, &[d_o2, d_h2, d_o1, d_h1])?;
        if cfg.eta != 0.0 {
            second.apply(o1, h2, d_o2, d_h2, -cfg.eta);
            first.apply(input, h1, d_o1, d_h1, -cfg.eta);
        }
        Ok(value)
    })
}

/// Meaning-to-meaning autoencoder step: `dec(enc(m))` trained toward `m`.
pub fn autoencoder_step(
    enc: &mut Mlp,
    dec: &mut Mlp,
    meaning: &[f64],
    cfg: &TrainConfig,
) -> Result<f64> {
    chain_step(enc, dec, meaning, meaning, cfg)
}
