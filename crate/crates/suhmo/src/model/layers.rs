//! Network building blocks expressed over the autodiff tape.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamSet, Tape, Var};

/// Linear layer, parameters `<prefix>.w` (in x out) and `<prefix>.b` (out).
#[derive(Clone, Debug)]
pub struct Linear {
    prefix: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(prefix: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Linear { prefix: prefix.into(), in_dim, out_dim }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        self.init_scaled(params, rng, 1.0);
    }

    /// `gain` shrinks the weight range; the velocity head starts near-static.
    pub fn init_scaled(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng, gain: f64) {
        let lim = gain / (self.in_dim as f64).sqrt();
        params.insert_uniform_lim(format!("{}.w", self.prefix), &[self.in_dim, self.out_dim], lim, rng);
        params.insert_zeros(format!("{}.b", self.prefix), &[self.out_dim]);
    }

    pub fn forward<'t>(&self, tape: &'t Tape, params: &ParamSet, x: Var<'t>) -> Var<'t> {
        let w = tape.param(params, &format!("{}.w", self.prefix));
        let b = tape.param(params, &format!("{}.b", self.prefix));
        x.matmul(w).add(b)
    }
}

/// Multi-layer perceptron with tanh hidden activations and a linear output.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `hidden` entries are the hidden widths; empty gives a single linear map.
    pub fn new(prefix: &str, in_dim: usize, hidden: &[usize], out_dim: usize) -> Self {
        let mut dims = vec![in_dim];
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(format!("{prefix}.l{i}"), w[0], w[1]))
            .collect();
        Mlp { layers }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        self.init_out_scaled(params, rng, 1.0);
    }

    pub fn init_out_scaled(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng, out_gain: f64) {
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.init_scaled(params, rng, if i == last { out_gain } else { 1.0 });
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, params: &ParamSet, x: Var<'t>) -> Var<'t> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(tape, params, h);
            if i != last {
                h = h.tanh();
            }
        }
        h
    }
}

/// LSTM cell with a single fused gate matrix.
/// Parameters: `<prefix>.w` ((in+hidden) x 4*hidden), `<prefix>.b` (4*hidden),
/// gate order input | forget | cell | output.
#[derive(Clone, Debug)]
pub struct LstmCell {
    prefix: String,
    pub in_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(prefix: impl Into<String>, in_dim: usize, hidden: usize) -> Self {
        LstmCell { prefix: prefix.into(), in_dim, hidden }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        let lim = 1.0 / ((self.in_dim + self.hidden) as f64).sqrt();
        params.insert_uniform_lim(
            format!("{}.w", self.prefix),
            &[self.in_dim + self.hidden, 4 * self.hidden],
            lim,
            rng,
        );
        params.insert_zeros(format!("{}.b", self.prefix), &[4 * self.hidden]);
    }

    /// One step over a batch: `x` (B, in), `h`/`c` (B, hidden). Returns (h', c').
    pub fn step<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        x: Var<'t>,
        h: Var<'t>,
        c: Var<'t>,
    ) -> (Var<'t>, Var<'t>) {
        let w = tape.param(params, &format!("{}.w", self.prefix));
        let b = tape.param(params, &format!("{}.b", self.prefix));
        let z = crate::model::concat_cols(tape, &[x, h]).matmul(w).add(b);
        let hd = self.hidden;
        let i = z.slice(1, 0, hd).sigmoid();
        let f = z.slice(1, hd, hd).sigmoid();
        let g = z.slice(1, 2 * hd, hd).tanh();
        let o = z.slice(1, 3 * hd, hd).sigmoid();
        let c_next = f.mul(c).add(i.mul(g));
        let h_next = o.mul(c_next.tanh());
        (h_next, c_next)
    }

    pub fn zero_state<'t>(&self, tape: &'t Tape, batch: usize) -> (Var<'t>, Var<'t>) {
        use crate::autodiff::Tensor;
        (
            tape.constant(Tensor::zeros(&[batch, self.hidden])),
            tape.constant(Tensor::zeros(&[batch, self.hidden])),
        )
    }
}

/// Single-head scaled dot-product attention, `q` (B, Tq, e) against
/// `kv` (B, Tkv, e). No positional encoding anywhere in this crate.
#[derive(Clone, Debug)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    pub dim: usize,
}

impl Attention {
    pub fn new(prefix: &str, dim: usize) -> Self {
        Attention {
            q: Linear::new(format!("{prefix}.q"), dim, dim),
            k: Linear::new(format!("{prefix}.k"), dim, dim),
            v: Linear::new(format!("{prefix}.v"), dim, dim),
            o: Linear::new(format!("{prefix}.o"), dim, dim),
            dim,
        }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        for l in [&self.q, &self.k, &self.v, &self.o] {
            l.init(params, rng);
        }
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        q_seq: Var<'t>,
        kv_seq: Var<'t>,
    ) -> Var<'t> {
        let q = self.q.forward(tape, params, q_seq);
        let k = self.k.forward(tape, params, kv_seq);
        let v = self.v.forward(tape, params, kv_seq);
        let scores = q.matmul(k.transpose()).scale(1.0 / (self.dim as f64).sqrt());
        let ctx = scores.softmax().matmul(v);
        self.o.forward(tape, params, ctx)
    }
}

/// Pre-norm-free transformer block: attention + residual + layer norm, then a
/// tanh feed-forward + residual + layer norm.
#[derive(Clone, Debug)]
pub struct AttentionBlock {
    attn: Attention,
    ffn: Mlp,
}

impl AttentionBlock {
    pub fn new(prefix: &str, dim: usize) -> Self {
        AttentionBlock {
            attn: Attention::new(&format!("{prefix}.attn"), dim),
            ffn: Mlp::new(&format!("{prefix}.ffn"), dim, &[dim], dim),
        }
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        self.attn.init(params, rng);
        self.ffn.init(params, rng);
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        params: &ParamSet,
        x: Var<'t>,
        kv: Var<'t>,
    ) -> Var<'t> {
        let y = x.add(self.attn.forward(tape, params, x, kv)).layer_norm();
        y.add(self.ffn.forward(tape, params, y)).layer_norm()
    }
}
