//! The encoder-decoder network: embeddings, stacked GRU or LSTM layers, dot
//! product attention, and a softmax readout, with hand-written backward
//! passes and Adam updates. Everything is f64 so analytic gradients can be
//! checked against central finite differences.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub const ATTENTION_MASK_SCORE: f64 = -1e30;
const GRAD_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "GRU")]
    Gru,
    #[serde(rename = "LSTM")]
    Lstm,
}

impl CellKind {
    fn gate_mult(self) -> usize {
        match self {
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }
}

/// Static shape information shared by forward, backward, and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub cell: CellKind,
    pub layers: usize,
    pub embedding: usize,
    pub hidden: usize,
    pub input_vocab: usize,
    pub output_vocab: usize,
}

/// One recurrent layer. Biases are stored as 1 x K rows so every parameter
/// is an `Array2` and serialization stays uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayerParams {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b_ih: Array2<f64>,
    pub b_hh: Array2<f64>,
}

impl RnnLayerParams {
    fn init(kind: CellKind, input: usize, hidden: usize, rng: &mut ChaCha20Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let g = kind.gate_mult() * hidden;
        Self {
            w_ih: uniform(input, g, k, rng),
            w_hh: uniform(hidden, g, k, rng),
            b_ih: uniform(1, g, k, rng),
            b_hh: uniform(1, g, k, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_ih: Array2::zeros(self.w_ih.raw_dim()),
            w_hh: Array2::zeros(self.w_hh.raw_dim()),
            b_ih: Array2::zeros(self.b_ih.raw_dim()),
            b_hh: Array2::zeros(self.b_hh.raw_dim()),
        }
    }
}

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub emb_in: Array2<f64>,
    pub enc: Vec<RnnLayerParams>,
    pub emb_out: Array2<f64>,
    pub dec: Vec<RnnLayerParams>,
    /// Combines [decoder hidden; attention context] into the attentional state.
    pub w_att: Array2<f64>,
    pub b_att: Array2<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array2<f64>,
}

impl NetParams {
    pub fn init(shape: &NetShape, rng: &mut ChaCha20Rng) -> Self {
        let e = shape.embedding;
        let h = shape.hidden;
        let k_att = 1.0 / (2.0 * h as f64).sqrt();
        let k_out = 1.0 / (h as f64).sqrt();
        let layer_inputs = |first: usize| {
            (0..shape.layers).map(move |l| if l == 0 { first } else { h })
        };
        Self {
            emb_in: uniform(shape.input_vocab, e, 0.1, rng),
            enc: layer_inputs(e)
                .map(|inp| RnnLayerParams::init(shape.cell, inp, h, rng))
                .collect(),
            emb_out: uniform(shape.output_vocab, e, 0.1, rng),
            dec: layer_inputs(e)
                .map(|inp| RnnLayerParams::init(shape.cell, inp, h, rng))
                .collect(),
            w_att: uniform(2 * h, h, k_att, rng),
            b_att: uniform(1, h, k_att, rng),
            w_out: uniform(h, shape.output_vocab, k_out, rng),
            b_out: uniform(1, shape.output_vocab, k_out, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            emb_in: Array2::zeros(self.emb_in.raw_dim()),
            enc: self.enc.iter().map(RnnLayerParams::zeros_like).collect(),
            emb_out: Array2::zeros(self.emb_out.raw_dim()),
            dec: self.dec.iter().map(RnnLayerParams::zeros_like).collect(),
            w_att: Array2::zeros(self.w_att.raw_dim()),
            b_att: Array2::zeros(self.b_att.raw_dim()),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_out: Array2::zeros(self.b_out.raw_dim()),
        }
    }

    /// Named views over every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![("emb_in".into(), &self.emb_in)];
        for (l, p) in self.enc.iter().enumerate() {
            out.push((format!("enc.l{l}.w_ih"), &p.w_ih));
            out.push((format!("enc.l{l}.w_hh"), &p.w_hh));
            out.push((format!("enc.l{l}.b_ih"), &p.b_ih));
            out.push((format!("enc.l{l}.b_hh"), &p.b_hh));
        }
        out.push(("emb_out".into(), &self.emb_out));
        for (l, p) in self.dec.iter().enumerate() {
            out.push((format!("dec.l{l}.w_ih"), &p.w_ih));
            out.push((format!("dec.l{l}.w_hh"), &p.w_hh));
            out.push((format!("dec.l{l}.b_ih"), &p.b_ih));
            out.push((format!("dec.l{l}.b_hh"), &p.b_hh));
        }
        out.push(("w_att".into(), &self.w_att));
        out.push(("b_att".into(), &self.b_att));
        out.push(("w_out".into(), &self.w_out));
        out.push(("b_out".into(), &self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![("emb_in".into(), &mut self.emb_in)];
        for (l, p) in self.enc.iter_mut().enumerate() {
            out.push((format!("enc.l{l}.w_ih"), &mut p.w_ih));
            out.push((format!("enc.l{l}.w_hh"), &mut p.w_hh));
            out.push((format!("enc.l{l}.b_ih"), &mut p.b_ih));
            out.push((format!("enc.l{l}.b_hh"), &mut p.b_hh));
        }
        out.push(("emb_out".into(), &mut self.emb_out));
        for (l, p) in self.dec.iter_mut().enumerate() {
            out.push((format!("dec.l{l}.w_ih"), &mut p.w_ih));
            out.push((format!("dec.l{l}.w_hh"), &mut p.w_hh));
            out.push((format!("dec.l{l}.b_ih"), &mut p.b_ih));
            out.push((format!("dec.l{l}.b_hh"), &mut p.b_hh));
        }
        out.push(("w_att".into(), &mut self.w_att));
        out.push(("b_att".into(), &mut self.b_att));
        out.push(("w_out".into(), &mut self.w_out));
        out.push(("b_out".into(), &mut self.b_out));
        out
    }
}

fn uniform(rows: usize, cols: usize, k: f64, rng: &mut ChaCha20Rng) -> Array2<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-k..k)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data")
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gather embedding rows for a batch of token ids.
fn embed(table: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (b, &id) in ids.iter().enumerate() {
        out.row_mut(b).assign(&table.row(id));
    }
    out
}

fn scatter_embedding_grad(grad: &mut Array2<f64>, ids: &[usize], dx: &Array2<f64>) {
    for (b, &id) in ids.iter().enumerate() {
        let mut row = grad.row_mut(id);
        row += &dx.row(b);
    }
}

/// Row-wise softmax with the max-shift trick.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    probs
}

/// Per-step cell activations cached for the backward pass.
enum GateCache {
    Gru {
        r: Array2<f64>,
        z: Array2<f64>,
        n: Array2<f64>,
        ghn: Array2<f64>,
    },
    Lstm {
        i: Array2<f64>,
        f: Array2<f64>,
        g: Array2<f64>,
        o: Array2<f64>,
        c_prev: Array2<f64>,
        c: Array2<f64>,
    },
}

struct LayerStep {
    /// Layer input after dropout (what the cell consumed).
    x: Array2<f64>,
    drop_mask: Option<Array2<f64>>,
    h_prev: Array2<f64>,
    gate: GateCache,
}

/// Recurrent state of one layer.
#[derive(Clone)]
pub struct LayerState {
    pub h: Array2<f64>,
    pub c: Option<Array2<f64>>,
}

impl LayerState {
    fn zeros(kind: CellKind, batch: usize, hidden: usize) -> Self {
        Self {
            h: Array2::zeros((batch, hidden)),
            c: match kind {
                CellKind::Gru => None,
                CellKind::Lstm => Some(Array2::zeros((batch, hidden))),
            },
        }
    }
}

fn cell_forward(
    kind: CellKind,
    p: &RnnLayerParams,
    x: &Array2<f64>,
    state: &LayerState,
) -> (LayerState, GateCache) {
    let h = state.h.ncols();
    match kind {
        CellKind::Gru => {
            let gi = x.dot(&p.w_ih) + &p.b_ih;
            let gh = state.h.dot(&p.w_hh) + &p.b_hh;
            let r = (&gi.slice(s![.., 0..h]) + &gh.slice(s![.., 0..h])).mapv(sigmoid);
            let z = (&gi.slice(s![.., h..2 * h]) + &gh.slice(s![.., h..2 * h])).mapv(sigmoid);
            let ghn = gh.slice(s![.., 2 * h..3 * h]).to_owned();
            let n = (&gi.slice(s![.., 2 * h..3 * h]) + &(&r * &ghn)).mapv(f64::tanh);
            let h_new = &((1.0 - &z) * &n) + &(&z * &state.h);
            (
                LayerState { h: h_new, c: None },
                GateCache::Gru { r, z, n, ghn },
            )
        }
        CellKind::Lstm => {
            let c_prev = state.c.as_ref().expect("LSTM state has a cell").clone();
            let gates = x.dot(&p.w_ih) + &p.b_ih + &state.h.dot(&p.w_hh) + &p.b_hh;
            let i = gates.slice(s![.., 0..h]).mapv(sigmoid);
            let f = gates.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = gates.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = gates.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            let c = &(&f * &c_prev) + &(&i * &g);
            let h_new = &o * &c.mapv(f64::tanh);
            (
                LayerState {
                    h: h_new,
                    c: Some(c.clone()),
                },
                GateCache::Lstm { i, f, g, o, c_prev, c },
            )
        }
    }
}

/// Backward through one cell step. `dh`/`dc` are gradients flowing into the
/// step output; returns the gradient for the layer input and updates the
/// incoming state gradients in place to refer to the previous step.
#[allow(clippy::too_many_arguments)]
fn cell_backward(
    kind: CellKind,
    p: &RnnLayerParams,
    gp: &mut RnnLayerParams,
    step: &LayerStep,
    dh: &Array2<f64>,
    dc: Option<&Array2<f64>>,
) -> (Array2<f64>, Array2<f64>, Option<Array2<f64>>) {
    match (&step.gate, kind) {
        (GateCache::Gru { r, z, n, ghn }, CellKind::Gru) => {
            let dn = dh * &(1.0 - z);
            let dz = dh * &(&step.h_prev - n);
            let mut dh_prev = dh * z;

            let dpre_n = &dn * &(1.0 - &(n * n));
            let dr = &dpre_n * ghn;
            let dghn = &dpre_n * r;
            let dpre_r = &(&dr * r) * &(1.0 - r);
            let dpre_z = &(&dz * z) * &(1.0 - z);

            let dgi = concatenate(
                Axis(1),
                &[dpre_r.view(), dpre_z.view(), dpre_n.view()],
            )
            .expect("gate widths match");
            let dgh = concatenate(Axis(1), &[dpre_r.view(), dpre_z.view(), dghn.view()])
                .expect("gate widths match");

            general_mat_mul(1.0, &step.x.t(), &dgi, 1.0, &mut gp.w_ih);
            general_mat_mul(1.0, &step.h_prev.t(), &dgh, 1.0, &mut gp.w_hh);
            add_col_sums(&mut gp.b_ih, &dgi);
            add_col_sums(&mut gp.b_hh, &dgh);

            let dx = dgi.dot(&p.w_ih.t());
            dh_prev += &dgh.dot(&p.w_hh.t());
            (dx, dh_prev, None)
        }
        (GateCache::Lstm { i, f, g, o, c_prev, c }, CellKind::Lstm) => {
            let tc = c.mapv(f64::tanh);
            let do_ = dh * &tc;
            let mut dcell = dh * o * &(1.0 - &(&tc * &tc));
            if let Some(dc) = dc {
                dcell += dc;
            }
            let di = &dcell * g;
            let df = &dcell * c_prev;
            let dg = &dcell * i;
            let dc_prev = &dcell * f;

            let dpre_i = &(&di * i) * &(1.0 - i);
            let dpre_f = &(&df * f) * &(1.0 - f);
            let dpre_g = &dg * &(1.0 - &(g * g));
            let dpre_o = &(&do_ * o) * &(1.0 - o);
            let dgates = concatenate(
                Axis(1),
                &[dpre_i.view(), dpre_f.view(), dpre_g.view(), dpre_o.view()],
            )
            .expect("gate widths match");

            general_mat_mul(1.0, &step.x.t(), &dgates, 1.0, &mut gp.w_ih);
            general_mat_mul(1.0, &step.h_prev.t(), &dgates, 1.0, &mut gp.w_hh);
            add_col_sums(&mut gp.b_ih, &dgates);
            add_col_sums(&mut gp.b_hh, &dgates);

            let dx = dgates.dot(&p.w_ih.t());
            let dh_prev = dgates.dot(&p.w_hh.t());
            (dx, dh_prev, Some(dc_prev))
        }
        _ => unreachable!("cache kind matches cell kind"),
    }
}

fn add_col_sums(bias_grad: &mut Array2<f64>, d: &Array2<f64>) {
    let sums = d.sum_axis(Axis(0));
    let mut row = bias_grad.row_mut(0);
    row += &sums;
}

/// Run the layer stack for one timestep, caching per-layer activations.
/// `mask` (per batch row) freezes state for padded positions.
#[allow(clippy::too_many_arguments)]
fn stack_forward(
    shape: &NetShape,
    layers: &[RnnLayerParams],
    states: &mut [LayerState],
    input: Array2<f64>,
    mask: Option<&[f64]>,
    dropout: f64,
    rng: &mut ChaCha20Rng,
    caches: &mut Vec<Vec<LayerStep>>,
) -> Array2<f64> {
    let mut x = input;
    let mut step_caches = Vec::with_capacity(layers.len());
    for (l, p) in layers.iter().enumerate() {
        let drop_mask = if dropout > 0.0 {
            let keep = 1.0 - dropout;
            let m = Array2::from_shape_fn(x.raw_dim(), |_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            x = &x * &m;
            Some(m)
        } else {
            None
        };
        let state = &states[l];
        let (mut new_state, gate) = cell_forward(shape.cell, p, &x, state);
        if let Some(mask) = mask {
            freeze_padded(&mut new_state.h, &state.h, mask);
            if let (Some(c_new), Some(c_old)) = (new_state.c.as_mut(), state.c.as_ref()) {
                freeze_padded(c_new, c_old, mask);
            }
        }
        step_caches.push(LayerStep {
            x: x.clone(),
            drop_mask,
            h_prev: state.h.clone(),
            gate,
        });
        x = new_state.h.clone();
        states[l] = new_state;
    }
    caches.push(step_caches);
    x
}

fn freeze_padded(new: &mut Array2<f64>, old: &Array2<f64>, mask: &[f64]) {
    for (b, &m) in mask.iter().enumerate() {
        if m == 0.0 {
            new.row_mut(b).assign(&old.row(b));
        }
    }
}

/// A padded training batch.
pub struct Batch {
    /// Source token ids per example (ragged; empty sources get UNK upstream).
    pub src: Vec<Vec<usize>>,
    /// Target ids per example, EOS already appended.
    pub tgt: Vec<Vec<usize>>,
}

pub struct TrainOptions {
    pub dropout: f64,
    pub teacher_forcing_ratio: f64,
}

/// Forward and backward over one batch. Accumulates into `grads` (assumed
/// zeroed) and returns (summed token loss, number of target tokens).
pub fn train_batch(
    shape: &NetShape,
    params: &NetParams,
    grads: &mut NetParams,
    batch: &Batch,
    opts: &TrainOptions,
    rng: &mut ChaCha20Rng,
) -> (f64, usize) {
    let b = batch.src.len();
    let h = shape.hidden;
    let ts = batch.src.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let tt = batch.tgt.iter().map(Vec::len).max().unwrap_or(1).max(1);

    // ---- encoder forward ----
    let mut enc_states: Vec<LayerState> = (0..shape.layers)
        .map(|_| LayerState::zeros(shape.cell, b, h))
        .collect();
    let mut enc_caches: Vec<Vec<LayerStep>> = Vec::with_capacity(ts);
    let mut enc_ids: Vec<Vec<usize>> = Vec::with_capacity(ts);
    let mut enc_masks: Vec<Vec<f64>> = Vec::with_capacity(ts);
    let mut enc_top = Array3::<f64>::zeros((b, ts, h));
    for t in 0..ts {
        let ids: Vec<usize> = batch
            .src
            .iter()
            .map(|s| s.get(t).copied().unwrap_or(super::vocab::PAD))
            .collect();
        let mask: Vec<f64> = batch
            .src
            .iter()
            .map(|s| if t < s.len() { 1.0 } else { 0.0 })
            .collect();
        let x = embed(&params.emb_in, &ids);
        let top = stack_forward(
            shape,
            &params.enc,
            &mut enc_states,
            x,
            Some(&mask),
            opts.dropout,
            rng,
            &mut enc_caches,
        );
        enc_top.slice_mut(s![.., t, ..]).assign(&top);
        enc_ids.push(ids);
        enc_masks.push(mask);
    }

    // ---- decoder forward (teacher forcing with scheduled sampling) ----
    let mut dec_states = enc_states.clone();
    let mut dec_caches: Vec<Vec<LayerStep>> = Vec::with_capacity(tt);
    let mut dec_ids: Vec<Vec<usize>> = Vec::with_capacity(tt);
    struct DecStep {
        h_top: Array2<f64>,
        alpha: Array2<f64>,
        ctx: Array2<f64>,
        att: Array2<f64>,
        probs: Array2<f64>,
        targets: Vec<usize>,
        mask: Vec<f64>,
    }
    let mut dec_steps: Vec<DecStep> = Vec::with_capacity(tt);
    let mut prev_argmax: Vec<usize> = vec![super::vocab::SOS; b];
    let mut loss_sum = 0.0;
    let mut token_count = 0usize;

    for t in 0..tt {
        let use_gold = t == 0 || rng.gen::<f64>() < opts.teacher_forcing_ratio;
        let ids: Vec<usize> = if t == 0 {
            vec![super::vocab::SOS; b]
        } else if use_gold {
            batch
                .tgt
                .iter()
                .map(|tgt| tgt.get(t - 1).copied().unwrap_or(super::vocab::PAD))
                .collect()
        } else {
            prev_argmax.clone()
        };
        let x = embed(&params.emb_out, &ids);
        let h_top = stack_forward(
            shape,
            &params.dec,
            &mut dec_states,
            x,
            None,
            opts.dropout,
            rng,
            &mut dec_caches,
        );
        let (alpha, ctx) = attention_forward(&enc_top, &h_top, &enc_masks);
        let cat = concatenate(Axis(1), &[h_top.view(), ctx.view()]).expect("widths match");
        let att = (cat.dot(&params.w_att) + &params.b_att).mapv(f64::tanh);
        let logits = att.dot(&params.w_out) + &params.b_out;
        let probs = softmax_rows(&logits);

        let targets: Vec<usize> = batch
            .tgt
            .iter()
            .map(|tgt| tgt.get(t).copied().unwrap_or(super::vocab::PAD))
            .collect();
        let mask: Vec<f64> = batch
            .tgt
            .iter()
            .map(|tgt| if t < tgt.len() { 1.0 } else { 0.0 })
            .collect();
        for (row, (&target, &m)) in probs.rows().into_iter().zip(targets.iter().zip(&mask)) {
            if m > 0.0 {
                loss_sum -= row[target].max(1e-300).ln();
                token_count += 1;
            }
        }
        prev_argmax = probs
            .rows()
            .into_iter()
            .map(|row| argmax(row.as_slice().expect("contiguous row")))
            .collect();

        dec_ids.push(ids);
        dec_steps.push(DecStep {
            h_top,
            alpha,
            ctx,
            att,
            probs,
            targets,
            mask,
        });
    }

    // ---- decoder backward ----
    let scale = 1.0 / token_count.max(1) as f64;
    let mut denc_top = Array3::<f64>::zeros((b, ts, h));
    let mut dstate: Vec<(Array2<f64>, Option<Array2<f64>>)> = (0..shape.layers)
        .map(|_| {
            (
                Array2::zeros((b, h)),
                match shape.cell {
                    CellKind::Gru => None,
                    CellKind::Lstm => Some(Array2::zeros((b, h))),
                },
            )
        })
        .collect();

    for t in (0..tt).rev() {
        let step = &dec_steps[t];
        // softmax + cross-entropy
        let mut dlogits = step.probs.clone();
        for (bi, (&target, &m)) in step.targets.iter().zip(&step.mask).enumerate() {
            if m > 0.0 {
                dlogits[[bi, target]] -= 1.0;
            } else {
                dlogits.row_mut(bi).fill(0.0);
            }
        }
        dlogits *= scale;

        // readout
        general_mat_mul(1.0, &step.att.t(), &dlogits, 1.0, &mut grads.w_out);
        add_col_sums(&mut grads.b_out, &dlogits);
        let datt = dlogits.dot(&params.w_out.t());
        let du = &datt * &(1.0 - &(&step.att * &step.att));
        let cat = concatenate(Axis(1), &[step.h_top.view(), step.ctx.view()])
            .expect("widths match");
        general_mat_mul(1.0, &cat.t(), &du, 1.0, &mut grads.w_att);
        add_col_sums(&mut grads.b_att, &du);
        let dcat = du.dot(&params.w_att.t());
        let mut dh_top = dcat.slice(s![.., 0..h]).to_owned();
        let dctx = dcat.slice(s![.., h..2 * h]).to_owned();

        attention_backward(
            &enc_top,
            &step.h_top,
            &step.alpha,
            &dctx,
            &mut dh_top,
            &mut denc_top,
        );

        // through the decoder stack at this timestep
        dh_top += &dstate[shape.layers - 1].0;
        let mut dx_down: Option<Array2<f64>> = None;
        for l in (0..shape.layers).rev() {
            let mut dh = if l == shape.layers - 1 {
                dh_top.clone()
            } else {
                dstate[l].0.clone()
            };
            if let Some(dx) = dx_down.take() {
                dh += &dx;
            }
            let dc = dstate[l].1.clone();
            let layer_cache = &dec_caches[t][l];
            let (mut dx, dh_prev, dc_prev) = cell_backward(
                shape.cell,
                &params.dec[l],
                &mut grads.dec[l],
                layer_cache,
                &dh,
                dc.as_ref(),
            );
            if let Some(m) = &layer_cache.drop_mask {
                dx *= m;
            }
            if l == 0 {
                scatter_embedding_grad(&mut grads.emb_out, &dec_ids[t], &dx);
            } else {
                dx_down = Some(dx);
            }
            dstate[l] = (dh_prev, dc_prev);
        }
    }

    // ---- encoder backward (decoder initial state came from encoder final) ----
    for t in (0..ts).rev() {
        let mut dx_down: Option<Array2<f64>> = None;
        for l in (0..shape.layers).rev() {
            let mut dh = dstate[l].0.clone();
            if l == shape.layers - 1 {
                dh += &denc_top.slice(s![.., t, ..]);
            }
            if let Some(dx) = dx_down.take() {
                dh += &dx;
            }
            let layer_cache = &enc_caches[t][l];
            let mask = &enc_masks[t];

            // split around the padding freeze: frozen rows pass gradients
            // straight through to the previous step
            let mut dh_cell = dh.clone();
            let mut dh_pass = Array2::<f64>::zeros(dh.raw_dim());
            for (bi, &m) in mask.iter().enumerate() {
                if m == 0.0 {
                    dh_pass.row_mut(bi).assign(&dh.row(bi));
                    dh_cell.row_mut(bi).fill(0.0);
                }
            }
            let (mut dc_cell, mut dc_pass) = match dstate[l].1.clone() {
                Some(dc) => {
                    let mut dc_cell = dc.clone();
                    let mut dc_pass = Array2::<f64>::zeros(dc.raw_dim());
                    for (bi, &m) in mask.iter().enumerate() {
                        if m == 0.0 {
                            dc_pass.row_mut(bi).assign(&dc.row(bi));
                            dc_cell.row_mut(bi).fill(0.0);
                        }
                    }
                    (Some(dc_cell), Some(dc_pass))
                }
                None => (None, None),
            };

            let (mut dx, mut dh_prev, dc_prev) = cell_backward(
                shape.cell,
                &params.enc[l],
                &mut grads.enc[l],
                layer_cache,
                &dh_cell,
                dc_cell.take().as_ref(),
            );
            dh_prev += &dh_pass;
            let dc_prev = match (dc_prev, dc_pass.take()) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            };
            if let Some(m) = &layer_cache.drop_mask {
                dx *= m;
            }
            // padded rows consumed a PAD embedding whose output was frozen
            // out, so their dx is legitimate (and zero) already
            if l == 0 {
                scatter_embedding_grad(&mut grads.emb_in, &enc_ids[t], &dx);
            } else {
                dx_down = Some(dx);
            }
            dstate[l] = (dh_prev, dc_prev);
        }
    }

    (loss_sum, token_count)
}

/// Dot-product attention over the (masked) encoder outputs.
fn attention_forward(
    enc_top: &Array3<f64>,
    h_top: &Array2<f64>,
    enc_masks: &[Vec<f64>],
) -> (Array2<f64>, Array2<f64>) {
    let (b, ts, h) = enc_top.dim();
    let mut scores = Array2::<f64>::zeros((b, ts));
    for bi in 0..b {
        let enc_b = enc_top.index_axis(Axis(0), bi);
        let s_b = enc_b.dot(&h_top.row(bi));
        scores.row_mut(bi).assign(&s_b);
    }
    for (t, mask) in enc_masks.iter().enumerate() {
        for (bi, &m) in mask.iter().enumerate() {
            if m == 0.0 {
                scores[[bi, t]] = ATTENTION_MASK_SCORE;
            }
        }
    }
    let alpha = softmax_rows(&scores);
    let mut ctx = Array2::<f64>::zeros((b, h));
    for bi in 0..b {
        let enc_b = enc_top.index_axis(Axis(0), bi);
        let c_b = enc_b.t().dot(&alpha.row(bi));
        ctx.row_mut(bi).assign(&c_b);
    }
    (alpha, ctx)
}

/// Backward of [`attention_forward`]: accumulates into `dh_top` and `denc_top`.
fn attention_backward(
    enc_top: &Array3<f64>,
    h_top: &Array2<f64>,
    alpha: &Array2<f64>,
    dctx: &Array2<f64>,
    dh_top: &mut Array2<f64>,
    denc_top: &mut Array3<f64>,
) {
    let (b, _ts, _h) = enc_top.dim();
    for bi in 0..b {
        let enc_b = enc_top.index_axis(Axis(0), bi);
        let alpha_b = alpha.row(bi);
        let dctx_b = dctx.row(bi);

        // ctx = alpha^T enc
        let dalpha = enc_b.dot(&dctx_b);
        let mut denc_b = denc_top.index_axis_mut(Axis(0), bi);
        general_mat_mul(
            1.0,
            &alpha_b.insert_axis(Axis(1)),
            &dctx_b.insert_axis(Axis(0)),
            1.0,
            &mut denc_b,
        );

        // softmax backward; padded positions have alpha = 0, so they stay 0
        let inner = alpha_b.dot(&dalpha);
        let dscores = &alpha_b.to_owned() * &(&dalpha - inner);

        // scores[s] = enc[s] . h
        let dh_b = enc_b.t().dot(&dscores);
        let mut dh_row = dh_top.row_mut(bi);
        dh_row += &dh_b;
        general_mat_mul(
            1.0,
            &dscores.insert_axis(Axis(1)),
            &h_top.row(bi).insert_axis(Axis(0)),
            1.0,
            &mut denc_b,
        );
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Greedy decode for a single source sequence. Returns emitted output-vocab
/// ids (EOS excluded) and the softmax probability of each emitted token.
pub fn decode_greedy(
    shape: &NetShape,
    params: &NetParams,
    src: &[usize],
    max_len: usize,
) -> (Vec<usize>, Vec<f64>) {
    let h = shape.hidden;
    let src: Vec<usize> = if src.is_empty() {
        vec![super::vocab::UNK]
    } else {
        src.to_vec()
    };
    let ts = src.len();

    let mut states: Vec<LayerState> = (0..shape.layers)
        .map(|_| LayerState::zeros(shape.cell, 1, h))
        .collect();
    let mut enc_top = Array3::<f64>::zeros((1, ts, h));
    for (t, &id) in src.iter().enumerate() {
        let mut x = embed(&params.emb_in, &[id]);
        for (l, p) in params.enc.iter().enumerate() {
            let (new_state, _) = cell_forward(shape.cell, p, &x, &states[l]);
            x = new_state.h.clone();
            states[l] = new_state;
        }
        enc_top.slice_mut(s![.., t, ..]).assign(&x);
    }

    let enc_masks: Vec<Vec<f64>> = (0..ts).map(|_| vec![1.0]).collect();
    let mut tokens = Vec::new();
    let mut probs = Vec::new();
    let mut input = super::vocab::SOS;
    for _ in 0..max_len {
        let mut x = embed(&params.emb_out, &[input]);
        for (l, p) in params.dec.iter().enumerate() {
            let (new_state, _) = cell_forward(shape.cell, p, &x, &states[l]);
            x = new_state.h.clone();
            states[l] = new_state;
        }
        let (_, ctx) = attention_forward(&enc_top, &x, &enc_masks);
        let cat = concatenate(Axis(1), &[x.view(), ctx.view()]).expect("widths match");
        let att = (cat.dot(&params.w_att) + &params.b_att).mapv(f64::tanh);
        let logits = att.dot(&params.w_out) + &params.b_out;
        let p_row = softmax_rows(&logits);
        let row = p_row.row(0);

        // never emit PAD or SOS
        let mut best = super::vocab::EOS;
        for idx in super::vocab::EOS..row.len() {
            if row[idx] > row[best] {
                best = idx;
            }
        }
        if best == super::vocab::EOS {
            break;
        }
        tokens.push(best);
        probs.push(row[best]);
        input = best;
    }
    (tokens, probs)
}

/// Adam with bias correction and global-norm gradient clipping.
pub struct Adam {
    m: NetParams,
    v: NetParams,
    t: u64,
    pub learning_rate: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(params: &NetParams, learning_rate: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            learning_rate,
        }
    }

    pub fn step(&mut self, params: &mut NetParams, grads: &mut NetParams) {
        // clip by global norm
        let norm_sq: f64 = grads
            .tensors()
            .iter()
            .map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>())
            .sum();
        let norm = norm_sq.sqrt();
        if norm > GRAD_CLIP_NORM {
            let scale = GRAD_CLIP_NORM / norm;
            for (_, g) in grads.tensors_mut() {
                g.mapv_inplace(|v| v * scale);
            }
        }

        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - Self::BETA1.powi(t);
        let bc2 = 1.0 - Self::BETA2.powi(t);
        let lr = self.learning_rate;

        let mut p_tensors = params.tensors_mut();
        let g_tensors = grads.tensors();
        let mut m_tensors = self.m.tensors_mut();
        let mut v_tensors = self.v.tensors_mut();
        for i in 0..p_tensors.len() {
            let p = &mut p_tensors[i].1;
            let g = &g_tensors[i].1;
            let m = &mut m_tensors[i].1;
            let v = &mut v_tensors[i].1;
            ndarray::Zip::from(&mut **p)
                .and(&**g)
                .and(&mut **m)
                .and(&mut **v)
                .for_each(|p, &g, m, v| {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
                });
        }
    }
}
