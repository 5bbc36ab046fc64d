//! Parameter containers and the forward/backward passes for the
//! character-level encoder-decoder with additive attention.
//!
//! Everything runs single-threaded in f64 on one example at a time, which
//! keeps training bit-reproducible for a given seed.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn outer_into(acc: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    let prod = a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)));
    *acc += &prod;
}

pub(crate) fn softmax(x: &Array1<f64>) -> Array1<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = x.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// One GRU cell. Inputs are row vectors; weights are `[in, hidden]` and
/// `[hidden, hidden]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GruCell {
    pub wz: Array2<f64>,
    pub uz: Array2<f64>,
    pub bz: Array1<f64>,
    pub wr: Array2<f64>,
    pub ur: Array2<f64>,
    pub br: Array1<f64>,
    pub wh: Array2<f64>,
    pub uh: Array2<f64>,
    pub bh: Array1<f64>,
}

pub(crate) struct GruCache {
    x: Array1<f64>,
    h_prev: Array1<f64>,
    z: Array1<f64>,
    r: Array1<f64>,
    hcand: Array1<f64>,
}

impl GruCell {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize) -> GruCell {
        GruCell {
            wz: init_matrix(rng, in_dim, hidden),
            uz: init_matrix(rng, hidden, hidden),
            bz: Array1::zeros(hidden),
            wr: init_matrix(rng, in_dim, hidden),
            ur: init_matrix(rng, hidden, hidden),
            br: Array1::zeros(hidden),
            wh: init_matrix(rng, in_dim, hidden),
            uh: init_matrix(rng, hidden, hidden),
            bh: Array1::zeros(hidden),
        }
    }

    pub fn zeros_like(&self) -> GruCell {
        GruCell {
            wz: Array2::zeros(self.wz.raw_dim()),
            uz: Array2::zeros(self.uz.raw_dim()),
            bz: Array1::zeros(self.bz.raw_dim()),
            wr: Array2::zeros(self.wr.raw_dim()),
            ur: Array2::zeros(self.ur.raw_dim()),
            br: Array1::zeros(self.br.raw_dim()),
            wh: Array2::zeros(self.wh.raw_dim()),
            uh: Array2::zeros(self.uh.raw_dim()),
            bh: Array1::zeros(self.bh.raw_dim()),
        }
    }

    /// z = s(xWz + hUz + bz); r = s(xWr + hUr + br);
    /// c = tanh(xWh + (r*h)Uh + bh); h' = (1-z)*h + z*c
    pub fn step(&self, x: &Array1<f64>, h_prev: &Array1<f64>) -> (Array1<f64>, GruCache) {
        let z = (x.dot(&self.wz) + h_prev.dot(&self.uz) + &self.bz).mapv(sigmoid);
        let r = (x.dot(&self.wr) + h_prev.dot(&self.ur) + &self.br).mapv(sigmoid);
        let rh = &r * h_prev;
        let hcand = (x.dot(&self.wh) + rh.dot(&self.uh) + &self.bh).mapv(f64::tanh);
        let h_new = (1.0 - &z) * h_prev + &z * &hcand;
        let cache = GruCache { x: x.clone(), h_prev: h_prev.clone(), z, r, hcand };
        (h_new, cache)
    }

    /// Accumulates parameter gradients and returns (dx, dh_prev).
    pub fn backward(
        &self,
        grads: &mut GruCell,
        cache: &GruCache,
        dh_new: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let GruCache { x, h_prev, z, r, hcand } = cache;
        let dz = dh_new * &(hcand - h_prev);
        let dhcand = dh_new * z;
        let mut dh_prev = dh_new * &(1.0 - z);

        let dhcand_pre = &dhcand * &(1.0 - &(hcand * hcand));
        let rh = r * h_prev;
        outer_into(&mut grads.wh, x, &dhcand_pre);
        outer_into(&mut grads.uh, &rh, &dhcand_pre);
        grads.bh += &dhcand_pre;
        let mut dx = dhcand_pre.dot(&self.wh.t());
        let drh = dhcand_pre.dot(&self.uh.t());
        let dr = &drh * h_prev;
        dh_prev += &(&drh * r);

        let dz_pre = &dz * z * &(1.0 - z);
        outer_into(&mut grads.wz, x, &dz_pre);
        outer_into(&mut grads.uz, h_prev, &dz_pre);
        grads.bz += &dz_pre;
        dx += &dz_pre.dot(&self.wz.t());
        dh_prev += &dz_pre.dot(&self.uz.t());

        let dr_pre = &dr * r * &(1.0 - r);
        outer_into(&mut grads.wr, x, &dr_pre);
        outer_into(&mut grads.ur, h_prev, &dr_pre);
        grads.br += &dr_pre;
        dx += &dr_pre.dot(&self.wr.t());
        dh_prev += &dr_pre.dot(&self.ur.t());

        (dx, dh_prev)
    }
}

/// Full parameter set of the transducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Params {
    pub embedding: Array2<f64>,
    pub encoder: Vec<GruCell>,
    pub decoder: Vec<GruCell>,
    /// Per-layer bridge from the final encoder state to the initial decoder
    /// state.
    pub bridge_w: Vec<Array2<f64>>,
    pub bridge_b: Vec<Array1<f64>>,
    pub attn_w: Array2<f64>,
    pub attn_u: Array2<f64>,
    pub attn_v: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl Params {
    pub fn new(
        rng: &mut ChaCha8Rng,
        vocab: usize,
        emb: usize,
        hidden: usize,
        layers: usize,
    ) -> Params {
        let mut encoder = Vec::new();
        let mut decoder = Vec::new();
        let mut bridge_w = Vec::new();
        let mut bridge_b = Vec::new();
        for l in 0..layers {
            let enc_in = if l == 0 { emb } else { hidden };
            let dec_in = if l == 0 { emb + hidden } else { hidden };
            encoder.push(GruCell::new(rng, enc_in, hidden));
            decoder.push(GruCell::new(rng, dec_in, hidden));
            bridge_w.push(init_matrix(rng, hidden, hidden));
            bridge_b.push(Array1::zeros(hidden));
        }
        Params {
            embedding: init_matrix(rng, vocab, emb),
            encoder,
            decoder,
            bridge_w,
            bridge_b,
            attn_w: init_matrix(rng, hidden, hidden),
            attn_u: init_matrix(rng, hidden, hidden),
            attn_v: Array1::from_shape_fn(hidden, |_| {
                rng.random_range(-0.1..0.1)
            }),
            out_w: init_matrix(rng, hidden * 2, vocab),
            out_b: Array1::zeros(vocab),
        }
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            encoder: self.encoder.iter().map(GruCell::zeros_like).collect(),
            decoder: self.decoder.iter().map(GruCell::zeros_like).collect(),
            bridge_w: self.bridge_w.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
            bridge_b: self.bridge_b.iter().map(|v| Array1::zeros(v.raw_dim())).collect(),
            attn_w: Array2::zeros(self.attn_w.raw_dim()),
            attn_u: Array2::zeros(self.attn_u.raw_dim()),
            attn_v: Array1::zeros(self.attn_v.raw_dim()),
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.raw_dim()),
        }
    }

    /// Every tensor as a flat mutable slice, in a fixed order shared by all
    /// `Params` of the same shape; used by the optimizer, gradient clipping
    /// and the finite-difference tests.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        v.push(self.embedding.as_slice_mut().unwrap());
        for cell in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.push(cell.wz.as_slice_mut().unwrap());
            v.push(cell.uz.as_slice_mut().unwrap());
            v.push(cell.bz.as_slice_mut().unwrap());
            v.push(cell.wr.as_slice_mut().unwrap());
            v.push(cell.ur.as_slice_mut().unwrap());
            v.push(cell.br.as_slice_mut().unwrap());
            v.push(cell.wh.as_slice_mut().unwrap());
            v.push(cell.uh.as_slice_mut().unwrap());
            v.push(cell.bh.as_slice_mut().unwrap());
        }
        for m in self.bridge_w.iter_mut() {
            v.push(m.as_slice_mut().unwrap());
        }
        for m in self.bridge_b.iter_mut() {
            v.push(m.as_slice_mut().unwrap());
        }
        v.push(self.attn_w.as_slice_mut().unwrap());
        v.push(self.attn_u.as_slice_mut().unwrap());
        v.push(self.attn_v.as_slice_mut().unwrap());
        v.push(self.out_w.as_slice_mut().unwrap());
        v.push(self.out_b.as_slice_mut().unwrap());
        v
    }
}

pub(crate) struct EncoderOutput {
    /// Post-dropout top-layer outputs, one row per source position.
    pub memory: Vec<Array1<f64>>,
    /// Final (pre-dropout) hidden state per layer.
    pub final_states: Vec<Array1<f64>>,
    caches: Vec<Vec<GruCache>>,
    masks: Vec<Vec<Option<Array1<f64>>>>,
    inputs: Vec<usize>,
}

/// Inverted-dropout mask, or `None` when dropout is off.
fn dropout_mask(
    rng: &mut Option<&mut ChaCha8Rng>,
    dim: usize,
    p: f64,
) -> Option<Array1<f64>> {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 - p;
            Some(Array1::from_shape_fn(dim, |_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }))
        }
        _ => None,
    }
}

pub(crate) fn encode(
    params: &Params,
    input_ids: &[usize],
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> EncoderOutput {
    let layers = params.encoder.len();
    let hidden = params.attn_w.nrows();
    let mut states: Vec<Array1<f64>> = vec![Array1::zeros(hidden); layers];
    let mut caches: Vec<Vec<GruCache>> = (0..layers).map(|_| Vec::new()).collect();
    let mut masks: Vec<Vec<Option<Array1<f64>>>> = (0..layers).map(|_| Vec::new()).collect();
    let mut memory = Vec::with_capacity(input_ids.len());
    for &id in input_ids {
        let mut x = params.embedding.row(id).to_owned();
        for l in 0..layers {
            let (h, cache) = params.encoder[l].step(&x, &states[l]);
            caches[l].push(cache);
            states[l] = h.clone();
            let mask = dropout_mask(&mut rng, hidden, dropout);
            x = match &mask {
                Some(m) => &h * m,
                None => h,
            };
            masks[l].push(mask);
        }
        memory.push(x);
    }
    EncoderOutput {
        memory,
        final_states: states,
        caches,
        masks,
        inputs: input_ids.to_vec(),
    }
}

pub(crate) struct DecodeStepCache {
    input_id: usize,
    ctx: Array1<f64>,
    alpha: Array1<f64>,
    attn_tanh: Vec<Array1<f64>>,
    query: Array1<f64>,
    gru_caches: Vec<GruCache>,
    masks: Vec<Option<Array1<f64>>>,
    top_out: Array1<f64>,
    probs: Array1<f64>,
}

impl DecodeStepCache {
    pub(crate) fn probs_view(&self) -> &Array1<f64> {
        &self.probs
    }
}

/// Additive attention over the encoder memory for one decoder step.
pub(crate) fn attend(
    params: &Params,
    memory: &[Array1<f64>],
    enc_proj: &[Array1<f64>],
    query: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>, Vec<Array1<f64>>) {
    let q_proj = query.dot(&params.attn_w);
    let mut scores = Array1::zeros(memory.len());
    let mut tanhs = Vec::with_capacity(memory.len());
    for (j, proj) in enc_proj.iter().enumerate() {
        let t = (&q_proj + proj).mapv(f64::tanh);
        scores[j] = t.dot(&params.attn_v);
        tanhs.push(t);
    }
    let alpha = softmax(&scores);
    let hidden = memory[0].len();
    let mut ctx = Array1::zeros(hidden);
    for (j, mem) in memory.iter().enumerate() {
        ctx += &(mem * alpha[j]);
    }
    (ctx, alpha, tanhs)
}

/// One decoder step under teacher forcing (or sampled input). Returns the new
/// per-layer states and the cache for backward.
#[allow(clippy::too_many_arguments)]
pub(crate) fn decode_step(
    params: &Params,
    memory: &[Array1<f64>],
    enc_proj: &[Array1<f64>],
    states: &[Array1<f64>],
    input_id: usize,
    dropout: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> (Vec<Array1<f64>>, DecodeStepCache) {
    let layers = params.decoder.len();
    let query = states[layers - 1].clone();
    let (ctx, alpha, attn_tanh) = attend(params, memory, enc_proj, &query);
    let emb = params.embedding.row(input_id).to_owned();
    let mut x = ndarray::concatenate![Axis(0), emb, ctx.clone()];
    let mut new_states = Vec::with_capacity(layers);
    let mut gru_caches = Vec::with_capacity(layers);
    let mut masks = Vec::with_capacity(layers);
    for l in 0..layers {
        let (h, cache) = params.decoder[l].step(&x, &states[l]);
        gru_caches.push(cache);
        new_states.push(h.clone());
        let mask = dropout_mask(rng, h.len(), dropout);
        x = match &mask {
            Some(m) => &h * m,
            None => h,
        };
        masks.push(mask);
    }
    let top_out = x;
    let combined = ndarray::concatenate![Axis(0), top_out.clone(), ctx.clone()];
    let logits = combined.dot(&params.out_w) + &params.out_b;
    let probs = softmax(&logits);
    let cache = DecodeStepCache {
        input_id,
        ctx,
        alpha,
        attn_tanh,
        query,
        gru_caches,
        masks,
        top_out,
        probs,
    };
    (new_states, cache)
}

pub(crate) struct ForwardPass {
    pub loss: f64,
    pub target_len: usize,
    enc: EncoderOutput,
    steps: Vec<DecodeStepCache>,
    golds: Vec<usize>,
    bridge_pre: Vec<Array1<f64>>,
}

/// Runs the full teacher-forced forward pass, with optional scheduled
/// sampling, and returns everything backward needs.
pub(crate) fn forward(
    params: &Params,
    input_ids: &[usize],
    target_ids: &[usize],
    bos: usize,
    dropout: f64,
    sample_prob: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> ForwardPass {
    let enc = encode(params, input_ids, dropout, rng.as_deref_mut());
    let enc_proj: Vec<Array1<f64>> =
        enc.memory.iter().map(|m| m.dot(&params.attn_u)).collect();
    let layers = params.decoder.len();
    let mut bridge_pre = Vec::with_capacity(layers);
    let mut states: Vec<Array1<f64>> = Vec::with_capacity(layers);
    for l in 0..layers {
        let pre = enc.final_states[l].dot(&params.bridge_w[l]) + &params.bridge_b[l];
        states.push(pre.mapv(f64::tanh));
        bridge_pre.push(pre);
    }
    let mut steps = Vec::with_capacity(target_ids.len());
    let mut loss = 0.0;
    let mut prev_token = bos;
    for (t, &gold) in target_ids.iter().enumerate() {
        let input_id = if t == 0 {
            bos
        } else {
            let sample = match rng.as_deref_mut() {
                Some(r) if sample_prob > 0.0 => r.random::<f64>() < sample_prob,
                _ => false,
            };
            if sample {
                prev_token
            } else {
                target_ids[t - 1]
            }
        };
        let (new_states, cache) =
            decode_step(params, &enc.memory, &enc_proj, &states, input_id, dropout, &mut rng);
        loss -= cache.probs[gold].max(f64::MIN_POSITIVE).ln();
        // Greedy argmax for scheduled sampling at the next step.
        prev_token = argmax(&cache.probs);
        states = new_states;
        steps.push(cache);
    }
    ForwardPass {
        loss,
        target_len: target_ids.len(),
        enc,
        steps,
        golds: target_ids.to_vec(),
        bridge_pre,
    }
}

pub(crate) fn argmax(x: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

/// Backpropagates the summed cross-entropy loss of a forward pass,
/// accumulating into `grads`.
pub(crate) fn backward(params: &Params, pass: &ForwardPass, grads: &mut Params) {
    let layers = params.decoder.len();
    let hidden = params.attn_w.nrows();
    let src_len = pass.enc.memory.len();
    let emb_dim = params.embedding.ncols();

    let mut d_states: Vec<Array1<f64>> = vec![Array1::zeros(hidden); layers];
    let mut d_memory: Vec<Array1<f64>> = vec![Array1::zeros(hidden); src_len];

    for (t, step) in pass.steps.iter().enumerate().rev() {
        // Output layer.
        let mut d_logits = step.probs.clone();
        d_logits[pass.golds[t]] -= 1.0;
        let combined = ndarray::concatenate![Axis(0), step.top_out.clone(), step.ctx.clone()];
        outer_into(&mut grads.out_w, &combined, &d_logits);
        grads.out_b += &d_logits;
        let d_combined = d_logits.dot(&params.out_w.t());
        let mut d_top_out = d_combined.slice(ndarray::s![..hidden]).to_owned();
        let mut d_ctx = d_combined.slice(ndarray::s![hidden..]).to_owned();

        // Through the stacked GRU layers at this step.
        let mut d_from_above: Option<Array1<f64>> = None;
        let mut d_x0 = Array1::zeros(emb_dim + hidden);
        for l in (0..layers).rev() {
            let mut dh = std::mem::replace(&mut d_states[l], Array1::zeros(hidden));
            let d_out = if l == layers - 1 {
                std::mem::replace(&mut d_top_out, Array1::zeros(0))
            } else {
                d_from_above.take().unwrap()
            };
            // Undo the dropout on this layer's output.
            let d_out = match &step.masks[l] {
                Some(m) => &d_out * m,
                None => d_out,
            };
            dh += &d_out;
            let (dx, dh_prev) =
                params.decoder[l].backward(&mut grads.decoder[l], &step.gru_caches[l], &dh);
            d_states[l] = dh_prev;
            if l == 0 {
                d_x0 = dx;
            } else {
                d_from_above = Some(dx);
            }
        }
        // Layer-0 input was [embedding; context].
        let d_emb = d_x0.slice(ndarray::s![..emb_dim]).to_owned();
        d_ctx += &d_x0.slice(ndarray::s![emb_dim..]);
        grads
            .embedding
            .row_mut(step.input_id)
            .zip_mut_with(&d_emb, |g, d| *g += d);

        // Attention backward; the query gradient belongs to the previous
        // step's top state, which d_states[top] now represents.
        let mut d_alpha = Array1::zeros(src_len);
        for j in 0..src_len {
            d_alpha[j] = d_ctx.dot(&pass.enc.memory[j]);
            d_memory[j] += &(&d_ctx * step.alpha[j]);
        }
        let weighted: f64 = (0..src_len).map(|j| step.alpha[j] * d_alpha[j]).sum();
        let mut d_query = Array1::zeros(hidden);
        for j in 0..src_len {
            let d_score = step.alpha[j] * (d_alpha[j] - weighted);
            let t_j = &step.attn_tanh[j];
            grads.attn_v += &(t_j * d_score);
            let d_pre = (&params.attn_v * d_score) * &(1.0 - &(t_j * t_j));
            outer_into(&mut grads.attn_w, &step.query, &d_pre);
            outer_into(&mut grads.attn_u, &pass.enc.memory[j], &d_pre);
            d_query += &d_pre.dot(&params.attn_w.t());
            d_memory[j] += &d_pre.dot(&params.attn_u.t());
        }
        d_states[layers - 1] += &d_query;
    }

    // Initial decoder states came through the bridge.
    let mut d_enc_final: Vec<Array1<f64>> = Vec::with_capacity(layers);
    for l in 0..layers {
        let tanh = pass.bridge_pre[l].mapv(f64::tanh);
        let d_pre = &d_states[l] * &(1.0 - &(&tanh * &tanh));
        outer_into(&mut grads.bridge_w[l], &pass.enc.final_states[l], &d_pre);
        grads.bridge_b[l] += &d_pre;
        d_enc_final.push(d_pre.dot(&params.bridge_w[l].t()));
    }

    // Encoder BPTT.
    let enc_layers = params.encoder.len();
    let mut d_h: Vec<Array1<f64>> = d_enc_final;
    for t in (0..src_len).rev() {
        let mut d_from_above: Option<Array1<f64>> = None;
        for l in (0..enc_layers).rev() {
            let mut dh = std::mem::replace(&mut d_h[l], Array1::zeros(hidden));
            // Output gradient: attention memory for the top layer, the layer
            // above's input gradient otherwise.
            let d_out_raw = if l == enc_layers - 1 {
                d_memory[t].clone()
            } else {
                d_from_above.take().unwrap()
            };
            let d_out = match &pass.enc.masks[l][t] {
                Some(m) => &d_out_raw * m,
                None => d_out_raw,
            };
            dh += &d_out;
            let (dx, dh_prev) =
                params.encoder[l].backward(&mut grads.encoder[l], &pass.enc.caches[l][t], &dh);
            d_h[l] = dh_prev;
            if l == 0 {
                grads
                    .embedding
                    .row_mut(pass.enc.inputs[t])
                    .zip_mut_with(&dx, |g, d| *g += d);
            } else {
                d_from_above = Some(dx);
            }
        }
    }
}
