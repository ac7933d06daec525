//! Forward pass, weighted cross-entropy and backpropagation through time.
//!
//! Sequences are processed as a batch in time-major layout: row `t·B + b`
//! holds frame `t` of sequence `b`. Each recurrent direction first applies
//! its input weights to the whole sequence with one matrix product, then
//! runs the recurrence one step at a time.

use alloc::vec;
use alloc::vec::Vec;

use super::arch::{CellKind, DenseBlock, ModelParams, ParamLayout, RecurrentBlock};
use super::NnError;
use crate::dataset::{FeatureWindow, Label};
use crate::gemm::{gemm, Mat};
use crate::rng::{self, Rng};

/// Probabilities are clamped to `[P_CLAMP, 1 − P_CLAMP]` before logs.
pub const P_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A batch of equal-length sequences in time-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch: usize,
    pub steps: usize,
    pub channels: usize,
    /// `steps·batch × channels`, row `t·batch + b`.
    pub x: Vec<f64>,
}

impl Batch {
    pub fn from_windows(windows: &[&FeatureWindow]) -> Result<Self, NnError> {
        let first = windows.first().ok_or(NnError::EmptyBatch)?;
        let (steps, channels) = (first.frames, first.channels);
        let batch = windows.len();
        let mut x = vec![0.0; steps * batch * channels];
        for (b, w) in windows.iter().enumerate() {
            if w.frames != steps || w.channels != channels {
                return Err(NnError::Shape {
                    expected: (steps, channels),
                    actual: (w.frames, w.channels),
                });
            }
            for t in 0..steps {
                let row = (t * batch + b) * channels;
                x[row..row + channels].copy_from_slice(w.frame(t));
            }
        }
        Ok(Self {
            batch,
            steps,
            channels,
            x,
        })
    }

    /// The batch with its time axis reversed.
    pub fn reversed(&self) -> Self {
        let row = self.batch * self.channels;
        let mut x = Vec::with_capacity(self.x.len());
        for t in (0..self.steps).rev() {
            x.extend_from_slice(&self.x[t * row..(t + 1) * row]);
        }
        Self { x, ..self.clone() }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Activations of one direction of one recurrent layer, all in time order.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// Gate activations, `T·B × G·h`.
    gates: Vec<f64>,
    /// Hidden state that entered each step, `T·B × h`.
    h_prev: Vec<f64>,
    /// LSTM cell state after each step, `T·B × h`.
    c: Vec<f64>,
    /// GRU `r ⊙ h_prev`, `T·B × h`.
    rh: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Layer input, `T·B × d`.
    input: Vec<f64>,
    dirs: [DirectionCache; 2],
}

#[derive(Debug, Clone)]
struct DenseCache {
    /// Input after dropout, `B × in`.
    input: Vec<f64>,
    /// Dropout multipliers (0 or 1/(1−p)); empty when no dropout was applied.
    mask: Vec<f64>,
    /// Pre-activation, `B × out`.
    pre: Vec<f64>,
}

/// Everything [`backward`] needs from a training-mode [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    n_params: usize,
    batch: usize,
    steps: usize,
    layers: Vec<LayerCache>,
    dense: Vec<DenseCache>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Pre-activations of dense layer `i`, `batch × output`.
    pub fn dense_pre(&self, i: usize) -> &[f64] {
        &self.dense[i].pre
    }
}

/// Time index processed at step `s` in direction `dir`.
#[inline]
fn time_of(dir: usize, s: usize, steps: usize) -> usize {
    if dir == 0 {
        s
    } else {
        steps - 1 - s
    }
}

fn run_direction(
    cell: CellKind,
    w: &[f64],
    block: &RecurrentBlock,
    h: usize,
    input: &[f64],
    batch: usize,
    steps: usize,
    dir: usize,
    out: &mut [f64],
) -> DirectionCache {
    let g = cell.gates();
    let gh = g * h;
    let d = block.input;
    let rows = batch * steps;
    let w_in = &w[block.w_in.clone()];
    let w_rec = &w[block.w_rec.clone()];
    let bias = &w[block.bias.clone()];

    let mut gates = vec![0.0; rows * gh];
    for row in gates.chunks_exact_mut(gh) {
        row.copy_from_slice(bias);
    }
    gemm(rows, d, gh, 1.0, Mat::n(input, d), Mat::t(w_in, d), 1.0, &mut gates, gh);

    let mut h_prev = vec![0.0; rows * h];
    let mut c = if cell == CellKind::Lstm { vec![0.0; rows * h] } else { Vec::new() };
    let mut rh = if cell == CellKind::Gru { vec![0.0; rows * h] } else { Vec::new() };
    let mut h_state = vec![0.0; batch * h];
    let mut c_state = vec![0.0; batch * h];

    for s in 0..steps {
        let t = time_of(dir, s, steps);
        let gblock = &mut gates[t * batch * gh..(t + 1) * batch * gh];
        h_prev[t * batch * h..(t + 1) * batch * h].copy_from_slice(&h_state);
        match cell {
            CellKind::Lstm => {
                if s > 0 {
                    gemm(batch, h, gh, 1.0, Mat::n(&h_state, h), Mat::t(w_rec, h), 1.0, gblock, gh);
                }
                let cblock = &mut c[t * batch * h..(t + 1) * batch * h];
                for b in 0..batch {
                    let z = &mut gblock[b * gh..(b + 1) * gh];
                    for j in 0..h {
                        let i = sigmoid(z[j]);
                        let f = sigmoid(z[h + j]);
                        let gg = tanh(z[2 * h + j]);
                        let o = sigmoid(z[3 * h + j]);
                        z[j] = i;
                        z[h + j] = f;
                        z[2 * h + j] = gg;
                        z[3 * h + j] = o;
                        let cv = f * c_state[b * h + j] + i * gg;
                        c_state[b * h + j] = cv;
                        cblock[b * h + j] = cv;
                        h_state[b * h + j] = o * tanh(cv);
                    }
                }
            }
            CellKind::Gru => {
                if s > 0 {
                    gemm(batch, h, 2 * h, 1.0, Mat::n(&h_state, h), Mat::t(&w_rec[..2 * h * h], h), 1.0, gblock, gh);
                }
                let rblock = &mut rh[t * batch * h..(t + 1) * batch * h];
                for b in 0..batch {
                    let z = &mut gblock[b * gh..(b + 1) * gh];
                    for j in 0..h {
                        z[j] = sigmoid(z[j]);
                        let r = sigmoid(z[h + j]);
                        z[h + j] = r;
                        rblock[b * h + j] = r * h_state[b * h + j];
                    }
                }
                if s > 0 {
                    gemm(
                        batch,
                        h,
                        h,
                        1.0,
                        Mat::n(rblock, h),
                        Mat::t(&w_rec[2 * h * h..], h),
                        1.0,
                        &mut gblock[2 * h..],
                        gh,
                    );
                }
                for b in 0..batch {
                    let z = &mut gblock[b * gh..(b + 1) * gh];
                    for j in 0..h {
                        let n = tanh(z[2 * h + j]);
                        z[2 * h + j] = n;
                        let zz = z[j];
                        h_state[b * h + j] = (1.0 - zz) * n + zz * h_state[b * h + j];
                    }
                }
            }
        }
        for b in 0..batch {
            let row = (t * batch + b) * 2 * h + dir * h;
            out[row..row + h].copy_from_slice(&h_state[b * h..(b + 1) * h]);
        }
    }
    DirectionCache { gates, h_prev, c, rh }
}

fn dropout_mask(rng: &mut Rng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng::uniform(rng, 0.0, 1.0) >= p { keep } else { 0.0 })
        .collect()
}

/// Runs the network on `batch`. In [`Mode::Train`] dropout masks are drawn
/// from `rng`; in [`Mode::Eval`] `rng` is untouched.
pub fn forward(params: &ModelParams, batch: &Batch, mode: Mode, rng: &mut Rng) -> Result<ForwardCache, NnError> {
    let arch = &params.arch;
    if batch.channels != arch.input_channels {
        return Err(NnError::Shape {
            expected: (batch.steps, arch.input_channels),
            actual: (batch.steps, batch.channels),
        });
    }
    if batch.batch == 0 || batch.steps == 0 {
        return Err(NnError::EmptyBatch);
    }
    let layout = params.layout();
    let w = &params.values;
    let (bsz, steps, h) = (batch.batch, batch.steps, arch.hidden_size);
    let rows = bsz * steps;

    let mut layers = Vec::with_capacity(arch.recurrent_layers);
    let mut input = batch.x.clone();
    for blocks in &layout.recurrent {
        let mut out = vec![0.0; rows * 2 * h];
        let fwd = run_direction(arch.cell, w, &blocks[0], h, &input, bsz, steps, 0, &mut out);
        let bwd = run_direction(arch.cell, w, &blocks[1], h, &input, bsz, steps, 1, &mut out);
        layers.push(LayerCache {
            input: core::mem::replace(&mut input, out),
            dirs: [fwd, bwd],
        });
    }
    let top = input;

    // final forward state (t = T−1) beside final backward state (t = 0)
    let mut act = vec![0.0; bsz * 2 * h];
    for b in 0..bsz {
        let last = ((steps - 1) * bsz + b) * 2 * h;
        let first = b * 2 * h;
        act[b * 2 * h..b * 2 * h + h].copy_from_slice(&top[last..last + h]);
        act[b * 2 * h + h..(b + 1) * 2 * h].copy_from_slice(&top[first + h..first + 2 * h]);
    }

    let mut dense = Vec::with_capacity(layout.dense.len());
    let n_dense = layout.dense.len();
    for (i, blk) in layout.dense.iter().enumerate() {
        let mask = if mode == Mode::Train && arch.dropout > 0.0 {
            let m = dropout_mask(rng, act.len(), arch.dropout);
            for (a, k) in act.iter_mut().zip(&m) {
                *a *= k;
            }
            m
        } else {
            Vec::new()
        };
        let mut pre = vec![0.0; bsz * blk.output];
        for row in pre.chunks_exact_mut(blk.output) {
            row.copy_from_slice(&w[blk.bias.clone()]);
        }
        gemm(bsz, blk.input, blk.output, 1.0, Mat::n(&act, blk.input), Mat::t(&w[blk.w.clone()], blk.input), 1.0, &mut pre, blk.output);
        let next = if i + 1 < n_dense {
            pre.iter().map(|&v| v.max(0.0)).collect()
        } else {
            pre.iter().map(|&v| sigmoid(v)).collect()
        };
        dense.push(DenseCache {
            input: core::mem::replace(&mut act, next),
            mask,
            pre,
        });
    }

    Ok(ForwardCache {
        fingerprint: params.fingerprint(),
        n_params: params.len(),
        batch: bsz,
        steps,
        layers,
        dense,
        probs: act,
    })
}

/// Eval-mode probabilities.
pub fn predict(params: &ModelParams, batch: &Batch) -> Result<Vec<f64>, NnError> {
    let mut unused = rng::seeded(0);
    Ok(forward(params, batch, Mode::Eval, &mut unused)?.probs)
}

/// `−(1/B) Σ w_y [y ln p + (1−y) ln(1−p)]` with `p` clamped to
/// `[1e-7, 1 − 1e-7]`.
pub fn weighted_ce_loss(probs: &[f64], labels: &[Label], weights: (f64, f64)) -> f64 {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
            match y {
                Label::Rhotic => -weights.1 * libm::log(p),
                Label::Derhotic => -weights.0 * libm::log(1.0 - p),
            }
        })
        .sum::<f64>()
        / n
}

fn backward_direction(
    cell: CellKind,
    w: &[f64],
    grad: &mut [f64],
    block: &RecurrentBlock,
    h: usize,
    cache: &DirectionCache,
    input: &[f64],
    d_out: &[f64],
    d_input: &mut [f64],
    batch: usize,
    steps: usize,
    dir: usize,
) {
    let g = cell.gates();
    let gh = g * h;
    let d = block.input;
    let rows = batch * steps;
    let w_in = &w[block.w_in.clone()];
    let w_rec = &w[block.w_rec.clone()];

    let mut d_pre = vec![0.0; rows * gh];
    let mut dh_next = vec![0.0; batch * h];
    let mut dc_next = vec![0.0; batch * h];
    let mut dh = vec![0.0; batch * h];
    let mut d_rh = vec![0.0; batch * h];

    for s in (0..steps).rev() {
        let t = time_of(dir, s, steps);
        let base = t * batch;
        for b in 0..batch {
            let row = (base + b) * 2 * h + dir * h;
            for j in 0..h {
                dh[b * h + j] = d_out[row + j] + dh_next[b * h + j];
            }
        }
        let gates = &cache.gates[base * gh..(base + batch) * gh];
        let hp = &cache.h_prev[base * h..(base + batch) * h];
        let dblock = &mut d_pre[base * gh..(base + batch) * gh];
        match cell {
            CellKind::Lstm => {
                let cs = &cache.c[base * h..(base + batch) * h];
                let c_prev = if s == 0 {
                    None
                } else {
                    let tp = time_of(dir, s - 1, steps);
                    Some(&cache.c[tp * batch * h..(tp + 1) * batch * h])
                };
                for b in 0..batch {
                    let z = &gates[b * gh..(b + 1) * gh];
                    let dz = &mut dblock[b * gh..(b + 1) * gh];
                    for j in 0..h {
                        let (i, f, gg, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
                        let k = b * h + j;
                        let tc = tanh(cs[k]);
                        let dhv = dh[k];
                        let dc = dhv * o * (1.0 - tc * tc) + dc_next[k];
                        let cp = c_prev.map_or(0.0, |c| c[k]);
                        dz[j] = dc * gg * i * (1.0 - i);
                        dz[h + j] = dc * cp * f * (1.0 - f);
                        dz[2 * h + j] = dc * i * (1.0 - gg * gg);
                        dz[3 * h + j] = dhv * tc * o * (1.0 - o);
                        dc_next[k] = dc * f;
                    }
                }
                if s > 0 {
                    gemm(batch, gh, h, 1.0, Mat::n(dblock, gh), Mat::n(w_rec, h), 0.0, &mut dh_next, h);
                }
            }
            CellKind::Gru => {
                for b in 0..batch {
                    let z = &gates[b * gh..(b + 1) * gh];
                    let dz = &mut dblock[b * gh..(b + 1) * gh];
                    for j in 0..h {
                        let k = b * h + j;
                        let (zz, n) = (z[j], z[2 * h + j]);
                        let dhv = dh[k];
                        dz[j] = dhv * (hp[k] - n) * zz * (1.0 - zz);
                        dz[2 * h + j] = dhv * (1.0 - zz) * (1.0 - n * n);
                        dh_next[k] = dhv * zz;
                    }
                }
                if s > 0 {
                    // through U_n (r ⊙ h_prev)
                    gemm(batch, h, h, 1.0, Mat::n(&dblock[2 * h..], gh), Mat::n(&w_rec[2 * h * h..], h), 0.0, &mut d_rh, h);
                    for b in 0..batch {
                        let z = &gates[b * gh..(b + 1) * gh];
                        let dz = &mut dblock[b * gh..(b + 1) * gh];
                        for j in 0..h {
                            let k = b * h + j;
                            let r = z[h + j];
                            dz[h + j] = d_rh[k] * hp[k] * r * (1.0 - r);
                            dh_next[k] += d_rh[k] * r;
                        }
                    }
                    gemm(batch, 2 * h, h, 1.0, Mat::n(dblock, gh), Mat::n(&w_rec[..2 * h * h], h), 1.0, &mut dh_next, h);
                } else {
                    for b in 0..batch {
                        dblock[b * gh + h..b * gh + 2 * h].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
        }
    }

    // parameter gradients over the whole sequence
    let (gw_in, rest) = grad[block.w_in.start..block.bias.end].split_at_mut(block.w_in.len());
    let (gw_rec, gb) = rest.split_at_mut(block.w_rec.len());
    gemm(gh, rows, d, 1.0, Mat::t(&d_pre, gh), Mat::n(input, d), 1.0, gw_in, d);
    match cell {
        CellKind::Lstm => gemm(gh, rows, h, 1.0, Mat::t(&d_pre, gh), Mat::n(&cache.h_prev, h), 1.0, gw_rec, h),
        CellKind::Gru => {
            let (zr, n) = gw_rec.split_at_mut(2 * h * h);
            gemm(2 * h, rows, h, 1.0, Mat::t(&d_pre, gh), Mat::n(&cache.h_prev, h), 1.0, zr, h);
            gemm(h, rows, h, 1.0, Mat::t(&d_pre[2 * h..], gh), Mat::n(&cache.rh, h), 1.0, n, h);
        }
    }
    for row in d_pre.chunks_exact(gh) {
        for (acc, v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    gemm(rows, gh, d, 1.0, Mat::n(&d_pre, gh), Mat::n(w_in, d), 1.0, d_input, d);
}

fn dense_backward(w: &[f64], grad: &mut [f64], blk: &DenseBlock, cache: &DenseCache, d_pre: &[f64], batch: usize) -> Vec<f64> {
    let (gw, gb) = grad[blk.w.start..blk.bias.end].split_at_mut(blk.w.len());
    gemm(blk.output, batch, blk.input, 1.0, Mat::t(d_pre, blk.output), Mat::n(&cache.input, blk.input), 1.0, gw, blk.input);
    for row in d_pre.chunks_exact(blk.output) {
        for (acc, v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut d_in = vec![0.0; batch * blk.input];
    gemm(batch, blk.output, blk.input, 1.0, Mat::n(d_pre, blk.output), Mat::n(&w[blk.w.clone()], blk.input), 0.0, &mut d_in, blk.input);
    if !cache.mask.is_empty() {
        for (g, m) in d_in.iter_mut().zip(&cache.mask) {
            *g *= m;
        }
    }
    d_in
}

/// Gradient of [`weighted_ce_loss`] with respect to every parameter, in
/// the flat parameter order.
pub fn backward(params: &ModelParams, cache: &ForwardCache, labels: &[Label], weights: (f64, f64)) -> Result<Vec<f64>, NnError> {
    if cache.n_params != params.len() || cache.fingerprint != params.fingerprint() {
        return Err(NnError::StaleCache);
    }
    if labels.len() != cache.batch {
        return Err(NnError::LabelCount {
            expected: cache.batch,
            actual: labels.len(),
        });
    }
    let arch = &params.arch;
    let layout: ParamLayout = params.layout();
    let w = &params.values;
    let mut grad = vec![0.0; params.len()];
    let (bsz, steps, h) = (cache.batch, cache.steps, arch.hidden_size);

    // d loss / d logit
    let inv_b = 1.0 / bsz as f64;
    let mut d_pre: Vec<f64> = cache
        .probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if !(P_CLAMP..=1.0 - P_CLAMP).contains(&p) {
                return 0.0;
            }
            let wy = if y == Label::Rhotic { weights.1 } else { weights.0 };
            wy * inv_b * (p - y.as_f64())
        })
        .collect();

    let mut d_act = Vec::new();
    for (i, blk) in layout.dense.iter().enumerate().rev() {
        d_act = dense_backward(w, &mut grad, blk, &cache.dense[i], &d_pre, bsz);
        if i > 0 {
            let below = &cache.dense[i - 1].pre;
            d_pre = d_act.iter().zip(below).map(|(&g, &z)| if z > 0.0 { g } else { 0.0 }).collect();
        }
    }

    // scatter the feature gradient onto the top layer's outputs
    let rows = bsz * steps;
    let mut d_out = vec![0.0; rows * 2 * h];
    for b in 0..bsz {
        let last = ((steps - 1) * bsz + b) * 2 * h;
        let first = b * 2 * h;
        d_out[last..last + h].copy_from_slice(&d_act[b * 2 * h..b * 2 * h + h]);
        d_out[first + h..first + 2 * h].copy_from_slice(&d_act[b * 2 * h + h..(b + 1) * 2 * h]);
    }

    for (l, blocks) in layout.recurrent.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let d = blocks[0].input;
        let mut d_input = vec![0.0; rows * d];
        for dir in 0..2 {
            backward_direction(
                arch.cell,
                w,
                &mut grad,
                &blocks[dir],
                h,
                &lc.dirs[dir],
                &lc.input,
                &d_out,
                &mut d_input,
                bsz,
                steps,
                dir,
            );
        }
        d_out = d_input;
    }
    Ok(grad)
}

/// Loss of `params` on `batch`, with dropout masks drawn from a fresh
/// stream seeded by `dropout_seed`.
pub fn loss_at(
    params: &ModelParams,
    batch: &Batch,
    labels: &[Label],
    weights: (f64, f64),
    mode: Mode,
    dropout_seed: u64,
) -> Result<f64, NnError> {
    let mut r = rng::seeded(dropout_seed);
    let cache = forward(params, batch, mode, &mut r)?;
    Ok(weighted_ce_loss(&cache.probs, labels, weights))
}
