//! Forward and reverse-mode passes of the causal transformer.
//!
//! The network is pre-norm: token + position embedding, `n_blocks` blocks of
//! (RMSNorm, multi-head causal attention, residual, RMSNorm, GELU MLP,
//! residual), a final RMSNorm and an untied output head. Gradients are
//! hand-derived for this fixed architecture.
//!
//! Sequences that share a prompt are evaluated as one *trunk* (the prompt
//! minus its last token) plus one *branch* per continuation. Branches attend
//! to the trunk's keys and values; during the backward pass their key/value
//! gradients are summed and pushed through the trunk once.

use super::params::{BlockOffsets, PolicyParams};
use super::vocab::TokenId;
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-6;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Keys and values of every block for a processed prefix.
#[derive(Debug, Clone)]
pub struct KvCache {
    len: usize,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl KvCache {
    pub fn empty(n_blocks: usize) -> Self {
        KvCache { len: 0, k: vec![Vec::new(); n_blocks], v: vec![Vec::new(); n_blocks] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn append(&mut self, seg: &Segment) {
        for (b, blk) in seg.blocks.iter().enumerate() {
            self.k[b].extend_from_slice(&blk.k);
            self.v[b].extend_from_slice(&blk.v);
        }
        self.len += seg.n;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Logits {
    None,
    Last,
    All,
}

#[derive(Debug, Default)]
struct BlockCache {
    x_in: Vec<f64>,
    r1: Vec<f64>,
    h1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// heads × n × total, row i holds weights over keys 0..=past+i.
    probs: Vec<f64>,
    o: Vec<f64>,
    x_mid: Vec<f64>,
    r2: Vec<f64>,
    h2: Vec<f64>,
    u: Vec<f64>,
    z: Vec<f64>,
}

#[derive(Debug)]
struct Segment {
    tokens: Vec<TokenId>,
    start_pos: usize,
    past_len: usize,
    n: usize,
    blocks: Vec<BlockCache>,
    x_final: Vec<f64>,
    rf: Vec<f64>,
    hf: Vec<f64>,
    /// Softmax over the vocabulary for the positions that produced logits.
    probs: Vec<f64>,
    logits: Vec<f64>,
}

// ---------------------------------------------------------------------------
// dense helpers, row-major

/// out[n×m] = a[n×k] · b[k×m]
fn matmul(a: &[f64], n: usize, k: usize, b: &[f64], m: usize, out: &mut [f64]) {
    out[..n * m].fill(0.0);
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += a_ip * bv;
            }
        }
    }
}

/// dw[k×m] += a[n×k]ᵀ · d[n×m]
fn matmul_at_acc(a: &[f64], n: usize, k: usize, d: &[f64], m: usize, dw: &mut [f64]) {
    for i in 0..n {
        let drow = &d[i * m..(i + 1) * m];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let wrow = &mut dw[p * m..(p + 1) * m];
            for (w, &dv) in wrow.iter_mut().zip(drow) {
                *w += a_ip * dv;
            }
        }
    }
}

/// out[n×k] += d[n×m] · w[k×m]ᵀ
fn matmul_bt_acc(d: &[f64], n: usize, m: usize, w: &[f64], k: usize, out: &mut [f64]) {
    for i in 0..n {
        let drow = &d[i * m..(i + 1) * m];
        let orow = &mut out[i * k..(i + 1) * k];
        for (p, o) in orow.iter_mut().enumerate() {
            let wrow = &w[p * m..(p + 1) * m];
            *o += dot(drow, wrow);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rmsnorm(x: &[f64], n: usize, d: usize, gain: &[f64], out: &mut [f64], r: &mut [f64]) {
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let ri = 1.0 / (ms + NORM_EPS).sqrt();
        r[i] = ri;
        for j in 0..d {
            out[i * d + j] = row[j] * ri * gain[j];
        }
    }
}

/// Accumulates dx and dgain for y = gain ⊙ x · r.
fn rmsnorm_back(
    x: &[f64],
    r: &[f64],
    n: usize,
    d: usize,
    gain: &[f64],
    dy: &[f64],
    dx: &mut [f64],
    dgain: &mut [f64],
) {
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let dyr = &dy[i * d..(i + 1) * d];
        let ri = r[i];
        let mut s = 0.0;
        for j in 0..d {
            dgain[j] += dyr[j] * row[j] * ri;
            s += row[j] * gain[j] * dyr[j];
        }
        let c = ri * ri * ri * s / d as f64;
        for j in 0..d {
            dx[i * d + j] += ri * gain[j] * dyr[j] - c * row[j];
        }
    }
}

#[inline]
fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

#[inline]
fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

/// In-place softmax; returns log of the normalizer (log-sum-exp).
fn softmax_in_place(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

// ---------------------------------------------------------------------------

fn forward_segment(
    params: &PolicyParams,
    past: Option<&KvCache>,
    tokens: &[TokenId],
    start_pos: usize,
    logits_mode: Logits,
) -> Result<Segment> {
    let cfg = params.config();
    let (d, f, v_sz) = (cfg.d_model, cfg.d_ff, cfg.vocab_size);
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let n = tokens.len();
    let m = past.map_or(0, |p| p.len);
    if start_pos + n > cfg.context {
        return Err(Error::InvalidInput(format!(
            "sequence of {} positions exceeds model context {}",
            start_pos + n,
            cfg.context
        )));
    }
    if let Some(t) = tokens.iter().find(|t| t.index() >= v_sz) {
        return Err(Error::InvalidInput(format!("token id {} outside vocabulary", t.0)));
    }
    let w = params.as_slice();
    let off = params.offsets();
    let total = m + n;

    let mut x = vec![0.0; n * d];
    for (i, t) in tokens.iter().enumerate() {
        let te = &w[off.tok_embedding + t.index() * d..][..d];
        let pe = &w[off.pos_embedding + (start_pos + i) * d..][..d];
        for j in 0..d {
            x[i * d + j] = te[j] + pe[j];
        }
    }

    let mut blocks = Vec::with_capacity(cfg.n_blocks);
    for (b, bo) in off.blocks.iter().enumerate() {
        let mut c = BlockCache {
            x_in: x.clone(),
            r1: vec![0.0; n],
            h1: vec![0.0; n * d],
            q: vec![0.0; n * d],
            k: vec![0.0; n * d],
            v: vec![0.0; n * d],
            probs: vec![0.0; n_heads * n * total],
            o: vec![0.0; n * d],
            x_mid: Vec::new(),
            r2: vec![0.0; n],
            h2: vec![0.0; n * d],
            u: vec![0.0; n * f],
            z: vec![0.0; n * f],
        };
        rmsnorm(&x, n, d, &w[bo.attn_norm..][..d], &mut c.h1, &mut c.r1);
        matmul(&c.h1, n, d, &w[bo.wq..][..d * d], d, &mut c.q);
        matmul(&c.h1, n, d, &w[bo.wk..][..d * d], d, &mut c.k);
        matmul(&c.h1, n, d, &w[bo.wv..][..d * d], d, &mut c.v);

        let (pk, pv): (&[f64], &[f64]) = match past {
            Some(p) => (&p.k[b], &p.v[b]),
            None => (&[], &[]),
        };
        let krow = |j: usize| -> &[f64] {
            if j < m {
                &pk[j * d..(j + 1) * d]
            } else {
                &c.k[(j - m) * d..(j - m + 1) * d]
            }
        };
        let vrow = |j: usize| -> &[f64] {
            if j < m {
                &pv[j * d..(j + 1) * d]
            } else {
                &c.v[(j - m) * d..(j - m + 1) * d]
            }
        };
        let mut probs = vec![0.0; n_heads * n * total];
        let mut o = vec![0.0; n * d];
        for h in 0..n_heads {
            let hs = h * dh;
            for i in 0..n {
                let qi = &c.q[i * d + hs..i * d + hs + dh];
                let prow = &mut probs[(h * n + i) * total..(h * n + i) * total + m + i + 1];
                for (j, pj) in prow.iter_mut().enumerate() {
                    *pj = dot(qi, &krow(j)[hs..hs + dh]) * scale;
                }
                softmax_in_place(prow);
                let oi = &mut o[i * d + hs..i * d + hs + dh];
                for (j, &pj) in prow.iter().enumerate() {
                    let vj = &vrow(j)[hs..hs + dh];
                    for (oo, &vv) in oi.iter_mut().zip(vj) {
                        *oo += pj * vv;
                    }
                }
            }
        }
        c.probs = probs;
        c.o = o;

        let mut a = vec![0.0; n * d];
        matmul(&c.o, n, d, &w[bo.wo..][..d * d], d, &mut a);
        for (xv, av) in x.iter_mut().zip(&a) {
            *xv += av;
        }
        c.x_mid = x.clone();

        rmsnorm(&x, n, d, &w[bo.mlp_norm..][..d], &mut c.h2, &mut c.r2);
        matmul(&c.h2, n, d, &w[bo.w_in..][..d * f], f, &mut c.u);
        let b_in = &w[bo.b_in..][..f];
        for i in 0..n {
            for j in 0..f {
                let u = c.u[i * f + j] + b_in[j];
                c.u[i * f + j] = u;
                c.z[i * f + j] = gelu(u);
            }
        }
        let mut mlp = vec![0.0; n * d];
        matmul(&c.z, n, f, &w[bo.w_out..][..f * d], d, &mut mlp);
        let b_out = &w[bo.b_out..][..d];
        for i in 0..n {
            for j in 0..d {
                x[i * d + j] += mlp[i * d + j] + b_out[j];
            }
        }
        blocks.push(c);
    }

    let mut seg = Segment {
        tokens: tokens.to_vec(),
        start_pos,
        past_len: m,
        n,
        blocks,
        x_final: Vec::new(),
        rf: Vec::new(),
        hf: Vec::new(),
        probs: Vec::new(),
        logits: Vec::new(),
    };

    let rows = match logits_mode {
        Logits::None => return Ok(seg),
        Logits::Last if n > 0 => n - 1..n,
        Logits::Last => return Ok(seg),
        Logits::All => 0..n,
    };
    let nr = rows.len();
    let xr = &x[rows.start * d..rows.end * d];
    let mut hf = vec![0.0; nr * d];
    let mut rf = vec![0.0; nr];
    rmsnorm(xr, nr, d, &w[off.final_norm..][..d], &mut hf, &mut rf);
    let mut logits = vec![0.0; nr * v_sz];
    matmul(&hf, nr, d, &w[off.lm_head..][..d * v_sz], v_sz, &mut logits);
    seg.x_final = xr.to_vec();
    seg.rf = rf;
    seg.hf = hf;
    seg.logits = logits;
    Ok(seg)
}

/// Gradient of a segment. `d_logits` covers every position (All mode) when
/// present; `extra_k`/`extra_v` are injected gradients on this segment's own
/// keys and values. Returns gradients w.r.t. the past keys and values.
fn backward_segment(
    params: &PolicyParams,
    past: Option<&KvCache>,
    seg: &Segment,
    d_logits: Option<&[f64]>,
    extra: Option<(&[Vec<f64>], &[Vec<f64>])>,
    grad: &mut [f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let cfg = params.config();
    let (d, f, v_sz) = (cfg.d_model, cfg.d_ff, cfg.vocab_size);
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let (n, m) = (seg.n, seg.past_len);
    let total = m + n;
    let w = params.as_slice();
    let off = params.offsets();

    let mut dx = vec![0.0; n * d];
    if let Some(dl) = d_logits {
        let mut dhf = vec![0.0; n * d];
        matmul_at_acc(&seg.hf, n, d, dl, v_sz, &mut grad[off.lm_head..][..d * v_sz]);
        matmul_bt_acc(dl, n, v_sz, &w[off.lm_head..][..d * v_sz], d, &mut dhf);
        let (gain, dgain) = (&w[off.final_norm..][..d], off.final_norm);
        let mut dg = vec![0.0; d];
        rmsnorm_back(&seg.x_final, &seg.rf, n, d, gain, &dhf, &mut dx, &mut dg);
        add_into(&mut grad[dgain..][..d], &dg);
    }

    let mut d_past_k = vec![vec![0.0; m * d]; cfg.n_blocks];
    let mut d_past_v = vec![vec![0.0; m * d]; cfg.n_blocks];

    for (b, (bo, c)) in off.blocks.iter().zip(&seg.blocks).enumerate().rev() {
        let bo: &BlockOffsets = bo;
        // MLP
        let mut dz = vec![0.0; n * f];
        {
            let db_out = &mut grad[bo.b_out..][..d];
            for i in 0..n {
                for j in 0..d {
                    db_out[j] += dx[i * d + j];
                }
            }
        }
        matmul_at_acc(&c.z, n, f, &dx, d, &mut grad[bo.w_out..][..f * d]);
        matmul_bt_acc(&dx, n, d, &w[bo.w_out..][..f * d], f, &mut dz);
        let mut du = dz;
        for (g, &u) in du.iter_mut().zip(&c.u) {
            *g *= gelu_grad(u);
        }
        {
            let db_in = &mut grad[bo.b_in..][..f];
            for i in 0..n {
                for j in 0..f {
                    db_in[j] += du[i * f + j];
                }
            }
        }
        matmul_at_acc(&c.h2, n, d, &du, f, &mut grad[bo.w_in..][..d * f]);
        let mut dh2 = vec![0.0; n * d];
        matmul_bt_acc(&du, n, f, &w[bo.w_in..][..d * f], d, &mut dh2);
        let mut dg = vec![0.0; d];
        // dx becomes d(x_mid): residual path plus norm path.
        rmsnorm_back(&c.x_mid, &c.r2, n, d, &w[bo.mlp_norm..][..d], &dh2, &mut dx, &mut dg);
        add_into(&mut grad[bo.mlp_norm..][..d], &dg);

        // attention output projection
        matmul_at_acc(&c.o, n, d, &dx, d, &mut grad[bo.wo..][..d * d]);
        let mut d_o = vec![0.0; n * d];
        matmul_bt_acc(&dx, n, d, &w[bo.wo..][..d * d], d, &mut d_o);

        let mut dq = vec![0.0; n * d];
        let (mut dk, mut dv) = match extra {
            Some((ek, ev)) => (ek[b].clone(), ev[b].clone()),
            None => (vec![0.0; n * d], vec![0.0; n * d]),
        };
        let (pk, pv): (&[f64], &[f64]) = match past {
            Some(p) => (&p.k[b], &p.v[b]),
            None => (&[], &[]),
        };
        let mut dp = vec![0.0; total];
        for h in 0..n_heads {
            let hs = h * dh;
            for i in 0..n {
                let cnt = m + i + 1;
                let prow = &c.probs[(h * n + i) * total..(h * n + i) * total + cnt];
                let doi = &d_o[i * d + hs..i * d + hs + dh];
                let mut s = 0.0;
                for j in 0..cnt {
                    let vj = if j < m {
                        &pv[j * d + hs..j * d + hs + dh]
                    } else {
                        &c.v[(j - m) * d + hs..(j - m) * d + hs + dh]
                    };
                    dp[j] = dot(doi, vj);
                    s += prow[j] * dp[j];
                }
                let qi = &c.q[i * d + hs..i * d + hs + dh];
                for j in 0..cnt {
                    let pj = prow[j];
                    let ds = pj * (dp[j] - s) * scale;
                    let (kj, dkj, dvj) = if j < m {
                        (
                            &pk[j * d + hs..j * d + hs + dh],
                            &mut d_past_k[b][j * d + hs..j * d + hs + dh],
                            &mut d_past_v[b][j * d + hs..j * d + hs + dh],
                        )
                    } else {
                        let jj = j - m;
                        (
                            &c.k[jj * d + hs..jj * d + hs + dh],
                            &mut dk[jj * d + hs..jj * d + hs + dh],
                            &mut dv[jj * d + hs..jj * d + hs + dh],
                        )
                    };
                    let dqi = &mut dq[i * d + hs..i * d + hs + dh];
                    for t in 0..dh {
                        dqi[t] += ds * kj[t];
                        dkj[t] += ds * qi[t];
                        dvj[t] += pj * doi[t];
                    }
                }
            }
        }
        matmul_at_acc(&c.h1, n, d, &dq, d, &mut grad[bo.wq..][..d * d]);
        matmul_at_acc(&c.h1, n, d, &dk, d, &mut grad[bo.wk..][..d * d]);
        matmul_at_acc(&c.h1, n, d, &dv, d, &mut grad[bo.wv..][..d * d]);
        let mut dh1 = vec![0.0; n * d];
        matmul_bt_acc(&dq, n, d, &w[bo.wq..][..d * d], d, &mut dh1);
        matmul_bt_acc(&dk, n, d, &w[bo.wk..][..d * d], d, &mut dh1);
        matmul_bt_acc(&dv, n, d, &w[bo.wv..][..d * d], d, &mut dh1);
        let mut dg = vec![0.0; d];
        rmsnorm_back(&c.x_in, &c.r1, n, d, &w[bo.attn_norm..][..d], &dh1, &mut dx, &mut dg);
        add_into(&mut grad[bo.attn_norm..][..d], &dg);
    }

    for (i, t) in seg.tokens.iter().enumerate() {
        let row = &dx[i * d..(i + 1) * d];
        add_into(&mut grad[off.tok_embedding + t.index() * d..][..d], row);
        add_into(&mut grad[off.pos_embedding + (seg.start_pos + i) * d..][..d], row);
    }
    (d_past_k, d_past_v)
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

// ---------------------------------------------------------------------------

/// Forward pass over a shared context and several continuations.
///
/// Keeps every intermediate needed for [`GroupForward::backward`].
pub struct GroupForward<'a> {
    params: &'a PolicyParams,
    trunk: Segment,
    trunk_cache: KvCache,
    branches: Vec<Option<Segment>>,
    targets: Vec<Vec<TokenId>>,
    logprobs: Vec<Vec<f64>>,
}

impl<'a> GroupForward<'a> {
    pub fn new(
        params: &'a PolicyParams,
        context: &[TokenId],
        continuations: &[Vec<TokenId>],
    ) -> Result<Self> {
        if context.is_empty() {
            return Err(Error::InvalidInput("context must hold at least one token".into()));
        }
        let cfg = params.config();
        let split = context.len() - 1;
        let trunk = forward_segment(params, None, &context[..split], 0, Logits::None)?;
        let mut trunk_cache = KvCache::empty(cfg.n_blocks);
        trunk_cache.append(&trunk);
        let last = context[split];

        let mut branches = Vec::with_capacity(continuations.len());
        let mut logprobs = Vec::with_capacity(continuations.len());
        for cont in continuations {
            if cont.is_empty() {
                branches.push(None);
                logprobs.push(Vec::new());
                continue;
            }
            if let Some(t) = cont.iter().find(|t| t.index() >= cfg.vocab_size) {
                return Err(Error::InvalidInput(format!("token id {} outside vocabulary", t.0)));
            }
            let mut input = Vec::with_capacity(cont.len());
            input.push(last);
            input.extend_from_slice(&cont[..cont.len() - 1]);
            let mut seg = forward_segment(params, Some(&trunk_cache), &input, split, Logits::All)?;
            let v = cfg.vocab_size;
            let mut probs = std::mem::take(&mut seg.logits);
            let mut lp = Vec::with_capacity(cont.len());
            for (i, t) in cont.iter().enumerate() {
                let row = &mut probs[i * v..(i + 1) * v];
                let logit = row[t.index()];
                let lse = softmax_in_place(row);
                lp.push(logit - lse);
            }
            seg.probs = probs;
            branches.push(Some(seg));
            logprobs.push(lp);
        }
        Ok(GroupForward { params, trunk, trunk_cache, branches, targets: continuations.to_vec(), logprobs })
    }

    /// Per-token log π(y_t | context, y_<t) for each continuation.
    pub fn logprobs(&self) -> &[Vec<f64>] {
        &self.logprobs
    }

    /// Next-token distribution at every continuation position.
    pub fn probs(&self, branch: usize) -> Option<&[f64]> {
        self.branches.get(branch)?.as_ref().map(|s| s.probs.as_slice())
    }

    /// Accumulates into `grad` the gradient of Σ_i Σ_t coeffs[i][t] · logprob[i][t].
    pub fn backward(&self, coeffs: &[Vec<f64>], grad: &mut [f64]) -> Result<()> {
        if coeffs.len() != self.branches.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficient rows for {} continuations",
                coeffs.len(),
                self.branches.len()
            )));
        }
        if grad.len() != self.params.len() {
            return Err(Error::InvalidInput("gradient buffer has the wrong length".into()));
        }
        let cfg = self.params.config();
        let (d, v) = (cfg.d_model, cfg.vocab_size);
        let m = self.trunk_cache.len;
        let mut acc_k = vec![vec![0.0; m * d]; cfg.n_blocks];
        let mut acc_v = vec![vec![0.0; m * d]; cfg.n_blocks];
        let mut any = false;
        for ((seg, target), c) in self.branches.iter().zip(&self.targets).zip(coeffs) {
            if c.len() != target.len() {
                return Err(Error::InvalidInput(format!(
                    "{} coefficients for a continuation of {} tokens",
                    c.len(),
                    target.len()
                )));
            }
            let Some(seg) = seg else { continue };
            if c.iter().all(|&x| x == 0.0) {
                continue;
            }
            any = true;
            let mut dl = vec![0.0; seg.n * v];
            for (i, (t, &ci)) in target.iter().zip(c).enumerate() {
                let row = &mut dl[i * v..(i + 1) * v];
                let prow = &seg.probs[i * v..(i + 1) * v];
                for (r, &p) in row.iter_mut().zip(prow) {
                    *r = -ci * p;
                }
                row[t.index()] += ci;
            }
            let (pk, pv) = backward_segment(self.params, Some(&self.trunk_cache), seg, Some(&dl), None, grad);
            for b in 0..cfg.n_blocks {
                add_into(&mut acc_k[b], &pk[b]);
                add_into(&mut acc_v[b], &pv[b]);
            }
        }
        if any && m > 0 {
            backward_segment(self.params, None, &self.trunk, None, Some((&acc_k, &acc_v)), grad);
        }
        Ok(())
    }
}

/// Incremental decoder used for sampling.
#[derive(Debug, Clone)]
pub struct Decoder {
    cache: KvCache,
    last_logits: Vec<f64>,
}

impl Decoder {
    /// Processes a whole prompt, leaving the logits for the next position.
    pub fn prefill(params: &PolicyParams, prompt: &[TokenId]) -> Result<Self> {
        if prompt.is_empty() {
            return Err(Error::InvalidInput("prompt must hold at least one token".into()));
        }
        let seg = forward_segment(params, None, prompt, 0, Logits::Last)?;
        let mut cache = KvCache::empty(params.config().n_blocks);
        cache.append(&seg);
        Ok(Decoder { cache, last_logits: seg.logits })
    }

    pub fn position(&self) -> usize {
        self.cache.len
    }

    /// Raw logits for the next token.
    pub fn logits(&self) -> &[f64] {
        &self.last_logits
    }

    pub fn push(&mut self, params: &PolicyParams, token: TokenId) -> Result<()> {
        let seg = forward_segment(params, Some(&self.cache), &[token], self.cache.len, Logits::Last)?;
        self.cache.append(&seg);
        self.last_logits = seg.logits;
        Ok(())
    }
}

/// Full-softmax log-probabilities of `logits`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}
