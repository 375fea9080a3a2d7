use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    add_position, axpy, dot, log_softmax, matmul_t, matmul_t_backward, rmsnorm, rmsnorm_backward, silu,
    silu_backward, Linear,
};
use super::{LmConfig, Task};
use crate::hash::Hasher;
use crate::optim::ParamSet;
use crate::rng::{self, SeededRng};

/// Indices of the adapted projections inside a block.
pub const Q: usize = 0;
pub const K: usize = 1;
pub const V: usize = 2;
pub const O: usize = 3;
pub const UP: usize = 4;
pub const DOWN: usize = 5;
pub const SLOTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub norm1: Vec<f64>,
    /// q, k, v, o, up, down
    pub proj: Vec<Linear>,
    pub norm2: Vec<f64>,
}

impl Block {
    fn new(c: &LmConfig, r: &mut SeededRng) -> Self {
        let h = c.hidden;
        let sh = 1.0 / (h as f64).sqrt();
        let out_std = sh / (2.0 * c.blocks as f64).sqrt();
        let proj = vec![
            Linear::new(h, h, sh, r),
            Linear::new(h, h, sh, r),
            Linear::new(h, h, sh, r),
            Linear::new(h, h, out_std, r),
            Linear::new(c.ffn, h, sh, r),
            Linear::new(h, c.ffn, out_std / ((c.ffn / h) as f64).sqrt(), r),
        ];
        Self { norm1: vec![1.0; h], proj, norm2: vec![1.0; h] }
    }

    fn zeros_like(&self) -> Self {
        Self {
            norm1: vec![0.0; self.norm1.len()],
            proj: self.proj.iter().map(|l| Linear::zeros(l.out_dim, l.in_dim)).collect(),
            norm2: vec![0.0; self.norm2.len()],
        }
    }
}

/// Decoder-only transformer with untied input and output embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModelParams {
    pub config: LmConfig,
    /// Rows `[0, base_vocab)` are the text tokens the base was trained on.
    pub base_vocab: usize,
    pub vocab_size: usize,
    pub embed: Vec<f64>,
    pub output: Vec<f64>,
    pub blocks: Vec<Block>,
    pub final_norm: Vec<f64>,
}

impl BaseModelParams {
    pub fn init(config: &LmConfig, vocab: usize, seed: u64) -> Self {
        let mut r = rng::derive(seed, 40);
        let h = config.hidden;
        let mut embed = vec![0.0; vocab * h];
        rng::fill_normal(&mut r, &mut embed, 0.5);
        let mut output = vec![0.0; vocab * h];
        rng::fill_normal(&mut r, &mut output, 1.0 / (h as f64).sqrt());
        let blocks = (0..config.blocks).map(|_| Block::new(config, &mut r)).collect();
        Self {
            config: config.clone(),
            base_vocab: vocab,
            vocab_size: vocab,
            embed,
            output,
            blocks,
            final_norm: vec![1.0; h],
        }
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            base_vocab: self.base_vocab,
            vocab_size: self.vocab_size,
            embed: vec![0.0; self.embed.len()],
            output: vec![0.0; self.output.len()],
            blocks: self.blocks.iter().map(Block::zeros_like).collect(),
            final_norm: vec![0.0; self.final_norm.len()],
        }
    }

    /// Appends `extra` rows to both embedding matrices, drawn from a normal
    /// whose spread matches the existing rows. Existing rows are untouched.
    pub fn extend_vocabulary(&self, extra: usize, seed: u64) -> Self {
        let h = self.hidden();
        let mut r = rng::derive(seed, 41);
        let mut out = self.clone();
        let e_std = spread(&self.embed);
        let o_std = spread(&self.output);
        let mut rows = vec![0.0; extra * h];
        rng::fill_normal(&mut r, &mut rows, e_std);
        out.embed.extend_from_slice(&rows);
        rng::fill_normal(&mut r, &mut rows, o_std);
        out.output.extend_from_slice(&rows);
        out.vocab_size += extra;
        out
    }

    /// SHA-256 over the text-token rows and every transformer weight.
    pub fn base_hash(&self) -> alloc::string::String {
        let h = self.hidden();
        let mut hs = Hasher::new();
        hs.u64(self.base_vocab as u64).u64(h as u64);
        hs.f64s(&self.embed[..self.base_vocab * h]);
        hs.f64s(&self.output[..self.base_vocab * h]);
        for b in &self.blocks {
            hs.f64s(&b.norm1).f64s(&b.norm2);
            for p in &b.proj {
                hs.f64s(&p.w);
            }
        }
        hs.f64s(&self.final_norm);
        hs.finish_hex()
    }

    /// SHA-256 of every tensor, extension rows included.
    pub fn full_hash(&self) -> alloc::string::String {
        let mut hs = Hasher::new();
        for t in self.tensors() {
            hs.f64s(t);
        }
        hs.finish_hex()
    }
}

fn spread(v: &[f64]) -> f64 {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

impl ParamSet for BaseModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = vec![&self.embed, &self.output, &self.final_norm];
        for b in &self.blocks {
            t.push(&b.norm1);
            t.push(&b.norm2);
            for p in &b.proj {
                t.push(&p.w);
            }
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = vec![&mut self.embed, &mut self.output, &mut self.final_norm];
        for b in &mut self.blocks {
            t.push(&mut b.norm1);
            t.push(&mut b.norm2);
            for p in &mut b.proj {
                t.push(&mut p.w);
            }
        }
        t
    }
}

/// Low-rank update `s·A·Bm` for one `out × in` projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraPair {
    pub out_dim: usize,
    pub in_dim: usize,
    pub rank: usize,
    /// `out × rank`, zero at initialisation.
    pub a: Vec<f64>,
    /// `rank × in`
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSet {
    pub task: Task,
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
    pub base_vocab: usize,
    /// `blocks × SLOTS`
    pub lora: Vec<Vec<LoraPair>>,
    /// Trainable copies of the rows appended by vocabulary extension.
    pub new_embed: Vec<f64>,
    pub new_output: Vec<f64>,
}

impl AdapterSet {
    pub fn init(base: &BaseModelParams, task: Task, rank: usize, alpha: f64, dropout: f64, seed: u64) -> Self {
        let mut r = rng::derive(seed, 42 + task as u64);
        let lora = base
            .blocks
            .iter()
            .map(|blk| {
                blk.proj
                    .iter()
                    .map(|p| {
                        let mut b = vec![0.0; rank * p.in_dim];
                        rng::fill_normal(&mut r, &mut b, 1.0 / (p.in_dim as f64).sqrt());
                        LoraPair { out_dim: p.out_dim, in_dim: p.in_dim, rank, a: vec![0.0; p.out_dim * rank], b }
                    })
                    .collect()
            })
            .collect();
        let h = base.hidden();
        Self {
            task,
            rank,
            alpha,
            dropout,
            base_vocab: base.base_vocab,
            lora,
            new_embed: base.embed[base.base_vocab * h..].to_vec(),
            new_output: base.output[base.base_vocab * h..].to_vec(),
        }
    }

    pub fn lora_scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn hash(&self) -> alloc::string::String {
        let mut hs = Hasher::new();
        for t in self.tensors() {
            hs.f64s(t);
        }
        hs.finish_hex()
    }
}

impl ParamSet for AdapterSet {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = vec![&self.new_embed, &self.new_output];
        for blk in &self.lora {
            for p in blk {
                t.push(&p.a);
                t.push(&p.b);
            }
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = vec![&mut self.new_embed, &mut self.new_output];
        for blk in &mut self.lora {
            for p in blk {
                t.push(&mut p.a);
                t.push(&mut p.b);
            }
        }
        t
    }
}

/// Read-only view pairing a base with an optional adapter set.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub base: &'a BaseModelParams,
    pub adapters: Option<&'a AdapterSet>,
}

struct ProjCache {
    /// Input after dropout, when dropout was applied.
    dropped: Option<Vec<f64>>,
    /// Per-element dropout multiplier.
    mask: Option<Vec<f64>>,
    /// `B·x`, `t × rank`
    xb: Vec<f64>,
}

struct BlockCache {
    x_in: Vec<f64>,
    inv1: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    x_mid: Vec<f64>,
    inv2: Vec<f64>,
    b: Vec<f64>,
    u: Vec<f64>,
    act: Vec<f64>,
    proj: Vec<Option<ProjCache>>,
}

pub struct ForwardCache {
    ids: Vec<usize>,
    blocks: Vec<BlockCache>,
    x_final: Vec<f64>,
    inv_final: Vec<f64>,
    normed: Vec<f64>,
}

impl<'a> Model<'a> {
    pub fn new(base: &'a BaseModelParams, adapters: Option<&'a AdapterSet>) -> Self {
        Self { base, adapters }
    }

    pub fn vocab_size(&self) -> usize {
        self.base.vocab_size
    }

    fn embed_row(&self, id: usize) -> &[f64] {
        let h = self.base.hidden();
        match self.adapters {
            Some(ad) if id >= ad.base_vocab => &ad.new_embed[(id - ad.base_vocab) * h..(id - ad.base_vocab + 1) * h],
            _ => &self.base.embed[id * h..(id + 1) * h],
        }
    }

    fn logits_row(&self, x: &[f64]) -> Vec<f64> {
        let h = self.base.hidden();
        let bv = self.adapters.map_or(self.base.vocab_size, |a| a.base_vocab);
        let mut out = Vec::with_capacity(self.base.vocab_size);
        for v in 0..bv {
            out.push(dot(&self.base.output[v * h..(v + 1) * h], x));
        }
        if let Some(ad) = self.adapters {
            for row in ad.new_output.chunks(h) {
                out.push(dot(row, x));
            }
        }
        out
    }

    fn project(
        &self,
        block: usize,
        slot: usize,
        x: &[f64],
        t: usize,
        drop: &mut Option<&mut SeededRng>,
    ) -> (Vec<f64>, Option<ProjCache>) {
        let lin = &self.base.blocks[block].proj[slot];
        let mut y = matmul_t(x, t, &lin.w, lin.out_dim, lin.in_dim);
        let Some(ad) = self.adapters else { return (y, None) };
        let pair = &ad.lora[block][slot];
        let p = ad.dropout;
        let (dropped, mask) = match drop.as_deref_mut() {
            Some(r) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let mask: Vec<f64> = (0..x.len()).map(|_| if r.random::<f64>() < p { 0.0 } else { keep }).collect();
                let dropped: Vec<f64> = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                (Some(dropped), Some(mask))
            }
            _ => (None, None),
        };
        let src = dropped.as_deref().unwrap_or(x);
        let xb = matmul_t(src, t, &pair.b, pair.rank, pair.in_dim);
        let s = ad.lora_scale();
        let delta = matmul_t(&xb, t, &pair.a, pair.out_dim, pair.rank);
        for (yi, di) in y.iter_mut().zip(&delta) {
            *yi += s * di;
        }
        (y, Some(ProjCache { dropped, mask, xb }))
    }

    #[allow(clippy::too_many_arguments)]
    fn project_backward(
        &self,
        block: usize,
        slot: usize,
        x: &[f64],
        t: usize,
        cache: &Option<ProjCache>,
        gy: &[f64],
        base_grads: &mut Option<&mut BaseModelParams>,
        ad_grads: &mut Option<&mut AdapterSet>,
    ) -> Vec<f64> {
        let lin = &self.base.blocks[block].proj[slot];
        let gw = base_grads.as_deref_mut().map(|g| &mut g.blocks[block].proj[slot].w[..]);
        let mut gx = matmul_t_backward(x, t, &lin.w, lin.out_dim, lin.in_dim, gy, gw);
        if let (Some(ad), Some(pc)) = (self.adapters, cache) {
            let pair = &ad.lora[block][slot];
            let s = ad.lora_scale();
            let gys: Vec<f64> = gy.iter().map(|g| g * s).collect();
            let ga = ad_grads.as_deref_mut().map(|g| &mut g.lora[block][slot].a[..]);
            let gxb = matmul_t_backward(&pc.xb, t, &pair.a, pair.out_dim, pair.rank, &gys, ga);
            let src = pc.dropped.as_deref().unwrap_or(x);
            let gb = ad_grads.as_deref_mut().map(|g| &mut g.lora[block][slot].b[..]);
            let mut gsrc = matmul_t_backward(src, t, &pair.b, pair.rank, pair.in_dim, &gxb, gb);
            if let Some(mask) = &pc.mask {
                for (g, m) in gsrc.iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            for (a, b) in gx.iter_mut().zip(&gsrc) {
                *a += b;
            }
        }
        gx
    }

    fn input(&self, ids: &[usize], start: usize) -> Vec<f64> {
        let h = self.base.hidden();
        let mut x = Vec::with_capacity(ids.len() * h);
        for (i, &id) in ids.iter().enumerate() {
            let mut row = self.embed_row(id).to_vec();
            add_position(&mut row, start + i);
            x.extend_from_slice(&row);
        }
        x
    }

    /// Logits for every position (`t × vocab`) plus the activations needed by
    /// [`Model::backward`]. `dropout` enables adapter dropout.
    pub fn forward(&self, ids: &[usize], mut dropout: Option<&mut SeededRng>) -> (Vec<f64>, ForwardCache) {
        let t = ids.len();
        let c = &self.base.config;
        let h = c.hidden;
        let mut x = self.input(ids, 0);
        let mut caches = Vec::with_capacity(c.blocks);
        for (bi, blk) in self.base.blocks.iter().enumerate() {
            let x_in = x.clone();
            let (a, inv1) = rmsnorm(&x, t, &blk.norm1);
            let mut proj = Vec::with_capacity(SLOTS);
            let (q, pq) = self.project(bi, Q, &a, t, &mut dropout);
            let (k, pk) = self.project(bi, K, &a, t, &mut dropout);
            let (v, pv) = self.project(bi, V, &a, t, &mut dropout);
            proj.extend([pq, pk, pv]);
            let (ctx, probs) = attention(&q, &k, &v, t, t, 0, c.heads, h);
            let (o, po) = self.project(bi, O, &ctx, t, &mut dropout);
            proj.push(po);
            for (xi, oi) in x.iter_mut().zip(&o) {
                *xi += oi;
            }
            let x_mid = x.clone();
            let (b, inv2) = rmsnorm(&x, t, &blk.norm2);
            let (u, pu) = self.project(bi, UP, &b, t, &mut dropout);
            let act = silu(&u);
            let (dn, pd) = self.project(bi, DOWN, &act, t, &mut dropout);
            proj.extend([pu, pd]);
            for (xi, di) in x.iter_mut().zip(&dn) {
                *xi += di;
            }
            caches.push(BlockCache { x_in, inv1, a, q, k, v, probs, ctx, x_mid, inv2, b, u, act, proj });
        }
        let (normed, inv_final) = rmsnorm(&x, t, &self.base.final_norm);
        let mut logits = Vec::with_capacity(t * self.vocab_size());
        for row in normed.chunks(h) {
            logits.extend(self.logits_row(row));
        }
        (logits, ForwardCache { ids: ids.to_vec(), blocks: caches, x_final: x, inv_final, normed })
    }

    /// Reverse pass from `dL/dlogits`. Base gradients are accumulated only
    /// when `base_grads` is given; adapter gradients only when `ad_grads` is.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dlogits: &[f64],
        mut base_grads: Option<&mut BaseModelParams>,
        mut ad_grads: Option<&mut AdapterSet>,
    ) {
        let c = &self.base.config;
        let h = c.hidden;
        let t = cache.ids.len();
        let vs = self.vocab_size();
        let bv = self.adapters.map_or(vs, |a| a.base_vocab);
        let mut gn = vec![0.0; t * h];
        for i in 0..t {
            let x = &cache.normed[i * h..(i + 1) * h];
            let gni = &mut gn[i * h..(i + 1) * h];
            for v in 0..vs {
                let g = dlogits[i * vs + v];
                if g == 0.0 {
                    continue;
                }
                if v < bv {
                    axpy(gni, g, &self.base.output[v * h..(v + 1) * h]);
                    if let Some(bg) = base_grads.as_deref_mut() {
                        axpy(&mut bg.output[v * h..(v + 1) * h], g, x);
                    }
                } else {
                    let ad = self.adapters.expect("rows past the base vocabulary need adapters");
                    let r = v - bv;
                    axpy(gni, g, &ad.new_output[r * h..(r + 1) * h]);
                    if let Some(ag) = ad_grads.as_deref_mut() {
                        axpy(&mut ag.new_output[r * h..(r + 1) * h], g, x);
                    }
                }
            }
        }
        let gfn = base_grads.as_deref_mut().map(|g| &mut g.final_norm[..]);
        let mut gx = rmsnorm_backward(&cache.x_final, t, &self.base.final_norm, &cache.inv_final, &gn, gfn);

        for bi in (0..self.base.blocks.len()).rev() {
            let blk = &self.base.blocks[bi];
            let bc = &cache.blocks[bi];
            // feed-forward branch
            let gact = self.project_backward(bi, DOWN, &bc.act, t, &bc.proj[DOWN], &gx, &mut base_grads, &mut ad_grads);
            let gu = silu_backward(&bc.u, &gact);
            let gb = self.project_backward(bi, UP, &bc.b, t, &bc.proj[UP], &gu, &mut base_grads, &mut ad_grads);
            let gn2 = base_grads.as_deref_mut().map(|g| &mut g.blocks[bi].norm2[..]);
            let gmid = rmsnorm_backward(&bc.x_mid, t, &blk.norm2, &bc.inv2, &gb, gn2);
            for (a, b) in gx.iter_mut().zip(&gmid) {
                *a += b;
            }
            // attention branch
            let gctx = self.project_backward(bi, O, &bc.ctx, t, &bc.proj[O], &gx, &mut base_grads, &mut ad_grads);
            let (gq, gk, gv) = attention_backward(&bc.q, &bc.k, &bc.v, &bc.probs, &gctx, t, c.heads, h);
            let mut ga = self.project_backward(bi, Q, &bc.a, t, &bc.proj[Q], &gq, &mut base_grads, &mut ad_grads);
            for (slot, g) in [(K, &gk), (V, &gv)] {
                let part = self.project_backward(bi, slot, &bc.a, t, &bc.proj[slot], g, &mut base_grads, &mut ad_grads);
                for (a, b) in ga.iter_mut().zip(&part) {
                    *a += b;
                }
            }
            let gn1 = base_grads.as_deref_mut().map(|g| &mut g.blocks[bi].norm1[..]);
            let gin = rmsnorm_backward(&bc.x_in, t, &blk.norm1, &bc.inv1, &ga, gn1);
            for (a, b) in gx.iter_mut().zip(&gin) {
                *a += b;
            }
        }
        for (i, &id) in cache.ids.iter().enumerate() {
            let g = &gx[i * h..(i + 1) * h];
            match self.adapters {
                Some(ad) if id >= ad.base_vocab => {
                    if let Some(ag) = ad_grads.as_deref_mut() {
                        let r = id - ad.base_vocab;
                        axpy(&mut ag.new_embed[r * h..(r + 1) * h], 1.0, g);
                    }
                }
                _ => {
                    if let Some(bg) = base_grads.as_deref_mut() {
                        axpy(&mut bg.embed[id * h..(id + 1) * h], 1.0, g);
                    }
                }
            }
        }
    }

    /// Mean negative log-likelihood of `ids[i+1]` at every position `i` with
    /// `target[i+1]` set, with optional reverse pass.
    pub fn sequence_nll(
        &self,
        ids: &[usize],
        target: &[bool],
        dropout: Option<&mut SeededRng>,
        grads: Option<(Option<&mut BaseModelParams>, Option<&mut AdapterSet>)>,
    ) -> (f64, usize) {
        let (logits, cache) = self.forward(ids, dropout);
        let vs = self.vocab_size();
        let t = ids.len();
        let count = (1..t).filter(|&i| target[i]).count();
        if count == 0 {
            return (0.0, 0);
        }
        let mut nll = 0.0;
        let mut dl = if grads.is_some() { vec![0.0; t * vs] } else { Vec::new() };
        for i in 0..t - 1 {
            if !target[i + 1] {
                continue;
            }
            let ls = log_softmax(&logits[i * vs..(i + 1) * vs]);
            nll -= ls[ids[i + 1]];
            if grads.is_some() {
                let row = &mut dl[i * vs..(i + 1) * vs];
                for (g, l) in row.iter_mut().zip(&ls) {
                    *g = l.exp() / count as f64;
                }
                row[ids[i + 1]] -= 1.0 / count as f64;
            }
        }
        if let Some((bg, ag)) = grads {
            self.backward(&cache, &dl, bg, ag);
        }
        (nll / count as f64, count)
    }

    pub fn start_cache(&self) -> KvCache {
        let n = self.base.blocks.len();
        KvCache { keys: vec![Vec::new(); n], values: vec![Vec::new(); n], len: 0 }
    }

    /// Feeds one token and returns the next-token logits.
    pub fn step(&self, cache: &mut KvCache, id: usize) -> Vec<f64> {
        let c = &self.base.config;
        let h = c.hidden;
        let pos = cache.len;
        let mut x = self.input(&[id], pos);
        let mut none = None;
        for (bi, blk) in self.base.blocks.iter().enumerate() {
            let (a, _) = rmsnorm(&x, 1, &blk.norm1);
            let (q, _) = self.project(bi, Q, &a, 1, &mut none);
            let (k, _) = self.project(bi, K, &a, 1, &mut none);
            let (v, _) = self.project(bi, V, &a, 1, &mut none);
            cache.keys[bi].extend_from_slice(&k);
            cache.values[bi].extend_from_slice(&v);
            let (ctx, _) = attention(&q, &cache.keys[bi], &cache.values[bi], 1, pos + 1, pos, c.heads, h);
            let (o, _) = self.project(bi, O, &ctx, 1, &mut none);
            for (xi, oi) in x.iter_mut().zip(&o) {
                *xi += oi;
            }
            let (b, _) = rmsnorm(&x, 1, &blk.norm2);
            let (u, _) = self.project(bi, UP, &b, 1, &mut none);
            let (dn, _) = self.project(bi, DOWN, &silu(&u), 1, &mut none);
            for (xi, di) in x.iter_mut().zip(&dn) {
                *xi += di;
            }
        }
        cache.len += 1;
        let (normed, _) = rmsnorm(&x, 1, &self.base.final_norm);
        self.logits_row(&normed)
    }
}

/// Keys and values of every fed position, per block.
#[derive(Debug, Clone)]
pub struct KvCache {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    pub len: usize,
}

/// Causal multi-head attention of `tq` queries (absolute positions
/// `offset..offset+tq`) over `tk` keys. Returns context and probabilities
/// laid out `[head][query][key]`.
#[allow(clippy::too_many_arguments)]
fn attention(q: &[f64], k: &[f64], v: &[f64], tq: usize, tk: usize, offset: usize, heads: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let dh = h / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut ctx = vec![0.0; tq * h];
    let mut probs = vec![0.0; heads * tq * tk];
    for hd in 0..heads {
        let off = hd * dh;
        for i in 0..tq {
            let qi = &q[i * h + off..i * h + off + dh];
            let upto = offset + i + 1;
            let p = &mut probs[(hd * tq + i) * tk..(hd * tq + i + 1) * tk];
            let mut m = f64::NEG_INFINITY;
            for j in 0..upto {
                p[j] = dot(qi, &k[j * h + off..j * h + off + dh]) * scale;
                m = m.max(p[j]);
            }
            let mut z = 0.0;
            for pj in p[..upto].iter_mut() {
                *pj = (*pj - m).exp();
                z += *pj;
            }
            let out = &mut ctx[i * h + off..i * h + off + dh];
            for j in 0..upto {
                p[j] /= z;
                axpy(out, p[j], &v[j * h + off..j * h + off + dh]);
            }
        }
    }
    (ctx, probs)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    gctx: &[f64],
    t: usize,
    heads: usize,
    h: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = h / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (mut gq, mut gk, mut gv) = (vec![0.0; t * h], vec![0.0; t * h], vec![0.0; t * h]);
    let mut gp = vec![0.0; t];
    for hd in 0..heads {
        let off = hd * dh;
        for i in 0..t {
            let p = &probs[(hd * t + i) * t..(hd * t + i + 1) * t];
            let gc = &gctx[i * h + off..i * h + off + dh];
            let mut s = 0.0;
            for j in 0..=i {
                gp[j] = dot(gc, &v[j * h + off..j * h + off + dh]);
                s += p[j] * gp[j];
                axpy(&mut gv[j * h + off..j * h + off + dh], p[j], gc);
            }
            for j in 0..=i {
                let gs = p[j] * (gp[j] - s) * scale;
                if gs == 0.0 {
                    continue;
                }
                axpy(&mut gq[i * h + off..i * h + off + dh], gs, &k[j * h + off..j * h + off + dh]);
                axpy(&mut gk[j * h + off..j * h + off + dh], gs, &q[i * h + off..i * h + off + dh]);
            }
        }
    }
    (gq, gk, gv)
}
