//! Counting oracles for the caption metrics, shared with the acceptance suite.

use std::collections::HashMap;

use motion_agent_core::rng;
use rand::Rng;

pub fn words(s: &str) -> Vec<String> {
    s.split(' ').filter(|w| !w.is_empty()).map(|w| w.to_string()).collect()
}

fn grams(w: &[String], n: usize) -> Vec<Vec<String>> {
    if w.len() < n {
        return vec![];
    }
    (0..=w.len() - n).map(|i| w[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

pub fn bleu_oracle(c: &[String], r: &[Vec<String>], n: usize) -> f64 {
    let mut logs = 0.0;
    let (mut cl, mut rl) = (0usize, 0usize);
    for (cand, refs) in c.iter().zip(r) {
        let cw = words(cand);
        cl += cw.len();
        let mut best = usize::MAX;
        let mut best_len = 0;
        for rf in refs {
            let l = words(rf).len();
            let d = (l as i64 - cw.len() as i64).unsigned_abs() as usize;
            if d < best || (d == best && l < best_len) {
                best = d;
                best_len = l;
            }
        }
        rl += best_len;
    }
    for k in 1..=n {
        let (mut m, mut t) = (0usize, 0usize);
        for (cand, refs) in c.iter().zip(r) {
            let cg = grams(&words(cand), k);
            t += cg.len();
            let mut done: Vec<Vec<String>> = vec![];
            for g in &cg {
                if done.contains(g) {
                    continue;
                }
                done.push(g.clone());
                let max_ref = refs.iter().map(|rf| count(&grams(&words(rf), k), g)).max().unwrap_or(0);
                m += count(&cg, g).min(max_ref);
            }
        }
        if m == 0 {
            return 0.0;
        }
        logs += (m as f64 / t as f64).ln() / n as f64;
    }
    let bp = if cl < rl { (1.0 - rl as f64 / cl as f64).exp() } else { 1.0 };
    100.0 * bp * logs.exp()
}

fn lcs_rec(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if i == a.len() || j == b.len() {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let v = if a[i] == b[j] {
        1 + lcs_rec(a, b, i + 1, j + 1, memo)
    } else {
        lcs_rec(a, b, i + 1, j, memo).max(lcs_rec(a, b, i, j + 1, memo))
    };
    memo.insert((i, j), v);
    v
}

pub fn rouge_oracle(c: &[String], r: &[Vec<String>]) -> f64 {
    let mut total = 0.0;
    for (cand, refs) in c.iter().zip(r) {
        let cw = words(cand);
        let (mut p, mut rc) = (0.0f64, 0.0f64);
        for rf in refs {
            let rw = words(rf);
            let l = lcs_rec(&cw, &rw, 0, 0, &mut HashMap::new()) as f64;
            p = p.max(l / cw.len() as f64);
            rc = rc.max(l / rw.len() as f64);
        }
        if p > 0.0 && rc > 0.0 {
            total += (1.0 + 1.44) * p * rc / (rc + 1.44 * p);
        }
    }
    100.0 * total / c.len() as f64
}

pub fn cider_oracle(c: &[String], r: &[Vec<String>]) -> f64 {
    let n_docs = r.len() as f64;
    let mut df: HashMap<Vec<String>, f64> = HashMap::new();
    for refs in r {
        let mut seen: Vec<Vec<String>> = vec![];
        for rf in refs {
            for k in 1..=4 {
                for g in grams(&words(rf), k) {
                    if !seen.contains(&g) {
                        seen.push(g);
                    }
                }
            }
        }
        for g in seen {
            *df.entry(g).or_default() += 1.0;
        }
    }
    let vecs = |s: &str| {
        let w = words(s);
        let mut out: Vec<HashMap<Vec<String>, f64>> = vec![HashMap::new(); 4];
        for k in 1..=4 {
            let gs = grams(&w, k);
            for g in &gs {
                let tf = count(&gs, g) as f64;
                let idf = n_docs.ln() - df.get(g).copied().unwrap_or(1.0).max(1.0).ln();
                out[k - 1].insert(g.clone(), tf * idf);
            }
        }
        let len = grams(&w, 2).len() as f64;
        (out, len)
    };
    let mut total = 0.0;
    for (cand, refs) in c.iter().zip(r) {
        let (hv, hl) = vecs(cand);
        let mut s = 0.0;
        for rf in refs {
            let (rv, rl) = vecs(rf);
            for k in 0..4 {
                let hn: f64 = hv[k].values().map(|v| v * v).sum::<f64>().sqrt();
                let rn: f64 = rv[k].values().map(|v| v * v).sum::<f64>().sqrt();
                let mut dotp = 0.0;
                for (g, v) in &hv[k] {
                    let w = rv[k].get(g).copied().unwrap_or(0.0);
                    dotp += v.min(w) * w;
                }
                if hn != 0.0 && rn != 0.0 {
                    dotp /= hn * rn;
                }
                s += dotp * (-(hl - rl).powi(2) / 72.0).exp();
            }
        }
        total += 10.0 * s / 4.0 / refs.len() as f64;
    }
    total / c.len() as f64
}

pub fn fixture(seed: u64, n: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let vocab = ["a", "person", "walks", "forward", "slowly", "waves", "left", "hand", "turns", "the", "quickly", "down"];
    let mut r = rng::seeded(seed);
    let sentence = |r: &mut dyn rand::RngCore| -> String {
        let len = r.random_range(2..9);
        (0..len).map(|_| vocab[r.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    let mut cands = vec![];
    let mut refs = vec![];
    for _ in 0..n {
        cands.push(sentence(&mut r));
        let k = r.random_range(1..4);
        refs.push((0..k).map(|_| sentence(&mut r)).collect());
    }
    (cands, refs)
}
