use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::MetricError;
use crate::motion::normalize_text;

type Gram = Vec<String>;

/// Semantic-similarity scorer backed by a pretrained encoder; none ships here.
pub trait BertScorer {
    fn score(&self, candidates: &[String], references: &[Vec<String>]) -> Result<f64, String>;
}

fn tokenize_all<S: AsRef<str>, R: AsRef<str>>(
    cands: &[S],
    refs: &[Vec<R>],
) -> Result<(Vec<Vec<String>>, Vec<Vec<Vec<String>>>), MetricError> {
    if cands.len() != refs.len() {
        return Err(MetricError::CountMismatch(cands.len(), refs.len()));
    }
    let mut c = Vec::with_capacity(cands.len());
    for (i, s) in cands.iter().enumerate() {
        let t = normalize_text(s.as_ref());
        if t.is_empty() {
            return Err(MetricError::EmptyCandidate(i));
        }
        c.push(t);
    }
    let r = refs.iter().map(|rs| rs.iter().map(|s| normalize_text(s.as_ref())).collect()).collect();
    Ok((c, r))
}

fn ngrams(words: &[String], n: usize) -> BTreeMap<Gram, usize> {
    let mut m = BTreeMap::new();
    if words.len() >= n {
        for w in words.windows(n) {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU-n in percent: clipped n-gram precisions for orders `1..=n`
/// combined by uniform geometric mean, times the brevity penalty using the
/// closest reference length (shorter on ties).
pub fn bleu<S: AsRef<str>, R: AsRef<str>>(cands: &[S], refs: &[Vec<R>], n: usize) -> Result<f64, MetricError> {
    let (cands, refs) = tokenize_all(cands, refs)?;
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, rs) in cands.iter().zip(&refs) {
        c_len += c.len();
        r_len += rs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - c.len() as i64).abs(), l))
            .unwrap_or(0);
        for k in 1..=n {
            let cg = ngrams(c, k);
            let mut max_ref: BTreeMap<&Gram, usize> = BTreeMap::new();
            let rgs: Vec<BTreeMap<Gram, usize>> = rs.iter().map(|r| ngrams(r, k)).collect();
            for rg in &rgs {
                for (g, &cnt) in rg {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(cnt);
                }
            }
            for (g, &cnt) in &cg {
                matched[k - 1] += cnt.min(max_ref.get(g).copied().unwrap_or(0));
            }
            total[k - 1] += c.len().saturating_sub(k - 1);
        }
    }
    if matched.iter().zip(&total).any(|(&m, &t)| m == 0 || t == 0) {
        return Ok(0.0);
    }
    let log_p: f64 = matched.iter().zip(&total).map(|(&m, &t)| (m as f64 / t as f64).ln()).sum::<f64>() / n as f64;
    let bp = if c_len < r_len { (1.0 - r_len as f64 / c_len as f64).exp() } else { 1.0 };
    Ok(100.0 * bp * log_p.exp())
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (β = 1.2) in percent, with precision and recall each
/// maximised over references, averaged over candidates.
pub fn rouge_l<S: AsRef<str>, R: AsRef<str>>(cands: &[S], refs: &[Vec<R>]) -> Result<f64, MetricError> {
    let (cands, refs) = tokenize_all(cands, refs)?;
    let beta2 = 1.2f64 * 1.2;
    let mut sum = 0.0;
    for (c, rs) in cands.iter().zip(&refs) {
        let (mut p, mut r) = (0.0f64, 0.0f64);
        for rf in rs {
            let l = lcs(c, rf) as f64;
            p = p.max(l / c.len() as f64);
            if !rf.is_empty() {
                r = r.max(l / rf.len() as f64);
            }
        }
        if p > 0.0 && r > 0.0 {
            sum += (1.0 + beta2) * p * r / (r + beta2 * p);
        }
    }
    Ok(100.0 * sum / cands.len().max(1) as f64)
}

struct TfIdf {
    vec: Vec<BTreeMap<Gram, f64>>,
    norm: Vec<f64>,
    length: usize,
}

const CIDER_N: usize = 4;
const CIDER_SIGMA: f64 = 6.0;

fn tfidf(words: &[String], df: &BTreeMap<Gram, usize>, ref_len: f64) -> TfIdf {
    let mut vec = vec![BTreeMap::new(); CIDER_N];
    let mut norm = vec![0.0; CIDER_N];
    let mut length = 0;
    for k in 1..=CIDER_N {
        for (g, tf) in ngrams(words, k) {
            let d = (df.get(&g).copied().unwrap_or(0).max(1) as f64).ln();
            let v = tf as f64 * (ref_len - d);
            norm[k - 1] += v * v;
            if k == 2 {
                // reference implementation measures length in bigrams
                length += tf;
            }
            vec[k - 1].insert(g, v);
        }
    }
    TfIdf { vec, norm: norm.into_iter().map(f64::sqrt).collect(), length }
}

/// CIDEr-D: clipped TF-IDF cosine over n-grams 1..4 with a Gaussian length
/// penalty (σ = 6), averaged over references and orders, scaled by 10.
pub fn cider_d<S: AsRef<str>, R: AsRef<str>>(cands: &[S], refs: &[Vec<R>]) -> Result<f64, MetricError> {
    let (cands, refs) = tokenize_all(cands, refs)?;
    let mut df: BTreeMap<Gram, usize> = BTreeMap::new();
    for rs in &refs {
        let mut seen = BTreeSet::new();
        for r in rs {
            for k in 1..=CIDER_N {
                seen.extend(ngrams(r, k).into_keys());
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let ref_len = (refs.len() as f64).ln();
    let mut total = 0.0;
    for (c, rs) in cands.iter().zip(&refs) {
        let hyp = tfidf(c, &df, ref_len);
        let mut score = [0.0f64; CIDER_N];
        for r in rs {
            let rf = tfidf(r, &df, ref_len);
            let delta = hyp.length as f64 - rf.length as f64;
            let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
            for k in 0..CIDER_N {
                let mut val = 0.0;
                for (g, &hv) in &hyp.vec[k] {
                    let rv = rf.vec[k].get(g).copied().unwrap_or(0.0);
                    val += hv.min(rv) * rv;
                }
                if hyp.norm[k] != 0.0 && rf.norm[k] != 0.0 {
                    val /= hyp.norm[k] * rf.norm[k];
                }
                score[k] += val * penalty;
            }
        }
        let avg = score.iter().sum::<f64>() / CIDER_N as f64 / rs.len().max(1) as f64;
        total += avg * 10.0;
    }
    Ok(total / cands.len().max(1) as f64)
}
