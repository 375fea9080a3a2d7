use motion_agent_core::corpus::{synth_corpus, CorpusConfig};
use motion_agent_core::metrics::{
    bleu, caption_report, cider_d, diversity, evaluate_generation, fid, mm_dist, r_precision, rouge_l, shuffled_pairs,
    EvalItem, FeatureExtractor, GaussianStats, MetricError, MotionGenerator,
};
use motion_agent_core::motion::MotionSequence;
use motion_agent_core::rng;
use rand::Rng;

#[path = "support/caption_oracles.rs"]
mod caption_oracles;
use caption_oracles::{bleu_oracle, cider_oracle, fixture, rouge_oracle};

fn stats(mean: Vec<f64>, cov: Vec<f64>) -> GaussianStats {
    GaussianStats { dim: mean.len(), count: 1000, mean, cov }
}

fn scaled_identity(n: usize, a: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = a;
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    c
}

fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = scaled_identity(n, 1.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x * n + c].abs().partial_cmp(&m[y * n + c].abs()).unwrap()).unwrap();
        for j in 0..n {
            m.swap(c * n + j, p * n + j);
            inv.swap(c * n + j, p * n + j);
        }
        let d = m[c * n + c];
        for j in 0..n {
            m[c * n + j] /= d;
            inv[c * n + j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                for j in 0..n {
                    m[r * n + j] -= f * m[c * n + j];
                    inv[r * n + j] -= f * inv[c * n + j];
                }
            }
        }
    }
    inv
}

/// Denman–Beavers iteration for the principal root of a (non-symmetric) product.
fn trace_sqrt_product(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut y = mat_mul(a, b, n);
    let mut z = scaled_identity(n, 1.0);
    for _ in 0..60 {
        let yi = invert(&y, n);
        let zi = invert(&z, n);
        let ny: Vec<f64> = y.iter().zip(&zi).map(|(p, q)| 0.5 * (p + q)).collect();
        let nz: Vec<f64> = z.iter().zip(&yi).map(|(p, q)| 0.5 * (p + q)).collect();
        y = ny;
        z = nz;
    }
    (0..n).map(|i| y[i * n + i]).sum()
}

fn random_spd(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    s
}

#[test]
fn fid_closed_forms() {
    let f = 8;
    let a = stats(vec![0.0; f], scaled_identity(f, 1.0));
    let b = stats(vec![0.0; f], scaled_identity(f, 4.0));
    assert!((fid(&a, &b).unwrap() - 8.0).abs() <= 1e-6);
    assert!(fid(&a, &a).unwrap() <= 1e-6);
    let mut r = rng::seeded(1);
    let cov = random_spd(&mut r, f);
    let v: Vec<f64> = (0..f).map(|_| r.random_range(-1.0..1.0)).collect();
    let shifted = stats(v.clone(), cov.clone());
    let origin = stats(vec![0.0; f], cov);
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    assert!((fid(&origin, &shifted).unwrap() - norm2).abs() <= 1e-6);
}

#[test]
fn fid_matches_iterative_oracle() {
    let mut r = rng::seeded(2);
    for n in [3, 5, 8] {
        let (s1, s2) = (random_spd(&mut r, n), random_spd(&mut r, n));
        let m1: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let m2: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let mean: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b).powi(2)).sum();
        let tr = |m: &[f64]| (0..n).map(|i| m[i * n + i]).sum::<f64>();
        let expected = mean + tr(&s1) + tr(&s2) - 2.0 * trace_sqrt_product(&s1, &s2, n);
        let got = fid(&stats(m1.clone(), s1.clone()), &stats(m2.clone(), s2.clone())).unwrap();
        assert!((got - expected).abs() <= 1e-8 * expected.abs().max(1.0), "{got} vs {expected}");
        let sym = fid(&stats(m2, s2), &stats(m1, s1)).unwrap();
        assert!((got - sym).abs() <= 1e-8 * got.max(1.0));
    }
}

#[test]
fn fid_of_sampled_features_is_zero_on_itself() {
    let mut r = rng::seeded(3);
    let feats: Vec<f64> = (0..50 * 6).map(|_| r.random_range(-1.0..1.0)).collect();
    let s = GaussianStats::from_features(&feats, 6).unwrap();
    assert!(fid(&s, &s).unwrap() <= 1e-6);
    assert!(!s.rank_deficient());
    for i in 0..6 {
        for j in 0..6 {
            assert!((s.cov[i * 6 + j] - s.cov[j * 6 + i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn mm_dist_cases() {
    let text = [0.0, 0.0, 0.0, 0.0];
    let motion = [1.0, 0.0, 0.0, 3.0];
    assert_eq!(mm_dist(&text, &motion, 2).unwrap(), 2.0);
    assert_eq!(mm_dist(&motion, &motion, 2).unwrap(), 0.0);
    let mut r = rng::seeded(4);
    let a: Vec<f64> = (0..100 * 5).map(|_| r.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..100 * 5).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut sum = 0.0;
    for i in 0..100 {
        let mut s = 0.0;
        for c in 0..5 {
            s += (a[i * 5 + c] - b[i * 5 + c]).powi(2);
        }
        sum += s.sqrt();
    }
    assert!((mm_dist(&a, &b, 5).unwrap() - sum / 100.0).abs() <= 1e-9);
    assert!(matches!(mm_dist(&a, &b[..10], 5), Err(MetricError::CountMismatch(..))));
}

#[test]
fn r_precision_bounds() {
    let mut r = rng::seeded(5);
    let dim = 8;
    let n = 1200;
    let m: Vec<f64> = (0..n * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let aligned = r_precision(&m, &m, dim, 32, 3, 1).unwrap();
    assert_eq!(aligned, vec![1.0, 1.0, 1.0]);
    let t: Vec<f64> = (0..n * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let tops = r_precision(&m, &t, dim, 32, 3, 1).unwrap();
    let p = 1.0 / 32.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((tops[0] - p).abs() <= 3.0 * sigma, "{tops:?}");
    assert!(tops[0] <= tops[1] && tops[1] <= tops[2]);
    // a common isometry (coordinate permutation with sign flips) changes nothing
    let iso = |v: &[f64]| -> Vec<f64> {
        v.chunks(dim).flat_map(|row| (0..dim).map(move |c| if c % 2 == 0 { -row[(c + 3) % dim] } else { row[(c + 3) % dim] })).collect()
    };
    assert_eq!(r_precision(&iso(&m), &iso(&t), dim, 32, 3, 1).unwrap(), tops);
    assert!(r_precision(&m[..31 * dim], &t[..31 * dim], dim, 32, 3, 1).is_err());
}

#[test]
fn r_precision_ties_break_uniformly() {
    // every text identical: the true text ties with all 31 decoys, so its
    // rank is uniform on 1..=32
    let dim = 2;
    let n = 3200;
    let m = vec![0.5; n * dim];
    let t = vec![0.0; n * dim];
    let r = r_precision(&m, &t, dim, 32, 3, 0).unwrap();
    for (k, v) in r.iter().enumerate() {
        let p = (k + 1) as f64 / 32.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((v - p).abs() < 4.0 * sigma, "top{} {v} vs {p}", k + 1);
    }
    // two exact copies of the true text among the pool: top1 near one half
    let mut t = vec![0.0; 64 * dim];
    let mut m = vec![0.0; 64 * dim];
    for i in 0..64 {
        m[i * dim] = (i / 2) as f64 * 10.0;
        t[i * dim] = (i / 2) as f64 * 10.0;
    }
    let top1 = r_precision(&m, &t, dim, 63, 1, 4).unwrap()[0];
    assert!((top1 - 0.5).abs() < 0.25, "{top1}");
}

#[test]
fn diversity_cases() {
    let same = vec![0.3; 20 * 4];
    assert_eq!(diversity(&same, 4, 10, 1).unwrap(), 0.0);
    let mut r = rng::seeded(6);
    let f: Vec<f64> = (0..700 * 3).map(|_| r.random_range(-1.0..1.0)).collect();
    let a = diversity(&f, 3, 300, 9).unwrap();
    assert_eq!(a, diversity(&f, 3, 300, 9).unwrap());
    // uniform cube: mean pair distance is about 1.32 for side 2 in 3-D
    let b = diversity(&f, 3, 300, 10).unwrap();
    assert!((a - b).abs() < 0.15 && (a - 1.32).abs() < 0.15, "{a} {b}");
    assert!(matches!(diversity(&f[..599 * 3], 3, 300, 1), Err(MetricError::InsufficientSamples { .. })));
}

#[test]
fn caption_metrics_match_counting_oracles() {
    for seed in 0..3 {
        let (c, r) = fixture(seed, 50);
        for n in 1..=4 {
            let got = bleu(&c, &r, n).unwrap();
            let want = bleu_oracle(&c, &r, n);
            assert!((got - want).abs() <= 1e-9, "bleu{n}: {got} vs {want}");
        }
        assert!((rouge_l(&c, &r).unwrap() - rouge_oracle(&c, &r)).abs() <= 1e-9);
        let (got, want) = (cider_d(&c, &r).unwrap(), cider_oracle(&c, &r));
        assert!((got - want).abs() <= 1e-9, "cider {got} vs {want}");
    }
}

#[test]
fn caption_metric_hand_cases() {
    assert_eq!(bleu(&["a b c d"], &[vec!["a b x d"]], 1).unwrap(), 75.0);
    let same = caption_report(&["a person walks forward"], &[vec!["a person walks forward"]]).unwrap();
    assert!((same.bleu1 - 100.0).abs() < 1e-12 && (same.bleu4 - 100.0).abs() < 1e-12);
    assert!((same.rouge_l - 100.0).abs() < 1e-12);
    assert!(matches!(bleu(&["  "], &[vec!["a"]], 1), Err(MetricError::EmptyCandidate(0))));
}

#[test]
fn shuffled_baseline_never_keeps_a_pair() {
    let refs: Vec<Vec<String>> = (0..10).map(|i| vec![format!("caption {i}")]).collect();
    let s = shuffled_pairs(&refs, 3);
    for (i, c) in s.iter().enumerate() {
        assert_ne!(c, &refs[i][0]);
    }
    assert_eq!(s, shuffled_pairs(&refs, 3));
}

fn eval_items() -> Vec<EvalItem> {
    let corpus = synth_corpus(&CorpusConfig { samples_per_archetype: 10, ..CorpusConfig::default() }, 11).unwrap();
    corpus
        .items
        .iter()
        .map(|i| EvalItem {
            motion: i.motion.clone(),
            caption: i.annotations[0].text.clone(),
            references: i.annotations.iter().map(|a| a.text.clone()).collect(),
        })
        .collect()
}

/// Replays the items in call order; captions repeat across the corpus.
struct Lookup(Vec<EvalItem>, f32, usize);

impl MotionGenerator for Lookup {
    fn generate(&mut self, caption: &str, seed: u64) -> Result<MotionSequence, String> {
        let item = &self.0[self.2 % self.0.len()];
        self.2 += 1;
        if item.caption != caption {
            return Err("out of order".into());
        }
        if self.1 == 0.0 {
            return Ok(item.motion.clone());
        }
        let mut r = rng::seeded(seed);
        let mut f: Vec<f32> = item.motion.frames().to_vec();
        for v in f.iter_mut() {
            *v += self.1 * r.random_range(-1.0f32..1.0);
        }
        let d = item.motion.dim();
        for row in f.chunks_mut(d) {
            row[3] = row[3].abs();
        }
        MotionSequence::new(f, item.motion.fps(), item.motion.skeleton().clone()).map_err(|e| e.to_string())
    }
}

#[test]
fn evaluation_report_mechanics() {
    let items = eval_items();
    let pairs = items.iter().map(|i| (&i.motion, i.caption.as_str()));
    let ex = FeatureExtractor::fit(1, 16, pairs);
    let mut gt = Lookup(items.clone(), 0.0, 0);
    let report = evaluate_generation(&mut gt, &items, &ex, 20, 5).unwrap();
    assert_eq!(report.repeats, 20);
    for name in ["r_precision_top1", "r_precision_top2", "r_precision_top3", "fid", "mm_dist", "diversity"] {
        let m = &report.metrics[name];
        assert_eq!(m.per_run.len(), 20);
        let mean = m.per_run.iter().sum::<f64>() / 20.0;
        let std = (m.per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
        assert!((m.mean - mean).abs() < 1e-12 && (m.ci95 - 1.96 * std / 20f64.sqrt()).abs() < 1e-12);
    }
    assert!(report.metrics["fid"].mean <= 1e-6, "{:?}", report.metrics["fid"]);
    assert_eq!(report.metrics["r_precision_top1"].per_run[0], report.ground_truth["r_precision_top1"]);
    assert_eq!(report.s_dis, 20);
    assert!(!report.warnings.is_empty());
    let again = evaluate_generation(&mut Lookup(items.clone(), 0.0, 0), &items, &ex, 20, 5).unwrap();
    assert_eq!(again, report);

    let mut noisy = Lookup(items.clone(), 0.05, 0);
    let r5 = evaluate_generation(&mut noisy, &items, &ex, 5, 100).unwrap();
    let r20 = evaluate_generation(&mut noisy, &items, &ex, 20, 100).unwrap();
    let (c5, c20) = (r5.metrics["fid"].ci95, r20.metrics["fid"].ci95);
    assert!(c20 < c5, "{c5} {c20}");
    assert!(r20.metrics["fid"].mean > 0.0);
}

#[test]
fn extractor_is_deterministic_and_unit_norm() {
    let items = eval_items();
    let a = FeatureExtractor::fit(3, 16, items.iter().map(|i| (&i.motion, i.caption.as_str())));
    let b = FeatureExtractor::fit(3, 16, items.iter().map(|i| (&i.motion, i.caption.as_str())));
    assert_eq!(a, b);
    let f = a.motion(&items[0].motion);
    assert!((f.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    let t = a.text("a person waves");
    assert!((t.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
}
