//! Reference computations for integration and acceptance tests. None of
//! these call into the library's numeric code.

#![allow(dead_code)]

pub mod corpus;

use rand::Rng;

// ---- PLDA: numeric integration over the latent speaker variable ----

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// ln ∫ exp(f(y)) dy over [lo, hi] by composite Simpson, scaled by the max
/// of f on the grid to stay in range.
fn log_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let logs: Vec<f64> = (0..=n).map(|i| f(lo + i as f64 * h)).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (l - peak).exp();
    }
    peak + (acc * h / 3.0).ln()
}

/// One latent dimension of the two-covariance model: observations are
/// `y + noise` with `y ~ N(0, psi)` and unit noise. Returns
/// ln p(u, v | same y) − ln p(u) − ln p(v), each marginal integrated numerically.
pub fn llr_by_integration(psi: f64, u: f64, v: f64) -> f64 {
    assert!(psi > 0.0);
    let r = 12.0 * psi.sqrt() + u.abs().max(v.abs()) + 12.0;
    let n = 8_000;
    let prior = |y: f64| log_normal_pdf(y, 0.0, psi);
    let joint = log_integral(|y| prior(y) + log_normal_pdf(u, y, 1.0) + log_normal_pdf(v, y, 1.0), -r, r, n);
    let pu = log_integral(|y| prior(y) + log_normal_pdf(u, y, 1.0), -r, r, n);
    let pv = log_integral(|y| prior(y) + log_normal_pdf(v, y, 1.0), -r, r, n);
    joint - pu - pv
}

/// `transform · (x' − mean)` where `x'` is `x` rescaled to norm √d if `length_norm`.
pub fn project_reference(mean: &[f64], rows: &[Vec<f64>], length_norm: bool, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let scaled: Vec<f64> = if length_norm {
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter().map(|a| a * (d as f64).sqrt() / norm).collect()
    } else {
        x.to_vec()
    };
    rows.iter()
        .map(|row| row.iter().zip(&scaled).zip(mean).map(|((t, a), m)| t * (a - m)).sum())
        .collect()
}

// ---- EER: exhaustive threshold search with hull mixing ----

/// (pfa, pmiss) at every threshold "accept if score >= t", t over the
/// distinct scores plus +inf.
pub fn threshold_points(tar: &[f64], non: &[f64]) -> Vec<(f64, f64)> {
    let mut ts: Vec<f64> = tar.iter().chain(non).cloned().collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts.push(f64::INFINITY);
    ts.iter()
        .map(|&t| {
            let pfa = non.iter().filter(|&&s| s >= t).count() as f64 / non.len() as f64;
            let pmiss = tar.iter().filter(|&&s| s < t).count() as f64 / tar.len() as f64;
            (pfa, pmiss)
        })
        .collect()
}

/// Lowest point on the diagonal reachable by mixing two operating points.
/// Randomizing between two thresholds realizes any point on the segment
/// between them, so the minimum over all pairs is the convex-hull EER.
pub fn eer_exhaustive(tar: &[f64], non: &[f64]) -> f64 {
    let pts = threshold_points(tar, non);
    let mut best = f64::INFINITY;
    for &(a1, b1) in &pts {
        let d1 = a1 - b1;
        if d1 == 0.0 {
            best = best.min(a1);
        }
        for &(a2, b2) in &pts {
            let d2 = a2 - b2;
            if d1 > 0.0 && d2 < 0.0 {
                let lam = d1 / (d1 - d2);
                best = best.min(a1 + lam * (a2 - a1));
            }
        }
    }
    best
}

// ---- min Cllr: brute force over monotone step functions ----

fn cost_bits(tar_in_block: f64, non_in_block: f64, n_tar: f64, n_non: f64) -> f64 {
    // posterior p of the block; LLR = logit(p) - ln(n_tar / n_non)
    let p = tar_in_block / (tar_in_block + non_in_block);
    let mut c = 0.0;
    if tar_in_block > 0.0 {
        c += tar_in_block / n_tar * (1.0 + (1.0 - p) / p * n_tar / n_non).log2();
    }
    if non_in_block > 0.0 {
        c += non_in_block / n_non * (1.0 + p / (1.0 - p) * n_non / n_tar).log2();
    }
    c / 2.0
}

/// Minimum Cllr over every non-decreasing map from scores to LLRs: enumerate
/// all partitions of the sorted distinct scores into contiguous blocks whose
/// target fractions are non-decreasing; the best LLR on a block is the one
/// matching its empirical target fraction.
pub fn min_cllr_bruteforce(tar: &[f64], non: &[f64]) -> f64 {
    let mut vals: Vec<f64> = tar.iter().chain(non).cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    let m = vals.len();
    assert!(m <= 16, "brute force is exponential in distinct scores");
    let counts: Vec<(f64, f64)> = vals
        .iter()
        .map(|v| {
            (
                tar.iter().filter(|&&s| s == *v).count() as f64,
                non.iter().filter(|&&s| s == *v).count() as f64,
            )
        })
        .collect();
    let (nt, nn) = (tar.len() as f64, non.len() as f64);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (m - 1)) {
        let mut blocks = Vec::new();
        let (mut bt, mut bn) = (0.0, 0.0);
        for (i, (t, n)) in counts.iter().enumerate() {
            bt += t;
            bn += n;
            if i == m - 1 || mask & (1 << i) != 0 {
                blocks.push((bt, bn));
                bt = 0.0;
                bn = 0.0;
            }
        }
        let monotone = blocks
            .windows(2)
            .all(|w| w[0].0 / (w[0].0 + w[0].1) <= w[1].0 / (w[1].0 + w[1].1));
        if monotone {
            let c: f64 = blocks.iter().map(|&(t, n)| cost_bits(t, n, nt, nn)).sum();
            best = best.min(c);
        }
    }
    best
}

/// Cllr in bits straight from the definition.
pub fn cllr_reference(tar: &[f64], non: &[f64]) -> f64 {
    let t: f64 = tar.iter().map(|s| (1.0 + (-s).exp()).log2()).sum::<f64>() / tar.len() as f64;
    let n: f64 = non.iter().map(|s| (1.0 + s.exp()).log2()).sum::<f64>() / non.len() as f64;
    (t + n) / 2.0
}

// ---- log-F0 statistics ----

pub fn log_stats_reference(values: &[f64]) -> (f64, f64, usize) {
    let logs: Vec<f64> = values.iter().filter(|v| **v > 0.0).map(|v| v.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    (mean, var.sqrt(), logs.len())
}

/// Random contour with `voiced` frames in [lo, hi] Hz and `unvoiced` zeros
/// at random positions.
pub fn random_contour(rng: &mut impl Rng, voiced: usize, unvoiced: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..voiced).map(|_| rng.random_range(lo..=hi)).collect();
    for _ in 0..unvoiced {
        let at = rng.random_range(0..=v.len());
        v.insert(at, 0.0);
    }
    v
}

/// Random strictly increasing map: a·x + b·tanh(c·x + d) + e·x³ + f with
/// a > 0 and b, c, e ≥ 0.
pub fn random_increasing(rng: &mut impl Rng) -> impl Fn(f64) -> f64 {
    let a = rng.random_range(0.1..5.0);
    let b = rng.random_range(0.0..3.0);
    let c = rng.random_range(0.0..2.0);
    let d = rng.random_range(-1.0..1.0);
    let e = rng.random_range(0.0..0.5);
    let f = rng.random_range(-10.0..10.0);
    move |x: f64| a * x + b * (c * x + d).tanh() + e * x * x * x + f
}

// ---- text token streams ----

/// Records of a text file as whitespace-separated tokens, skipping blank
/// lines and lines whose first token starts with `#`.
pub fn token_records(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|t| !t.is_empty() && !t[0].starts_with('#'))
        .collect()
}

fn token_eq(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// True when both texts carry the same records (in any order) with equal
/// tokens, numeric tokens compared by value.
pub fn same_token_stream(a: &str, b: &str) -> bool {
    let mut ra = token_records(a);
    let mut rb = token_records(b);
    if ra.len() != rb.len() {
        return false;
    }
    let key = |r: &Vec<String>| -> Vec<String> {
        r.iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) => format!("{:e}", v + 0.0),
                Err(_) => t.clone(),
            })
            .collect()
    };
    ra.sort_by_key(key);
    rb.sort_by_key(key);
    ra.iter()
        .zip(&rb)
        .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| token_eq(p, q)))
}
