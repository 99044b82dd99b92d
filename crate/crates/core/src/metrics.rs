//! Linkability metrics over labelled trial scores.
//!
//! Scores are natural-log likelihood ratios. EER is read off the ROC convex
//! hull, Cllr is reported in bits, and min-Cllr is Cllr after the optimal
//! monotone recalibration found by pool-adjacent-violators.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialScoreSet {
    pub target_scores: Vec<f64>,
    pub nontarget_scores: Vec<f64>,
}

impl TrialScoreSet {
    pub fn new(target_scores: Vec<f64>, nontarget_scores: Vec<f64>) -> Self {
        Self {
            target_scores,
            nontarget_scores,
        }
    }

    fn check(&self) -> Result<()> {
        if self.target_scores.is_empty() {
            return Err(Error::EmptyPopulation("target"));
        }
        if self.nontarget_scores.is_empty() {
            return Err(Error::EmptyPopulation("nontarget"));
        }
        if let Some(s) = self
            .target_scores
            .iter()
            .chain(&self.nontarget_scores)
            .find(|s| !s.is_finite())
        {
            return Err(Error::InvalidValue(format!("score {s} is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub pfa: f64,
    pub pmiss: f64,
}

/// Maps `-0.0` to `0.0` so ties compare equal under `total_cmp`.
fn canonical_zero(s: f64) -> f64 {
    s + 0.0
}

/// Distinct score values, ascending, with the number of targets and
/// nontargets carrying each.
fn tied_blocks(scores: &TrialScoreSet) -> Vec<(f64, usize, usize)> {
    let mut all: Vec<(f64, bool)> = scores
        .target_scores
        .iter()
        .map(|&s| (canonical_zero(s), true))
        .chain(scores.nontarget_scores.iter().map(|&s| (canonical_zero(s), false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut blocks: Vec<(f64, usize, usize)> = Vec::new();
    for (s, is_tar) in all {
        match blocks.last_mut() {
            Some(last) if last.0 == s => {
                if is_tar {
                    last.1 += 1;
                } else {
                    last.2 += 1;
                }
            }
            _ => blocks.push((s, is_tar as usize, (!is_tar) as usize)),
        }
    }
    blocks
}

/// Every distinct empirical operating point, ascending in Pfa, from (0, 1)
/// (reject everything) to (1, 0) (accept everything).
pub fn det_points(scores: &TrialScoreSet) -> Result<Vec<DetPoint>> {
    scores.check()?;
    let nt = scores.target_scores.len() as f64;
    let nn = scores.nontarget_scores.len() as f64;
    let blocks = tied_blocks(scores);
    // Sweep the threshold downward: each block crossed moves to "accepted".
    let mut points = vec![DetPoint { pfa: 0.0, pmiss: 1.0 }];
    let (mut acc_t, mut acc_n) = (0usize, 0usize);
    for &(_, t, n) in blocks.iter().rev() {
        acc_t += t;
        acc_n += n;
        let p = DetPoint {
            pfa: acc_n as f64 / nn,
            pmiss: 1.0 - acc_t as f64 / nt,
        };
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    Ok(points)
}

fn cross(o: DetPoint, a: DetPoint, b: DetPoint) -> f64 {
    (a.pfa - o.pfa) * (b.pmiss - o.pmiss) - (a.pmiss - o.pmiss) * (b.pfa - o.pfa)
}

/// Vertices of the ROC convex hull in (Pfa, Pmiss) space, ascending in Pfa.
pub fn rocch(scores: &TrialScoreSet) -> Result<Vec<DetPoint>> {
    let points = det_points(scores)?;
    let mut hull: Vec<DetPoint> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(hull)
}

/// Equal error rate where the ROC convex hull meets Pfa = Pmiss.
pub fn eer(scores: &TrialScoreSet) -> Result<f64> {
    let hull = rocch(scores)?;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let da = a.pmiss - a.pfa;
        let db = b.pmiss - b.pfa;
        if da >= 0.0 && db <= 0.0 {
            if da == db {
                return Ok(a.pfa);
            }
            let t = da / (da - db);
            return Ok(a.pfa + t * (b.pfa - a.pfa));
        }
    }
    unreachable!("hull runs from (0,1) to (1,0) and must cross the diagonal")
}

/// `log(1 + e^x)` without overflow; `softplus(-inf) = 0`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

// Terms are converted to bits before summing so that LLR 0 contributes
// exactly one bit.
fn cllr_unchecked(tar: &[f64], non: &[f64]) -> f64 {
    let c_tar = tar.iter().map(|&s| softplus(-s) / LN_2).sum::<f64>() / tar.len() as f64;
    let c_non = non.iter().map(|&s| softplus(s) / LN_2).sum::<f64>() / non.len() as f64;
    0.5 * (c_tar + c_non)
}

/// Cost of log-likelihood ratio, in bits.
pub fn cllr(scores: &TrialScoreSet) -> Result<f64> {
    scores.check()?;
    Ok(cllr_unchecked(&scores.target_scores, &scores.nontarget_scores))
}

/// Isotonic (non-decreasing) least-squares fit of the target indicator over
/// tied score blocks. Returns one posterior per block.
fn pav_posteriors(blocks: &[(f64, usize, usize)]) -> Vec<f64> {
    // (sum of targets, weight, number of blocks merged)
    let mut stack: Vec<(f64, f64, usize)> = Vec::with_capacity(blocks.len());
    for &(_, t, n) in blocks {
        stack.push((t as f64, (t + n) as f64, 1));
        while stack.len() >= 2 {
            let (s1, w1, c1) = stack[stack.len() - 1];
            let (s0, w0, c0) = stack[stack.len() - 2];
            if s0 / w0 >= s1 / w1 {
                stack.pop();
                stack.pop();
                stack.push((s0 + s1, w0 + w1, c0 + c1));
            } else {
                break;
            }
        }
    }
    stack
        .into_iter()
        .flat_map(|(s, w, c)| std::iter::repeat_n(s / w, c))
        .collect()
}

/// Optimally recalibrated LLRs for `(target, nontarget)`, in input order.
///
/// The isotonic posterior is converted to an LLR by subtracting the log
/// prior odds implied by the trial counts.
pub fn pav_calibrate(scores: &TrialScoreSet) -> Result<TrialScoreSet> {
    scores.check()?;
    let blocks = tied_blocks(scores);
    let post = pav_posteriors(&blocks);
    let log_prior_odds =
        (scores.target_scores.len() as f64 / scores.nontarget_scores.len() as f64).ln();
    let llr_of = |s: f64| {
        let i = blocks
            .binary_search_by(|b| b.0.total_cmp(&canonical_zero(s)))
            .expect("score present in its own block list");
        let p = post[i];
        (p / (1.0 - p)).ln() - log_prior_odds
    };
    Ok(TrialScoreSet {
        target_scores: scores.target_scores.iter().map(|&s| llr_of(s)).collect(),
        nontarget_scores: scores.nontarget_scores.iter().map(|&s| llr_of(s)).collect(),
    })
}

/// Cllr after PAV recalibration, in bits.
pub fn min_cllr(scores: &TrialScoreSet) -> Result<f64> {
    let cal = pav_calibrate(scores)?;
    Ok(cllr_unchecked(&cal.target_scores, &cal.nontarget_scores))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub eer: f64,
    pub cllr_bits: f64,
    pub min_cllr_bits: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

impl EvalReport {
    pub fn eer_pct(&self) -> f64 {
        100.0 * self.eer
    }
}

pub fn evaluate(scores: &TrialScoreSet) -> Result<EvalReport> {
    Ok(EvalReport {
        eer: eer(scores)?,
        cllr_bits: cllr(scores)?,
        min_cllr_bits: min_cllr(scores)?,
        n_target: scores.target_scores.len(),
        n_nontarget: scores.nontarget_scores.len(),
    })
}
