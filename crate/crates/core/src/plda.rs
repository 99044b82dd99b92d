//! Two-covariance PLDA in simultaneously diagonalized form, plus cosine scoring.
//!
//! After `transform * (x - mean)` the within-speaker covariance is the
//! identity and the between-speaker covariance is `diag(psi)`, so the
//! same/different-speaker log-likelihood ratio factorizes per dimension.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn opposite(self) -> Self {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Gender::Male),
            "F" => Ok(Gender::Female),
            _ => Err(Error::InvalidValue(format!("gender must be M or F, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding {
    pub speaker_id: String,
    pub utterance_id: Option<String>,
    pub gender: Gender,
    pub vector: Vec<f64>,
}

impl SpeakerEmbedding {
    pub fn new(
        speaker_id: impl Into<String>,
        utterance_id: Option<String>,
        gender: Gender,
        vector: Vec<f64>,
    ) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            utterance_id,
            gender,
            vector,
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    dim: usize,
    mean: Vec<f64>,
    /// Row-major `dim x dim`.
    transform: Vec<f64>,
    psi: Vec<f64>,
    length_normalize: bool,
}

impl PldaModel {
    /// `transform` is given as `dim` rows of `dim` values. Length
    /// normalization is on by default, see [`PldaModel::with_length_norm`].
    pub fn new(mean: Vec<f64>, transform: Vec<Vec<f64>>, psi: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::InvalidValue("PLDA dimension must be positive".into()));
        }
        if psi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.len(),
            });
        }
        if transform.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: transform.len(),
            });
        }
        let mut flat = Vec::with_capacity(dim * dim);
        for row in &transform {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        if mean.iter().chain(&flat).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("PLDA mean/transform must be finite".into()));
        }
        if psi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidValue("PLDA psi must be finite and non-negative".into()));
        }
        Ok(Self {
            dim,
            mean,
            transform: flat,
            psi,
            length_normalize: true,
        })
    }

    /// Zero mean, identity transform.
    pub fn diagonal(psi: Vec<f64>) -> Result<Self> {
        let dim = psi.len();
        let transform = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; dim], transform, psi)
    }

    pub fn with_length_norm(mut self, on: bool) -> Self {
        self.length_normalize = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn length_normalize(&self) -> bool {
        self.length_normalize
    }

    pub fn transform_row(&self, i: usize) -> &[f64] {
        &self.transform[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transform_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.transform.chunks(self.dim)
    }

    pub fn project(&self, e: &SpeakerEmbedding) -> Result<Vec<f64>> {
        self.project_vector(&e.vector)
    }

    pub fn project_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let normalized;
        let x = if self.length_normalize {
            normalized = length_normalize(v)?;
            &normalized[..]
        } else {
            v
        };
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .transform_rows()
            .map(|row| row.iter().zip(&centered).map(|(r, c)| r * c).sum())
            .collect())
    }

    /// Natural-log LLR of `test` under "same speaker as `enroll`" versus
    /// "different speaker", both given as latent (projected) vectors.
    pub fn score(&self, enroll: &[f64], test: &[f64]) -> Result<f64> {
        self.check_dim(enroll.len())?;
        self.check_dim(test.len())?;
        Ok(self
            .psi
            .iter()
            .zip(enroll.iter().zip(test))
            .map(|(&psi, (&u, &v))| {
                let shrink = psi / (psi + 1.0);
                let same = log_normal(v, shrink * u, 1.0 + shrink);
                let diff = log_normal(v, 0.0, 1.0 + psi);
                same - diff
            })
            .sum())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

pub fn plda_score(model: &PldaModel, enroll: &[f64], test: &[f64]) -> Result<f64> {
    model.score(enroll, test)
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Rescales `v` to Euclidean norm `sqrt(len)`.
pub fn length_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = l2(v);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let scale = (v.len() as f64).sqrt() / norm;
    Ok(v.iter().map(|x| x * scale).collect())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine_score(a: &SpeakerEmbedding, b: &SpeakerEmbedding) -> Result<f64> {
    cosine(&a.vector, &b.vector)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (l2(a), l2(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Componentwise mean of equal-length vectors.
pub fn mean_vector<'a, I>(vectors: I) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = vectors.into_iter();
    let mut acc = iter.next()?.to_vec();
    let mut n = 1usize;
    for v in iter {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        n += 1;
    }
    let n = n as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(acc)
}
