//! Pseudo-speaker derivation: gender filter, furthest-K ranking, seeded
//! K-of-N draw, then x-vector and F0-statistics averaging over the draw.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::f0::{aggregate_target_stats, LogF0Stats};
use crate::plda::{cosine, mean_vector, Gender, PldaModel, SpeakerEmbedding};

pub const DEFAULT_K_FAR: usize = 200;
pub const DEFAULT_K_SEL: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpeaker {
    pub speaker_id: String,
    pub gender: Gender,
    pub embedding: Vec<f64>,
    pub f0_stats: LogF0Stats,
}

/// External speakers the pseudo-speakers are built from. Immutable once built;
/// attaching a PLDA model caches every speaker's latent projection.
#[derive(Debug, Clone)]
pub struct SpeakerPool {
    speakers: Vec<PoolSpeaker>,
    plda: Option<PldaModel>,
    latents: Vec<Vec<f64>>,
}

impl SpeakerPool {
    pub fn new(speakers: Vec<PoolSpeaker>) -> Result<Self> {
        let mut seen = HashSet::new();
        let dim = speakers.first().map(|s| s.embedding.len());
        for s in &speakers {
            if !seen.insert(s.speaker_id.as_str()) {
                return Err(Error::InvalidValue(format!(
                    "duplicate pool speaker '{}'",
                    s.speaker_id
                )));
            }
            if Some(s.embedding.len()) != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    found: s.embedding.len(),
                });
            }
            if s.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "pool speaker '{}' has a non-finite embedding",
                    s.speaker_id
                )));
            }
            s.f0_stats.validate()?;
            if s.f0_stats.voiced_frame_count == 0 {
                return Err(Error::InvalidValue(format!(
                    "pool speaker '{}' has no voiced frames",
                    s.speaker_id
                )));
            }
        }
        if dim == Some(0) {
            return Err(Error::InvalidValue("pool embeddings must be non-empty".into()));
        }
        Ok(Self {
            speakers,
            plda: None,
            latents: Vec::new(),
        })
    }

    pub fn with_plda(mut self, model: PldaModel) -> Result<Self> {
        self.latents = self
            .speakers
            .par_iter()
            .map(|s| model.project_vector(&s.embedding))
            .collect::<Result<_>>()?;
        self.plda = Some(model);
        Ok(self)
    }

    pub fn speakers(&self) -> &[PoolSpeaker] {
        &self.speakers
    }

    pub fn plda(&self) -> Option<&PldaModel> {
        self.plda.as_ref()
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.speakers.first().map(|s| s.embedding.len())
    }

    pub fn get(&self, speaker_id: &str) -> Option<&PoolSpeaker> {
        self.speakers.iter().find(|s| s.speaker_id == speaker_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenderPolicy {
    Same,
    Opposite,
}

impl GenderPolicy {
    pub fn target(self, source: Gender) -> Gender {
        match self {
            GenderPolicy::Same => source,
            GenderPolicy::Opposite => source.opposite(),
        }
    }
}

impl fmt::Display for GenderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenderPolicy::Same => "same",
            GenderPolicy::Opposite => "opposite",
        })
    }
}

impl FromStr for GenderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same" | "Same" => Ok(GenderPolicy::Same),
            "opposite" | "Opposite" => Ok(GenderPolicy::Opposite),
            _ => Err(Error::InvalidValue(format!("gender policy must be same|opposite, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scorer {
    Plda,
    Cosine,
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scorer::Plda => "plda",
            Scorer::Cosine => "cosine",
        })
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plda" | "Plda" => Ok(Scorer::Plda),
            "cosine" | "Cosine" => Ok(Scorer::Cosine),
            _ => Err(Error::InvalidValue(format!("scorer must be plda|cosine, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionConfig {
    pub k_far: usize,
    pub k_sel: usize,
    pub gender_policy: GenderPolicy,
    pub scorer: Scorer,
    pub global_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_far: DEFAULT_K_FAR,
            k_sel: DEFAULT_K_SEL,
            gender_policy: GenderPolicy::Same,
            scorer: Scorer::Plda,
            global_seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_far == 0 || self.k_sel == 0 {
            return Err(Error::InvalidConfig("k_far and k_sel must be positive".into()));
        }
        if self.k_sel > self.k_far {
            return Err(Error::InvalidConfig(format!(
                "k_sel ({}) must not exceed k_far ({})",
                self.k_sel, self.k_far
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpeaker {
    pub source_speaker_id: String,
    /// Gender of the pool speakers the pseudo identity was drawn from.
    pub gender: Gender,
    pub xvector: Vec<f64>,
    pub f0_stats: LogF0Stats,
    /// Ordered by furthest-rank position.
    pub member_ids: Vec<String>,
    pub seed_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCandidate<'a> {
    pub speaker: &'a PoolSpeaker,
    pub score: f64,
    index: usize,
}

pub fn filter_by_gender(
    pool: &SpeakerPool,
    source_gender: Gender,
    policy: GenderPolicy,
) -> Result<Vec<usize>> {
    let wanted = policy.target(source_gender);
    let idx: Vec<usize> = pool
        .speakers
        .iter()
        .enumerate()
        .filter(|(_, s)| s.gender == wanted)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(idx)
}

/// The `k_far` candidates in `subset` least similar to `source`, ascending
/// by score with ties broken by ascending speaker id.
pub fn rank_furthest<'a>(
    pool: &'a SpeakerPool,
    subset: &[usize],
    source: &SpeakerEmbedding,
    cfg: &SelectionConfig,
) -> Result<Vec<RankedCandidate<'a>>> {
    cfg.validate()?;
    if subset.len() < cfg.k_far {
        return Err(Error::PoolTooSmall {
            speaker: source.speaker_id.clone(),
            needed: cfg.k_far,
            available: subset.len(),
        });
    }
    let scores: Vec<f64> = match cfg.scorer {
        Scorer::Plda => {
            let model = pool.plda.as_ref().ok_or(Error::MissingPldaModel)?;
            let latent = model.project(source)?;
            subset
                .par_iter()
                .map(|&i| model.score(&latent, &pool.latents[i]))
                .collect::<Result<_>>()?
        }
        Scorer::Cosine => subset
            .par_iter()
            .map(|&i| cosine(&source.vector, &pool.speakers[i].embedding))
            .collect::<Result<_>>()?,
    };
    let mut ranked: Vec<RankedCandidate<'a>> = subset
        .iter()
        .zip(scores)
        .map(|(&i, score)| RankedCandidate {
            speaker: &pool.speakers[i],
            score,
            index: i,
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.speaker.speaker_id.cmp(&b.speaker.speaker_id))
    });
    ranked.truncate(cfg.k_far);
    Ok(ranked)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-speaker stream seed: `mix64(global_seed ^ mix64(fnv1a64(speaker_id)))`.
///
/// Both mixing steps are bijections, so for a fixed id distinct global seeds
/// always give distinct streams, and under one global seed two ids collide
/// only if their FNV-1a hashes do.
pub fn seed_for_speaker(global_seed: u64, speaker_id: &str) -> u64 {
    mix64(global_seed ^ mix64(fnv1a64(speaker_id)))
}

/// Uniform `k`-of-`n` draw without replacement (partial Fisher-Yates over a
/// ChaCha8 stream), returned in ascending index order.
pub fn sample_indices(seed: u64, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn derive_pseudo_speaker(
    pool: &SpeakerPool,
    source: &SpeakerEmbedding,
    cfg: &SelectionConfig,
) -> Result<PseudoSpeaker> {
    cfg.validate()?;
    if let Some(dim) = pool.dim() {
        if dim != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: source.dim(),
            });
        }
    }
    let subset = filter_by_gender(pool, source.gender, cfg.gender_policy)?;
    let ranked = rank_furthest(pool, &subset, source, cfg)?;
    let seed = seed_for_speaker(cfg.global_seed, &source.speaker_id);
    let members: Vec<&PoolSpeaker> = sample_indices(seed, ranked.len(), cfg.k_sel)
        .into_iter()
        .map(|i| &pool.speakers[ranked[i].index])
        .collect();

    let xvector = mean_vector(members.iter().map(|s| s.embedding.as_slice()))
        .ok_or(Error::EmptySpeakerSet)?;
    let stats: Vec<LogF0Stats> = members.iter().map(|s| s.f0_stats).collect();
    Ok(PseudoSpeaker {
        source_speaker_id: source.speaker_id.clone(),
        gender: cfg.gender_policy.target(source.gender),
        xvector,
        f0_stats: aggregate_target_stats(&stats)?,
        member_ids: members.iter().map(|s| s.speaker_id.clone()).collect(),
        seed_used: seed,
    })
}

/// Averages each speaker's utterance embeddings into one source x-vector.
/// Fails if a speaker is labelled with two genders or dimensions disagree.
pub fn speaker_means(utterances: &[SpeakerEmbedding]) -> Result<Vec<SpeakerEmbedding>> {
    let mut grouped: BTreeMap<&str, (Gender, Vec<&[f64]>)> = BTreeMap::new();
    let dim = utterances.first().map(|e| e.dim());
    for e in utterances {
        if Some(e.dim()) != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.unwrap_or(0),
                found: e.dim(),
            });
        }
        let entry = grouped
            .entry(e.speaker_id.as_str())
            .or_insert_with(|| (e.gender, Vec::new()));
        if entry.0 != e.gender {
            return Err(Error::InvalidValue(format!(
                "speaker '{}' carries both genders",
                e.speaker_id
            )));
        }
        entry.1.push(&e.vector);
    }
    Ok(grouped
        .into_iter()
        .map(|(id, (gender, vecs))| {
            let mean = mean_vector(vecs.iter().copied()).expect("non-empty group");
            SpeakerEmbedding::new(id, None, gender, mean)
        })
        .collect())
}

/// One pseudo-speaker per distinct source speaker (one-to-one mapping),
/// keyed by speaker id. Order of evaluation does not affect the result.
pub fn derive_all(
    pool: &SpeakerPool,
    utterances: &[SpeakerEmbedding],
    cfg: &SelectionConfig,
) -> Result<BTreeMap<String, PseudoSpeaker>> {
    let sources = speaker_means(utterances)?;
    let derived: Vec<PseudoSpeaker> = sources
        .par_iter()
        .map(|s| derive_pseudo_speaker(pool, s, cfg))
        .collect::<Result<_>>()?;
    Ok(derived
        .into_iter()
        .map(|p| (p.source_speaker_id.clone(), p))
        .collect())
}
