//! Desk-scale simulation of the two linkability attacks.
//!
//! A synthetic cohort is drawn from a Gaussian two-covariance model: speaker
//! identities `N(0, between_var I)`, utterance embeddings add `N(0, within_var I)`.
//! Per-speaker log-F0 means scatter around a per-gender mean; frames scatter
//! around the speaker mean. Users publish anonymized trial utterances; the
//! attacker enrolls with one utterance per user, either original (o-a) or
//! anonymized by the same pipeline under another seed (a-a).
//!
//! Every random draw is seeded from `(domain seed, entity id)` so results do
//! not depend on evaluation order or thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::f0::{aggregate_target_stats, compute_log_f0_stats, transform_contour, F0Contour, LogF0Stats};
use crate::io::{self, ScoreRecord, TrialKeyRecord};
use crate::metrics::{evaluate, EvalReport, TrialScoreSet};
use crate::plda::{Gender, PldaModel, SpeakerEmbedding};
use crate::pseudo::{
    derive_all, fnv1a64, mix64, GenderPolicy, PoolSpeaker, PseudoSpeaker, Scorer,
    SelectionConfig, SpeakerPool,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub n_speakers_per_gender: usize,
    pub utts_per_speaker: usize,
    pub embed_dim: usize,
    pub between_var: f64,
    pub within_var: f64,
    /// Natural-log Hz.
    pub f0_mean_male: f64,
    pub f0_mean_female: f64,
    pub f0_between_std: f64,
    pub f0_within_std: f64,
    pub frames_per_utt: usize,
    /// External pool size per gender.
    pub pool_speakers_per_gender: usize,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_speakers_per_gender: 20,
            utts_per_speaker: 5,
            embed_dim: 32,
            between_var: 1.0,
            within_var: 0.1,
            f0_mean_male: 120f64.ln(),
            f0_mean_female: 210f64.ln(),
            f0_between_std: 0.12,
            f0_within_std: 0.15,
            frames_per_utt: 200,
            pool_speakers_per_gender: 20,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn f0_gender_mean(&self, g: Gender) -> f64 {
        match g {
            Gender::Male => self.f0_mean_male,
            Gender::Female => self.f0_mean_female,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_speakers_per_gender == 0
            || self.embed_dim == 0
            || self.frames_per_utt == 0
            || self.pool_speakers_per_gender == 0
        {
            return bad("speaker counts, embed_dim and frames_per_utt must be positive");
        }
        if self.utts_per_speaker < 2 {
            return bad("utts_per_speaker must be at least 2 (one enrollment, one trial)");
        }
        for (name, v) in [
            ("between_var", self.between_var),
            ("within_var", self.within_var),
            ("f0_between_std", self.f0_between_std),
            ("f0_within_std", self.f0_within_std),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.f0_mean_male.is_finite() && self.f0_mean_female.is_finite()) {
            return bad("f0 gender means must be finite");
        }
        if self.f0_mean_female <= self.f0_mean_male {
            return bad("female log-F0 mean must exceed the male mean");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Utterance {
    pub embedding: SpeakerEmbedding,
    pub contour: F0Contour,
}

impl Utterance {
    pub fn utterance_id(&self) -> &str {
        &self.contour.utterance_id
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub pool: SpeakerPool,
    /// Grouped by speaker, speakers sorted by id, utterances in index order.
    pub users: Vec<Vec<Utterance>>,
    pub plda: PldaModel,
}

impl Cohort {
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.users.iter().flatten()
    }
}

fn entity_rng(domain_seed: u64, tag: &str, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(domain_seed ^ mix64(fnv1a64(tag) ^ mix64(fnv1a64(id)))))
}

fn gaussian_vec(rng: &mut impl Rng, dim: usize, var: f64) -> Vec<f64> {
    let n = Normal::new(0.0, var.sqrt()).expect("positive variance");
    (0..dim).map(|_| n.sample(rng)).collect()
}

/// Draws a contour around `log_mean` with exactly `frames / 10` unvoiced frames.
fn draw_contour(rng: &mut impl Rng, id: &str, frames: usize, log_mean: f64, log_std: f64) -> F0Contour {
    let n = Normal::new(log_mean, log_std).expect("positive std");
    let mut values: Vec<f64> = (0..frames).map(|_| n.sample(rng).exp()).collect();
    let mut idx: Vec<usize> = (0..frames).collect();
    for i in 0..frames / 10 {
        let j = rng.random_range(i..frames);
        idx.swap(i, j);
        values[idx[i]] = 0.0;
    }
    F0Contour {
        utterance_id: id.to_string(),
        values,
        frame_shift_ms: crate::f0::DEFAULT_FRAME_SHIFT_MS,
    }
}

fn speaker_id(prefix: &str, g: Gender, i: usize) -> String {
    format!("{prefix}-{}-{i:03}", g.code().to_lowercase())
}

struct DrawnSpeaker {
    id: String,
    gender: Gender,
    utterances: Vec<Utterance>,
}

fn draw_speaker(spec: &CohortSpec, tag: &str, id: String, gender: Gender) -> DrawnSpeaker {
    let mut rng = entity_rng(spec.seed, tag, &id);
    let identity = gaussian_vec(&mut rng, spec.embed_dim, spec.between_var);
    let log_f0 = Normal::new(spec.f0_gender_mean(gender), spec.f0_between_std)
        .expect("positive std")
        .sample(&mut rng);
    let utterances = (0..spec.utts_per_speaker)
        .map(|u| {
            let utt_id = format!("{id}-u{u:02}");
            let mut rng = entity_rng(spec.seed, tag, &utt_id);
            let noise = gaussian_vec(&mut rng, spec.embed_dim, spec.within_var);
            let vector = identity.iter().zip(noise).map(|(a, b)| a + b).collect();
            let contour = draw_contour(&mut rng, &utt_id, spec.frames_per_utt, log_f0, spec.f0_within_std);
            Utterance {
                embedding: SpeakerEmbedding::new(id.clone(), Some(utt_id), gender, vector),
                contour,
            }
        })
        .collect();
    DrawnSpeaker {
        id,
        gender,
        utterances,
    }
}

fn draw_population(spec: &CohortSpec, tag: &str, per_gender: usize) -> Vec<DrawnSpeaker> {
    let ids: Vec<(String, Gender)> = [Gender::Female, Gender::Male]
        .into_iter()
        .flat_map(|g| (0..per_gender).map(move |i| (speaker_id(tag, g, i), g)))
        .collect();
    ids.into_par_iter()
        .map(|(id, g)| draw_speaker(spec, tag, id, g))
        .collect()
}

/// The generative model's own PLDA: whiten by `within_var`, `psi = between/within`.
pub fn true_plda(spec: &CohortSpec) -> Result<PldaModel> {
    let d = spec.embed_dim;
    let scale = 1.0 / spec.within_var.sqrt();
    let transform = (0..d)
        .map(|i| (0..d).map(|j| if i == j { scale } else { 0.0 }).collect())
        .collect();
    Ok(PldaModel::new(vec![0.0; d], transform, vec![spec.between_var / spec.within_var; d])?
        .with_length_norm(false))
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let plda = true_plda(spec)?;
    let pool_speakers = draw_population(spec, "pool", spec.pool_speakers_per_gender)
        .into_par_iter()
        .map(|s| {
            let vecs = s.utterances.iter().map(|u| u.embedding.vector.as_slice());
            let embedding = crate::plda::mean_vector(vecs).expect("utts_per_speaker >= 2");
            let stats: Vec<LogF0Stats> = s
                .utterances
                .iter()
                .map(|u| compute_log_f0_stats(&u.contour))
                .collect::<Result<_>>()?;
            let f0_stats = aggregate_target_stats(&stats)?;
            Ok(PoolSpeaker {
                speaker_id: s.id,
                gender: s.gender,
                embedding,
                f0_stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = SpeakerPool::new(pool_speakers)?.with_plda(plda.clone())?;
    let mut users: Vec<DrawnSpeaker> = draw_population(spec, "user", spec.n_speakers_per_gender);
    users.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Cohort {
        spec: spec.clone(),
        pool,
        users: users.into_iter().map(|s| s.utterances).collect(),
        plda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackModel {
    OriginalToAnonymized,
    AnonymizedToAnonymized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F0Mode {
    Original,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attacker {
    EmbeddingOnly,
    EmbeddingPlusF0,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name $(| $alias)* => Ok($variant),)+
                    _ => Err(Error::InvalidValue(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), s
                    ))),
                }
            }
        }
    };
}

text_enum!(AttackModel {
    AttackModel::OriginalToAnonymized => "o-a" | "OriginalToAnonymized",
    AttackModel::AnonymizedToAnonymized => "a-a" | "AnonymizedToAnonymized",
});
text_enum!(F0Mode {
    F0Mode::Original => "original" | "Original",
    F0Mode::Modified => "modified" | "Modified",
});
text_enum!(Attacker {
    Attacker::EmbeddingOnly => "embedding" | "EmbeddingOnly",
    Attacker::EmbeddingPlusF0 => "embedding+f0" | "EmbeddingPlusF0",
});

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub attack: AttackModel,
    pub f0_mode: F0Mode,
    pub gender_policy: GenderPolicy,
    pub enroll_seed: u64,
    pub trial_seed: u64,
    pub attacker: Attacker,
    /// Weight of the F0 term for [`Attacker::EmbeddingPlusF0`]; `None` picks
    /// the cohort-derived default from [`default_f0_weight`].
    pub f0_weight: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            attack: AttackModel::AnonymizedToAnonymized,
            f0_mode: F0Mode::Modified,
            gender_policy: GenderPolicy::Same,
            enroll_seed: 1,
            trial_seed: 2,
            attacker: Attacker::EmbeddingPlusF0,
            f0_weight: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attack == AttackModel::AnonymizedToAnonymized && self.enroll_seed == self.trial_seed {
            return Err(Error::InvalidConfig(
                "a-a scenario requires enroll_seed != trial_seed".into(),
            ));
        }
        if let Some(w) = self.f0_weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("f0_weight must be non-negative, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scores: Vec<ScoreRecord>,
    pub key: Vec<TrialKeyRecord>,
    pub trial_set: TrialScoreSet,
    pub report: EvalReport,
    pub f0_weight: f64,
    pub trial_pseudo: BTreeMap<String, PseudoSpeaker>,
    pub enroll_pseudo: Option<BTreeMap<String, PseudoSpeaker>>,
}

/// Attacker's view of one utterance.
#[derive(Debug, Clone)]
struct Observed {
    speaker_id: String,
    utterance_id: String,
    latent: Vec<f64>,
    log_f0_mean: f64,
}

fn observe(plda: &PldaModel, speaker_id: &str, u: &Utterance, vector: &[f64], contour: &F0Contour) -> Result<Observed> {
    Ok(Observed {
        speaker_id: speaker_id.to_string(),
        utterance_id: u.utterance_id().to_string(),
        latent: plda.project_vector(vector)?,
        log_f0_mean: compute_log_f0_stats(contour)?.mean,
    })
}

/// Replaces the utterance's identity with `pseudo` (plus fresh within-speaker
/// noise seeded by `(side_seed, utterance id)`) and optionally renormalizes F0.
fn anonymize(
    cohort: &Cohort,
    u: &Utterance,
    pseudo: &PseudoSpeaker,
    f0_mode: F0Mode,
    side_seed: u64,
) -> Result<(Vec<f64>, F0Contour)> {
    let mut rng = entity_rng(side_seed, "anon", u.utterance_id());
    let noise = gaussian_vec(&mut rng, cohort.spec.embed_dim, cohort.spec.within_var);
    let vector = pseudo.xvector.iter().zip(noise).map(|(a, b)| a + b).collect();
    let contour = match f0_mode {
        F0Mode::Original => u.contour.clone(),
        F0Mode::Modified => {
            let src = compute_log_f0_stats(&u.contour)?;
            transform_contour(&u.contour, &src, &pseudo.f0_stats)?
        }
    };
    Ok((vector, contour))
}

fn enrollment(cohort: &Cohort) -> impl ParallelIterator<Item = &Utterance> {
    cohort.users.par_iter().map(|utts| &utts[0])
}

fn trials(cohort: &Cohort) -> impl ParallelIterator<Item = &Utterance> {
    cohort.users.par_iter().flat_map(|utts| utts[1..].par_iter())
}

fn observe_original<'a>(cohort: &Cohort, it: impl ParallelIterator<Item = &'a Utterance>) -> Result<Vec<Observed>> {
    it.map(|u| observe(&cohort.plda, &u.embedding.speaker_id, u, &u.embedding.vector, &u.contour))
        .collect()
}

fn observe_anonymized<'a>(
    cohort: &Cohort,
    it: impl ParallelIterator<Item = &'a Utterance>,
    map: &BTreeMap<String, PseudoSpeaker>,
    f0_mode: F0Mode,
    side_seed: u64,
) -> Result<Vec<Observed>> {
    it.map(|u| {
        let pseudo = &map[&u.embedding.speaker_id];
        let (vector, contour) = anonymize(cohort, u, pseudo, f0_mode, side_seed)?;
        observe(&cohort.plda, &u.embedding.speaker_id, u, &vector, &contour)
    })
    .collect()
}

fn pseudo_map(cohort: &Cohort, sel: &SelectionConfig, policy: GenderPolicy, seed: u64) -> Result<BTreeMap<String, PseudoSpeaker>> {
    let cfg = SelectionConfig {
        gender_policy: policy,
        global_seed: seed,
        ..*sel
    };
    let utts: Vec<SpeakerEmbedding> = cohort.utterances().map(|u| u.embedding.clone()).collect();
    derive_all(&cohort.pool, &utts, &cfg)
}

fn pairwise(enroll: &[Observed], test: &[Observed], plda: &PldaModel, attacker: Attacker, w: f64) -> Result<Vec<(ScoreRecord, TrialKeyRecord)>> {
    enroll
        .par_iter()
        .flat_map_iter(|e| test.iter().map(move |t| (e, t)))
        .map(|(e, t)| {
            let mut score = plda.score(&e.latent, &t.latent)?;
            if attacker == Attacker::EmbeddingPlusF0 {
                score -= w * (e.log_f0_mean - t.log_f0_mean).abs();
            }
            Ok((
                ScoreRecord {
                    enroll_id: e.speaker_id.clone(),
                    test_id: t.utterance_id.clone(),
                    score,
                },
                TrialKeyRecord {
                    enroll_id: e.speaker_id.clone(),
                    test_id: t.utterance_id.clone(),
                    is_target: e.speaker_id == t.speaker_id,
                },
            ))
        })
        .collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Weight that equalizes the spread of the PLDA term and the F0 term over
/// the unanonymized enrollment x trial pairs of the cohort.
pub fn default_f0_weight(cohort: &Cohort) -> Result<f64> {
    let enroll = observe_original(cohort, enrollment(cohort))?;
    let test = observe_original(cohort, trials(cohort))?;
    let pairs: Vec<(f64, f64)> = enroll
        .par_iter()
        .flat_map_iter(|e| test.iter().map(move |t| (e, t)))
        .map(|(e, t)| {
            Ok((
                cohort.plda.score(&e.latent, &t.latent)?,
                -(e.log_f0_mean - t.log_f0_mean).abs(),
            ))
        })
        .collect::<Result<_>>()?;
    let (plda, f0): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let sf = std_dev(&f0);
    Ok(if sf > 0.0 { std_dev(&plda) / sf } else { 0.0 })
}

fn finish(
    pairs: Vec<(ScoreRecord, TrialKeyRecord)>,
    f0_weight: f64,
    trial_pseudo: BTreeMap<String, PseudoSpeaker>,
    enroll_pseudo: Option<BTreeMap<String, PseudoSpeaker>>,
) -> Result<ScenarioResult> {
    let (scores, key): (Vec<ScoreRecord>, Vec<TrialKeyRecord>) = pairs.into_iter().unzip();
    let mut trial_set = TrialScoreSet::default();
    for (s, k) in scores.iter().zip(&key) {
        if k.is_target {
            trial_set.target_scores.push(s.score);
        } else {
            trial_set.nontarget_scores.push(s.score);
        }
    }
    let report = evaluate(&trial_set)?;
    Ok(ScenarioResult {
        scores,
        key,
        trial_set,
        report,
        f0_weight,
        trial_pseudo,
        enroll_pseudo,
    })
}

fn resolve_weight(cohort: &Cohort, cfg_weight: Option<f64>, attacker: Attacker) -> Result<f64> {
    match (attacker, cfg_weight) {
        (Attacker::EmbeddingOnly, _) => Ok(0.0),
        (_, Some(w)) => Ok(w),
        (_, None) => default_f0_weight(cohort),
    }
}

pub fn run_scenario(cohort: &Cohort, cfg: &ScenarioConfig, sel: &SelectionConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    run_scenario_unchecked(cohort, cfg, sel)
}

/// [`run_scenario`] without the `enroll_seed != trial_seed` check, for
/// probing the degenerate shared-pseudo-speaker case.
pub fn run_scenario_unchecked(cohort: &Cohort, cfg: &ScenarioConfig, sel: &SelectionConfig) -> Result<ScenarioResult> {
    sel.validate()?;
    let w = resolve_weight(cohort, cfg.f0_weight, cfg.attacker)?;
    let trial_pseudo = pseudo_map(cohort, sel, cfg.gender_policy, cfg.trial_seed)?;
    let test = observe_anonymized(cohort, trials(cohort), &trial_pseudo, cfg.f0_mode, cfg.trial_seed)?;
    let (enroll, enroll_pseudo) = match cfg.attack {
        AttackModel::OriginalToAnonymized => (observe_original(cohort, enrollment(cohort))?, None),
        AttackModel::AnonymizedToAnonymized => {
            let map = pseudo_map(cohort, sel, cfg.gender_policy, cfg.enroll_seed)?;
            let obs = observe_anonymized(cohort, enrollment(cohort), &map, cfg.f0_mode, cfg.enroll_seed)?;
            (obs, Some(map))
        }
    };
    let pairs = pairwise(&enroll, &test, &cohort.plda, cfg.attacker, w)?;
    finish(pairs, w, trial_pseudo, enroll_pseudo)
}

/// Plain verification on the original cohort, no anonymization.
pub fn run_baseline(cohort: &Cohort, attacker: Attacker, f0_weight: Option<f64>) -> Result<ScenarioResult> {
    let w = resolve_weight(cohort, f0_weight, attacker)?;
    let enroll = observe_original(cohort, enrollment(cohort))?;
    let test = observe_original(cohort, trials(cohort))?;
    let pairs = pairwise(&enroll, &test, &cohort.plda, attacker, w)?;
    finish(pairs, w, BTreeMap::new(), None)
}

/// Everything a `simulate` run is configured by.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cohort: CohortSpec,
    pub scenario: ScenarioConfig,
    pub selection: SelectionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cohort: CohortSpec::default(),
            scenario: ScenarioConfig::default(),
            selection: SelectionConfig {
                k_far: 8,
                k_sel: 4,
                gender_policy: GenderPolicy::Same,
                scorer: Scorer::Plda,
                global_seed: 0,
            },
        }
    }
}

pub const SIM_KEYS: &[&str] = &[
    "n_speakers_per_gender",
    "utts_per_speaker",
    "embed_dim",
    "between_var",
    "within_var",
    "f0_gender_means",
    "f0_between_std",
    "f0_within_std",
    "frames_per_utt",
    "pool_speakers_per_gender",
    "seed",
    "attack",
    "f0_mode",
    "gender_policy",
    "enroll_seed",
    "trial_seed",
    "attacker",
    "f0_weight",
    "k_far",
    "k_sel",
    "scorer",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}'")))
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if !v.is_finite() {
        return Err(Error::InvalidConfig(format!("{key}: '{value}' is not finite")));
    }
    Ok(v)
}

impl SimConfig {
    /// Sets one field by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.cohort;
        let s = &mut self.scenario;
        match key {
            "n_speakers_per_gender" => c.n_speakers_per_gender = num(key, value)?,
            "utts_per_speaker" => c.utts_per_speaker = num(key, value)?,
            "embed_dim" => c.embed_dim = num(key, value)?,
            "between_var" => c.between_var = real(key, value)?,
            "within_var" => c.within_var = real(key, value)?,
            "f0_gender_means" => {
                let toks: Vec<&str> = value.split_whitespace().collect();
                let mut male = None;
                let mut female = None;
                if toks.len() != 4 {
                    return Err(Error::InvalidConfig(format!(
                        "f0_gender_means: expected 'M <real> F <real>', got '{value}'"
                    )));
                }
                for pair in toks.chunks(2) {
                    let v = real(key, pair[1])?;
                    match pair[0].parse::<Gender>()? {
                        Gender::Male => male = Some(v),
                        Gender::Female => female = Some(v),
                    }
                }
                match (male, female) {
                    (Some(m), Some(f)) => {
                        c.f0_mean_male = m;
                        c.f0_mean_female = f;
                    }
                    _ => return Err(Error::InvalidConfig("f0_gender_means needs both M and F".into())),
                }
            }
            "f0_between_std" => c.f0_between_std = real(key, value)?,
            "f0_within_std" => c.f0_within_std = real(key, value)?,
            "frames_per_utt" => c.frames_per_utt = num(key, value)?,
            "pool_speakers_per_gender" => c.pool_speakers_per_gender = num(key, value)?,
            "seed" => c.seed = num(key, value)?,
            "attack" => s.attack = value.parse()?,
            "f0_mode" => s.f0_mode = value.parse()?,
            "gender_policy" => s.gender_policy = value.parse()?,
            "enroll_seed" => s.enroll_seed = num(key, value)?,
            "trial_seed" => s.trial_seed = num(key, value)?,
            "attacker" => s.attacker = value.parse()?,
            "f0_weight" => {
                s.f0_weight = if value == "auto" { None } else { Some(real(key, value)?) }
            }
            "k_far" => self.selection.k_far = num(key, value)?,
            "k_sel" => self.selection.k_sel = num(key, value)?,
            "scorer" => self.selection.scorer = value.parse()?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort.validate()?;
        self.scenario.validate()?;
        self.selection.validate()?;
        let need = self.selection.k_far;
        if self.cohort.pool_speakers_per_gender < need {
            return Err(Error::InvalidConfig(format!(
                "pool_speakers_per_gender ({}) is smaller than k_far ({need})",
                self.cohort.pool_speakers_per_gender
            )));
        }
        Ok(())
    }

    /// Effective selection config: the scenario's gender policy wins.
    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            gender_policy: self.scenario.gender_policy,
            ..self.selection
        }
    }
}

pub fn parse_sim_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    for (key, value) in io::parse_key_values(text)? {
        cfg.set(key.text, &value).map_err(|e| {
            Error::Parse(crate::error::ParseError::new(
                crate::error::ParseErrorKind::InvalidValue,
                key.line,
                key.column,
                e.to_string(),
            ))
        })?;
    }
    Ok(cfg)
}

pub fn serialize_sim_config(cfg: &SimConfig) -> String {
    let c = &cfg.cohort;
    let s = &cfg.scenario;
    let f = io::fmt_real;
    let weight = s.f0_weight.map(f).unwrap_or_else(|| "auto".to_string());
    let mut pairs: Vec<(&str, String)> = vec![
        ("n_speakers_per_gender", c.n_speakers_per_gender.to_string()),
        ("utts_per_speaker", c.utts_per_speaker.to_string()),
        ("embed_dim", c.embed_dim.to_string()),
        ("between_var", f(c.between_var)),
        ("within_var", f(c.within_var)),
        ("f0_gender_means", format!("M {} F {}", f(c.f0_mean_male), f(c.f0_mean_female))),
        ("f0_between_std", f(c.f0_between_std)),
        ("f0_within_std", f(c.f0_within_std)),
        ("frames_per_utt", c.frames_per_utt.to_string()),
        ("pool_speakers_per_gender", c.pool_speakers_per_gender.to_string()),
        ("seed", c.seed.to_string()),
        ("attack", s.attack.to_string()),
        ("f0_mode", s.f0_mode.to_string()),
        ("gender_policy", s.gender_policy.to_string()),
        ("enroll_seed", s.enroll_seed.to_string()),
        ("trial_seed", s.trial_seed.to_string()),
        ("attacker", s.attacker.to_string()),
        ("f0_weight", weight),
        ("k_far", cfg.selection.k_far.to_string()),
        ("k_sel", cfg.selection.k_sel.to_string()),
        ("scorer", cfg.selection.scorer.to_string()),
    ];
    pairs.sort_by(|a, b| a.0.cmp(b.0));
    pairs.into_iter().map(|(k, v)| format!("{k} {v}\n")).collect()
}
