//! Command-line front end. Every subcommand parses its inputs, calls the
//! library, and writes canonical text files; nothing is written until all
//! outputs have been computed.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::f0::{compute_log_f0_stats, transform_contour, F0Contour};
use crate::io::{self, Manifest, MappingRecord, NamedStats, Report, ScoreRecord};
use crate::metrics::{det_points, evaluate, TrialScoreSet};
use crate::plda::{cosine, mean_vector, PldaModel, SpeakerEmbedding};
use crate::pseudo::{derive_all, GenderPolicy, PseudoSpeaker, Scorer, SelectionConfig, SpeakerPool};
use crate::sim::{generate_cohort, run_scenario, serialize_sim_config, AttackModel, F0Mode, SimConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "pseudovox", version, about = "x-vector pseudonymization: pseudo-speaker selection, F0 renormalization, linkability evaluation")]
pub struct Cli {
    /// Global seed (anonymize: global_seed; simulate: cohort seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key value` config file; explicit flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write DET curve points (`eval`, `simulate`).
    #[arg(long = "det-out", global = true)]
    pub det_out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Per-utterance log-F0 statistics over voiced frames.
    Stats {
        /// F0 contours, one utterance per line.
        contours: PathBuf,
        /// Output: `<utterance> <mean> <std> <voiced_count>`.
        out: PathBuf,
    },
    /// Replace each source speaker with a pseudo-speaker and optionally renormalize F0.
    Anonymize(AnonymizeArgs),
    /// Score a trial list with PLDA (or cosine).
    Score(ScoreArgs),
    /// EER, Cllr and min-Cllr for a score file against a trial key.
    Eval(EvalArgs),
    /// Synthetic cohort plus one attack scenario, end to end.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AnonymizeArgs {
    /// External pool: `<id> <M|F> <x-vector> | <f0_mean> <f0_std> <voiced_count>`.
    #[arg(long)]
    pub pool: PathBuf,
    /// Source x-vectors: `<speaker> <utterance> <M|F> <x-vector>`.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Source F0 contours: `<utterance> <Hz>...`, 0 for unvoiced frames.
    #[arg(long)]
    pub contours: PathBuf,
    /// PLDA model used to rank pool speakers.
    #[arg(long)]
    pub plda: Option<PathBuf>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// `modified` (renormalize to the pseudo-speaker) or `original` [default: modified].
    #[arg(long = "f0", alias = "f0-mode")]
    pub f0_mode: Option<F0Mode>,
    /// `same` or `opposite` [default: same].
    #[arg(long = "gender", alias = "gender-policy")]
    pub gender_policy: Option<GenderPolicy>,
    /// Candidates kept after ranking by score [default: 200].
    #[arg(long = "k-far")]
    pub k_far: Option<usize>,
    /// Candidates averaged into the pseudo-speaker [default: 100].
    #[arg(long = "k-sel")]
    pub k_sel: Option<usize>,
    /// `plda` or `cosine` [default: plda with --plda, cosine without].
    #[arg(long)]
    pub scorer: Option<Scorer>,
    /// Skip length normalization before PLDA projection.
    #[arg(long = "no-length-norm")]
    pub no_length_norm: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub plda: Option<PathBuf>,
    /// Enrollment x-vectors, averaged per speaker.
    #[arg(long)]
    pub enroll: PathBuf,
    /// Test x-vectors, one per utterance.
    #[arg(long)]
    pub trials: PathBuf,
    /// Trial list: `<enroll_speaker> <test_utterance> <target|nontarget>`.
    #[arg(long)]
    pub key: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "plda")]
    pub scorer: Scorer,
    /// Skip length normalization before PLDA projection.
    #[arg(long = "no-length-norm")]
    pub no_length_norm: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Scores: `<enroll_speaker> <test_utterance> <score>`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Trial list: `<enroll_speaker> <test_utterance> <target|nontarget>`.
    #[arg(long)]
    pub key: PathBuf,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! sim_flags {
    ($($field:ident),+ $(,)?) => {
        /// One flag per simulation config key (the cohort seed is `--seed`).
        #[derive(Debug, Clone, Default, Args)]
        pub struct SimFlags {
            $(
                #[arg(long, value_name = "VALUE")]
                pub $field: Option<String>,
            )+
        }

        impl SimFlags {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),+];

            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field), v.as_str()));
                    }
                )+
                out
            }
        }
    };
}

sim_flags!(
    n_speakers_per_gender,
    utts_per_speaker,
    embed_dim,
    between_var,
    within_var,
    f0_gender_means,
    f0_between_std,
    f0_within_std,
    frames_per_utt,
    pool_speakers_per_gender,
    attack,
    f0_mode,
    gender_policy,
    enroll_seed,
    trial_seed,
    attacker,
    f0_weight,
    k_far,
    k_sel,
    scorer,
);

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario config (same as `--config`).
    pub scenario: Option<PathBuf>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub flags: SimFlags,
}

/// Text written by a subcommand: named files plus standard output.
#[derive(Debug, Default)]
struct Output {
    files: Vec<(PathBuf, String)>,
    stdout: String,
    warnings: Vec<String>,
}

fn in_file(path: &Path, e: Error) -> Error {
    Error::InFile {
        path: path.display().to_string(),
        source: Box::new(e),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load<T, E: Into<Error>>(path: &Path, parse: impl FnOnce(&str) -> std::result::Result<T, E>) -> Result<T> {
    let text = read(path)?;
    parse(&text).map_err(|e| in_file(path, e.into()))
}

fn load_with_text<T, E: Into<Error>>(
    path: &Path,
    parse: impl FnOnce(&str) -> std::result::Result<T, E>,
) -> Result<(T, String)> {
    let text = read(path)?;
    let value = parse(&text).map_err(|e| in_file(path, e.into()))?;
    Ok((value, text))
}

/// Writes every file through a temporary name and renames at the end; on
/// failure nothing new is left behind.
fn commit(files: &[(PathBuf, String)]) -> Result<()> {
    let io_err = |path: &Path, source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp_of = |p: &Path| {
        let mut name = p.file_name().map(OsString::from).unwrap_or_default();
        name.push(".partial");
        p.with_file_name(name)
    };
    let mut staged = Vec::new();
    let mut result = Ok(());
    for (path, text) in files {
        let tmp = tmp_of(path);
        if let Err(e) = fs::write(&tmp, text) {
            let _ = fs::remove_file(&tmp);
            result = Err(io_err(&tmp, e));
            break;
        }
        staged.push((tmp, path));
    }
    if result.is_ok() {
        let mut renamed = Vec::new();
        for (tmp, path) in &staged {
            if let Err(e) = fs::rename(tmp, path) {
                result = Err(io_err(path, e));
                for p in &renamed {
                    let _ = fs::remove_file(p);
                }
                break;
            }
            renamed.push(*path);
        }
    }
    for (tmp, _) in &staged {
        let _ = fs::remove_file(tmp);
    }
    result
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

// ---- stats ----

/// Per-utterance statistics; all-unvoiced utterances are skipped and reported.
pub fn stats_of(contours: &[F0Contour]) -> Result<(Vec<NamedStats>, Vec<String>)> {
    let results: Vec<Result<Option<NamedStats>>> = contours
        .par_iter()
        .map(|c| match compute_log_f0_stats(c) {
            Ok(stats) => Ok(Some(NamedStats {
                id: c.utterance_id.clone(),
                stats,
            })),
            Err(Error::NoVoicedFrames(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut stats = Vec::new();
    let mut skipped = Vec::new();
    for (c, r) in contours.iter().zip(results) {
        match r? {
            Some(s) => stats.push(s),
            None => skipped.push(c.utterance_id.clone()),
        }
    }
    Ok((stats, skipped))
}

fn cmd_stats(contours: &Path, out: &Path) -> Result<Output> {
    let parsed = load(contours, io::parse_contours)?;
    let (stats, skipped) = stats_of(&parsed)?;
    Ok(Output {
        files: vec![(out.to_path_buf(), io::serialize_stats(&stats))],
        warnings: skipped
            .into_iter()
            .map(|id| format!("utterance '{id}' has no voiced frames; skipped"))
            .collect(),
        ..Output::default()
    })
}

// ---- anonymize ----

/// Settings for a batch anonymization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnonymizeConfig {
    pub selection: SelectionConfig,
    pub f0_mode: F0Mode,
    pub length_norm: bool,
}

impl Default for AnonymizeConfig {
    fn default() -> Self {
        Self {
            selection: SelectionConfig::default(),
            f0_mode: F0Mode::Modified,
            length_norm: true,
        }
    }
}

pub const ANONYMIZE_KEYS: &[&str] = &["k_far", "k_sel", "gender_policy", "scorer", "global_seed", "f0_mode", "length_norm"];

impl AnonymizeConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig(format!("{key}: cannot parse '{value}' as {what}"));
        let s = &mut self.selection;
        match key {
            "k_far" => s.k_far = value.parse().map_err(|_| bad("an integer"))?,
            "k_sel" => s.k_sel = value.parse().map_err(|_| bad("an integer"))?,
            "gender_policy" => s.gender_policy = value.parse()?,
            "scorer" => s.scorer = value.parse()?,
            "global_seed" => s.global_seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "f0_mode" => self.f0_mode = value.parse()?,
            "length_norm" => self.length_norm = value.parse().map_err(|_| bad("true|false"))?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }
}

pub fn parse_anonymize_config(text: &str) -> Result<(AnonymizeConfig, Vec<&'static str>)> {
    let mut cfg = AnonymizeConfig::default();
    let mut set_keys = Vec::new();
    for (key, value) in io::parse_key_values(text)? {
        cfg.set(key.text, &value).map_err(|e| {
            Error::Parse(crate::error::ParseError::new(
                crate::error::ParseErrorKind::InvalidValue,
                key.line,
                key.column,
                e.to_string(),
            ))
        })?;
        if let Some(k) = ANONYMIZE_KEYS.iter().find(|k| **k == key.text) {
            set_keys.push(*k);
        }
    }
    Ok((cfg, set_keys))
}

/// Everything `anonymize` writes, minus the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizedBatch {
    pub pseudo: BTreeMap<String, PseudoSpeaker>,
    pub contours: Vec<F0Contour>,
    /// Utterances passed through untouched because they have no voiced frames.
    pub unvoiced: Vec<String>,
}

impl AnonymizedBatch {
    pub fn mapping_text(&self) -> String {
        let recs: Vec<MappingRecord> = self.pseudo.values().map(MappingRecord::from).collect();
        io::serialize_mapping(&recs)
    }

    pub fn xvectors_text(&self) -> String {
        let embs: Vec<SpeakerEmbedding> = self
            .pseudo
            .values()
            .map(|p| SpeakerEmbedding::new(p.source_speaker_id.clone(), None, p.gender, p.xvector.clone()))
            .collect();
        io::serialize_embeddings(&embs)
    }

    pub fn stats_text(&self) -> String {
        let stats: Vec<NamedStats> = self
            .pseudo
            .values()
            .map(|p| NamedStats {
                id: p.source_speaker_id.clone(),
                stats: p.f0_stats,
            })
            .collect();
        io::serialize_stats(&stats)
    }

    pub fn contours_text(&self) -> String {
        io::serialize_contours(&self.contours)
    }
}

/// Derives one pseudo-speaker per source speaker and renormalizes each
/// contour towards its speaker's pseudo F0 statistics (`F0Mode::Modified`).
pub fn anonymize_batch(
    pool: &SpeakerPool,
    embeddings: &[SpeakerEmbedding],
    contours: &[F0Contour],
    selection: &SelectionConfig,
    f0_mode: F0Mode,
) -> Result<AnonymizedBatch> {
    let pseudo = derive_all(pool, embeddings, selection)?;
    let owner: HashMap<&str, &str> = embeddings
        .iter()
        .filter_map(|e| e.utterance_id.as_deref().map(|u| (u, e.speaker_id.as_str())))
        .collect();
    let results: Vec<Result<(F0Contour, bool)>> = contours
        .par_iter()
        .map(|c| {
            let speaker = owner
                .get(c.utterance_id.as_str())
                .ok_or_else(|| Error::UnknownId(c.utterance_id.clone()))?;
            if f0_mode == F0Mode::Original {
                return Ok((c.clone(), false));
            }
            let target = &pseudo[*speaker].f0_stats;
            match compute_log_f0_stats(c) {
                Ok(src) => Ok((transform_contour(c, &src, target)?, false)),
                Err(Error::NoVoicedFrames(_)) => Ok((c.clone(), true)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(contours.len());
    let mut unvoiced = Vec::new();
    for r in results {
        let (c, skipped) = r?;
        if skipped {
            unvoiced.push(c.utterance_id.clone());
        }
        out.push(c);
    }
    Ok(AnonymizedBatch {
        pseudo,
        contours: out,
        unvoiced,
    })
}

fn resolve_anonymize_config(global: &Cli, a: &AnonymizeArgs) -> Result<AnonymizeConfig> {
    let (mut cfg, file_keys) = match &global.config {
        Some(p) => load(p, parse_anonymize_config)?,
        None => (AnonymizeConfig::default(), Vec::new()),
    };
    let s = &mut cfg.selection;
    if let Some(v) = global.seed {
        s.global_seed = v;
    }
    if let Some(v) = a.k_far {
        s.k_far = v;
    }
    if let Some(v) = a.k_sel {
        s.k_sel = v;
    }
    if let Some(v) = a.gender_policy {
        s.gender_policy = v;
    }
    if let Some(v) = a.scorer {
        s.scorer = v;
    } else if a.plda.is_none() && !file_keys.contains(&"scorer") {
        s.scorer = Scorer::Cosine;
    }
    if let Some(v) = a.f0_mode {
        cfg.f0_mode = v;
    }
    if a.no_length_norm {
        cfg.length_norm = false;
    }
    cfg.selection.validate()?;
    Ok(cfg)
}

fn cmd_anonymize(global: &Cli, a: &AnonymizeArgs) -> Result<Output> {
    let cfg = resolve_anonymize_config(global, a)?;
    let (pool_speakers, pool_text) = load_with_text(&a.pool, io::parse_pool)?;
    let (embeddings, emb_text) = load_with_text(&a.embeddings, io::parse_embeddings)?;
    let (contours, contour_text) = load_with_text(&a.contours, io::parse_contours)?;
    let mut pool = SpeakerPool::new(pool_speakers).map_err(|e| in_file(&a.pool, e))?;
    let mut plda_text = None;
    if let Some(p) = &a.plda {
        let (model, text) = load_with_text(p, io::parse_plda)?;
        pool = pool.with_plda(model.with_length_norm(cfg.length_norm))?;
        plda_text = Some(text);
    }
    ensure_dir(&a.out_dir)?;

    let batch = anonymize_batch(&pool, &embeddings, &contours, &cfg.selection, cfg.f0_mode)?;
    let files = [
        ("mapping.txt", batch.mapping_text()),
        ("pseudo_xvectors.txt", batch.xvectors_text()),
        ("pseudo_stats.txt", batch.stats_text()),
        ("contours.txt", batch.contours_text()),
    ];
    let mut m = Manifest::for_payload(&files[0].1, batch.pseudo.len() as u64);
    m.insert("version", VERSION);
    m.insert("command", "anonymize");
    m.insert("global_seed", cfg.selection.global_seed);
    m.insert("k_far", cfg.selection.k_far);
    m.insert("k_sel", cfg.selection.k_sel);
    m.insert("gender_policy", cfg.selection.gender_policy);
    m.insert("scorer", cfg.selection.scorer);
    m.insert("f0_mode", cfg.f0_mode);
    m.insert("length_norm", cfg.length_norm);
    m.insert("input.pool", io::checksum(&pool_text));
    m.insert("input.embeddings", io::checksum(&emb_text));
    m.insert("input.contours", io::checksum(&contour_text));
    if let Some(t) = &plda_text {
        m.insert("input.plda", io::checksum(t));
    }
    for (name, text) in &files {
        m.insert(format!("output.{name}"), io::checksum(text));
    }
    let mut out = Output {
        warnings: batch
            .unvoiced
            .iter()
            .map(|id| format!("utterance '{id}' has no voiced frames; F0 copied unchanged"))
            .collect(),
        ..Output::default()
    };
    for (name, text) in files {
        out.files.push((a.out_dir.join(name), text));
    }
    out.files.push((a.out_dir.join("manifest.txt"), io::serialize_manifest(&m)));
    Ok(out)
}

// ---- score ----

fn test_id(e: &SpeakerEmbedding) -> &str {
    e.utterance_id.as_deref().unwrap_or(&e.speaker_id)
}

/// Scores every key entry. Enrollment models average the projected
/// enrollment utterances of a speaker (raw vectors for cosine).
pub fn score_trials(
    plda: Option<&PldaModel>,
    scorer: Scorer,
    enroll: &[SpeakerEmbedding],
    trials: &[SpeakerEmbedding],
    key: &[io::TrialKeyRecord],
) -> Result<Vec<ScoreRecord>> {
    let model = match (scorer, plda) {
        (Scorer::Plda, None) => return Err(Error::MissingPldaModel),
        (Scorer::Plda, Some(m)) => Some(m),
        (Scorer::Cosine, _) => None,
    };
    let rep = |v: &[f64]| -> Result<Vec<f64>> {
        match model {
            Some(m) => m.project_vector(v),
            None => Ok(v.to_vec()),
        }
    };
    let mut grouped: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for e in enroll {
        grouped.entry(&e.speaker_id).or_default().push(rep(&e.vector)?);
    }
    let models: HashMap<&str, Vec<f64>> = grouped
        .into_iter()
        .map(|(id, vs)| (id, mean_vector(vs.iter().map(Vec::as_slice)).expect("non-empty group")))
        .collect();
    let mut tests: HashMap<&str, &SpeakerEmbedding> = HashMap::new();
    for t in trials {
        if tests.insert(test_id(t), t).is_some() {
            return Err(Error::InvalidValue(format!("trial id '{}' appears more than once", test_id(t))));
        }
    }
    key.par_iter()
        .map(|k| {
            let e = models
                .get(k.enroll_id.as_str())
                .ok_or_else(|| Error::UnknownId(k.enroll_id.clone()))?;
            let t = tests
                .get(k.test_id.as_str())
                .ok_or_else(|| Error::UnknownId(k.test_id.clone()))?;
            let score = match model {
                Some(m) => m.score(e, &m.project_vector(&t.vector)?)?,
                None => cosine(e, &t.vector)?,
            };
            Ok(ScoreRecord {
                enroll_id: k.enroll_id.clone(),
                test_id: k.test_id.clone(),
                score,
            })
        })
        .collect()
}

fn emit(out: &mut Output, path: Option<&Path>, text: String) {
    match path {
        Some(p) => out.files.push((p.to_path_buf(), text)),
        None => out.stdout.push_str(&text),
    }
}

fn cmd_score(a: &ScoreArgs) -> Result<Output> {
    let plda = match &a.plda {
        Some(p) => Some(load(p, io::parse_plda)?.with_length_norm(!a.no_length_norm)),
        None => None,
    };
    let enroll = load(&a.enroll, io::parse_embeddings)?;
    let trials = load(&a.trials, io::parse_embeddings)?;
    let key = load(&a.key, io::parse_trial_key)?;
    let scores = score_trials(plda.as_ref(), a.scorer, &enroll, &trials, &key)?;
    let mut out = Output::default();
    emit(&mut out, a.out.as_deref(), io::serialize_scores(&scores));
    Ok(out)
}

// ---- eval ----

/// Splits scores into target and non-target populations following the key.
/// Every key entry needs a score; scores without a key entry are returned
/// as the second element.
pub fn join_scores(scores: &[ScoreRecord], key: &[io::TrialKeyRecord]) -> Result<(TrialScoreSet, usize)> {
    let by_pair: HashMap<(&str, &str), f64> = scores
        .iter()
        .map(|s| ((s.enroll_id.as_str(), s.test_id.as_str()), s.score))
        .collect();
    let mut set = TrialScoreSet::default();
    for k in key {
        let s = *by_pair
            .get(&(k.enroll_id.as_str(), k.test_id.as_str()))
            .ok_or_else(|| Error::UnknownId(format!("{} {}", k.enroll_id, k.test_id)))?;
        if k.is_target {
            set.target_scores.push(s);
        } else {
            set.nontarget_scores.push(s);
        }
    }
    Ok((set, scores.len().saturating_sub(key.len())))
}

fn cmd_eval(global: &Cli, a: &EvalArgs) -> Result<Output> {
    let scores = load(&a.scores, io::parse_scores)?;
    let key = load(&a.key, io::parse_trial_key)?;
    let (set, unused) = join_scores(&scores, &key)?;
    let report = evaluate(&set)?;
    let mut out = Output::default();
    if unused > 0 {
        out.warnings.push(format!("{unused} scores have no trial key entry; ignored"));
    }
    if let Some(p) = &global.det_out {
        out.files.push((p.clone(), io::serialize_det(&det_points(&set)?)));
    }
    emit(&mut out, a.out.as_deref(), io::serialize_report(&Report::from(&report)));
    Ok(out)
}

// ---- simulate ----

/// Files of a `simulate` run keyed by file name (manifest included), plus
/// the trial scores for an optional DET export.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub files: BTreeMap<&'static str, String>,
    pub trial_set: TrialScoreSet,
}

pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let cohort = generate_cohort(&cfg.cohort)?;
    let result = run_scenario(&cohort, &cfg.scenario, &cfg.selection())?;
    let utts: Vec<_> = cohort.utterances().collect();
    let embeddings: Vec<SpeakerEmbedding> = utts.iter().map(|u| u.embedding.clone()).collect();
    let contours: Vec<F0Contour> = utts.iter().map(|u| u.contour.clone()).collect();
    let mapping = |m: &BTreeMap<String, PseudoSpeaker>| {
        io::serialize_mapping(&m.values().map(MappingRecord::from).collect::<Vec<_>>())
    };

    let mut files: BTreeMap<&'static str, String> = BTreeMap::new();
    files.insert("config.txt", serialize_sim_config(cfg));
    files.insert("pool.txt", io::serialize_pool(cohort.pool.speakers()));
    files.insert("plda.txt", io::serialize_plda(&cohort.plda));
    files.insert("user_embeddings.txt", io::serialize_embeddings(&embeddings));
    files.insert("user_contours.txt", io::serialize_contours(&contours));
    files.insert("trial_key.txt", io::serialize_trial_key(&result.key));
    files.insert("scores.txt", io::serialize_scores(&result.scores));
    files.insert("report.txt", io::serialize_report(&Report::from(&result.report)));
    files.insert("trial_mapping.txt", mapping(&result.trial_pseudo));
    if let Some(m) = &result.enroll_pseudo {
        files.insert("enroll_mapping.txt", mapping(m));
    }

    let s = &cfg.scenario;
    let mut m = Manifest::for_payload(&files["scores.txt"], result.scores.len() as u64);
    m.insert("version", VERSION);
    m.insert("command", "simulate");
    m.insert("seed", cfg.cohort.seed);
    m.insert("attack", s.attack);
    m.insert("trial_seed", s.trial_seed);
    if s.attack == AttackModel::AnonymizedToAnonymized {
        m.insert("enroll_seed", s.enroll_seed);
    }
    m.insert("f0_weight", io::fmt_real(result.f0_weight));
    for (name, text) in &files {
        m.insert(format!("output.{name}"), io::checksum(text));
    }
    files.insert("manifest.txt", io::serialize_manifest(&m));
    Ok(Simulation {
        files,
        trial_set: result.trial_set,
    })
}

fn resolve_sim_config(global: &Cli, a: &SimulateArgs) -> Result<SimConfig> {
    let path = match (&a.scenario, &global.config) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig("give the scenario config either positionally or via --config".into()))
        }
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    let mut cfg = match path {
        Some(p) => load(p, crate::sim::parse_sim_config)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.cohort.seed = seed;
    }
    for (key, value) in a.flags.pairs() {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(global: &Cli, a: &SimulateArgs) -> Result<Output> {
    let cfg = resolve_sim_config(global, a)?;
    ensure_dir(&a.out_dir)?;
    let sim = simulate(&cfg)?;
    let mut out = Output::default();
    if let Some(p) = &global.det_out {
        out.files.push((p.clone(), io::serialize_det(&det_points(&sim.trial_set)?)));
    }
    for (name, text) in sim.files {
        out.files.push((a.out_dir.join(name), text));
    }
    Ok(out)
}

// ---- entry points ----

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Stats { contours, out } => cmd_stats(contours, out),
        Command::Anonymize(a) => cmd_anonymize(cli, a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
    }
}

/// Runs a parsed command line. Data goes to files or `stdout`, diagnostics to `stderr`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let output = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("--threads {n}: {e}")))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }?;
    for w in &output.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    commit(&output.files)?;
    stdout
        .write_all(output.stdout.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        })
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SIM_KEYS;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_sim_key_has_a_flag() {
        let mut flags: Vec<&str> = SimFlags::KEYS.to_vec();
        flags.push("seed");
        flags.sort_unstable();
        let mut keys = SIM_KEYS.to_vec();
        keys.sort_unstable();
        assert_eq!(flags, keys);
    }

    #[test]
    fn anonymize_config_keys() {
        let (cfg, keys) = parse_anonymize_config("k_far 10\nk_sel 3\nf0_mode original\nlength_norm false\n").unwrap();
        assert_eq!(cfg.selection.k_far, 10);
        assert_eq!(cfg.selection.k_sel, 3);
        assert_eq!(cfg.f0_mode, F0Mode::Original);
        assert!(!cfg.length_norm);
        assert_eq!(keys, ["k_far", "k_sel", "f0_mode", "length_norm"]);
        assert!(parse_anonymize_config("bogus 1\n").is_err());
    }

    #[test]
    fn join_requires_every_key_entry() {
        let key = vec![io::TrialKeyRecord {
            enroll_id: "a".into(),
            test_id: "x".into(),
            is_target: true,
        }];
        assert!(matches!(join_scores(&[], &key), Err(Error::UnknownId(_))));
    }
}
