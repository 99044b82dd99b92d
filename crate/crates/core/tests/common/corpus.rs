//! Random corpora for every text format, plus a uniform "parse then
//! re-serialize" entry point per format.

use std::collections::BTreeMap;

use pseudovox::io::{self, Manifest, MappingRecord, NamedStats, Report, ScoreRecord, TrialKeyRecord};
use pseudovox::metrics::DetPoint;
use pseudovox::plda::{PldaModel, SpeakerEmbedding};
use pseudovox::pseudo::PoolSpeaker;
use pseudovox::sim::{parse_sim_config, serialize_sim_config, SimConfig};
use pseudovox::{F0Contour, Gender, LogF0Stats};
use rand::seq::IndexedRandom;
use rand::Rng;

trait SortedBy<T> {
    fn sorted_by_key<K: Ord>(self, key: impl FnMut(&T) -> K) -> Self;
}

impl<T> SortedBy<T> for Vec<T> {
    fn sorted_by_key<K: Ord>(mut self, key: impl FnMut(&T) -> K) -> Self {
        self.sort_by_key(key);
        self
    }
}

/// Finite reals that stress shortest round-trip formatting: full 17-digit
/// mantissas, subnormals, extremes, integers and negative zero.
pub fn awkward_real(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..8) {
        0 => loop {
            let x = f64::from_bits(rng.random());
            if x.is_finite() {
                break x;
            }
        },
        1 => rng.random_range(-1.0..1.0) * 1e-310,
        2 => *[f64::MAX, f64::MIN, f64::MIN_POSITIVE, f64::EPSILON, -0.0, 0.1, 1.0 / 3.0]
            .choose(rng)
            .unwrap(),
        3 => rng.random_range(-1000i64..1000) as f64,
        4 => 0.1 + rng.random::<f64>() * 1e-15,
        _ => rng.random_range(-10.0..10.0),
    }
}

pub fn nonneg_real(rng: &mut impl Rng) -> f64 {
    awkward_real(rng).abs()
}

fn id(rng: &mut impl Rng, prefix: &str, i: usize) -> String {
    let tails = ["", "_a", "-x1", ".b", "/c:2"];
    format!("{prefix}{i:04}{}", tails.choose(rng).unwrap())
}

fn gender(rng: &mut impl Rng) -> Gender {
    if rng.random() {
        Gender::Male
    } else {
        Gender::Female
    }
}

fn stats(rng: &mut impl Rng) -> LogF0Stats {
    LogF0Stats::new(awkward_real(rng), nonneg_real(rng), rng.random_range(1..u64::MAX)).unwrap()
}

fn vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| awkward_real(rng)).collect()
}

pub fn contours(rng: &mut impl Rng) -> Vec<F0Contour> {
    (0..rng.random_range(0..6))
        .map(|i| {
            let n = rng.random_range(0..8);
            let values = (0..n)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { nonneg_real(rng) })
                .collect();
            F0Contour::new(id(rng, "utt", i), values).unwrap()
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|c| c.utterance_id.clone())
}

pub fn named_stats(rng: &mut impl Rng) -> Vec<NamedStats> {
    (0..rng.random_range(0..6))
        .map(|i| NamedStats {
            id: id(rng, "u", i),
            stats: stats(rng),
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|s| s.id.clone())
}

pub fn embeddings(rng: &mut impl Rng) -> Vec<SpeakerEmbedding> {
    let d = rng.random_range(1..6);
    let mut out = Vec::new();
    for s in 0..rng.random_range(0..4) {
        let spk = id(rng, "spk", s);
        let g = gender(rng);
        if rng.random_bool(0.3) {
            out.push(SpeakerEmbedding::new(spk.clone(), None, g, vector(rng, d)));
        }
        for u in 0..rng.random_range(0..3) {
            let utt = Some(format!("{spk}-u{u}"));
            out.push(SpeakerEmbedding::new(spk.clone(), utt, g, vector(rng, d)));
        }
    }
    out
}

pub fn pool(rng: &mut impl Rng) -> Vec<PoolSpeaker> {
    let d = rng.random_range(1..6);
    (0..rng.random_range(0..6))
        .map(|i| PoolSpeaker {
            speaker_id: id(rng, "pool", i),
            gender: gender(rng),
            embedding: vector(rng, d),
            f0_stats: stats(rng),
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|s| s.speaker_id.clone())
}

pub fn plda(rng: &mut impl Rng) -> PldaModel {
    let d = rng.random_range(1..5);
    PldaModel::new(
        vector(rng, d),
        (0..d).map(|_| vector(rng, d)).collect(),
        (0..d).map(|_| nonneg_real(rng)).collect(),
    )
    .unwrap()
}

pub fn mapping(rng: &mut impl Rng) -> Vec<MappingRecord> {
    (0..rng.random_range(0..5))
        .map(|i| MappingRecord {
            source_speaker_id: id(rng, "src", i),
            seed_used: rng.random(),
            member_ids: (0..rng.random_range(1..5)).map(|m| format!("p{m}")).collect(),
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|r| r.source_speaker_id.clone())
}

pub fn scores(rng: &mut impl Rng) -> Vec<ScoreRecord> {
    (0..rng.random_range(0..8))
        .map(|i| ScoreRecord {
            enroll_id: id(rng, "e", i / 3),
            test_id: format!("t{i:03}"),
            score: awkward_real(rng),
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|r| (r.enroll_id.clone(), r.test_id.clone()))
}

pub fn trial_key(rng: &mut impl Rng) -> Vec<TrialKeyRecord> {
    (0..rng.random_range(0..8))
        .map(|i| TrialKeyRecord {
            enroll_id: id(rng, "e", i / 3),
            test_id: format!("t{i:03}"),
            is_target: rng.random(),
        })
        .collect::<Vec<_>>()
        .sorted_by_key(|r| (r.enroll_id.clone(), r.test_id.clone()))
}

pub fn report(rng: &mut impl Rng) -> Report {
    Report {
        eer_pct: rng.random_range(0.0..=100.0),
        cllr_bits: nonneg_real(rng),
        min_cllr_bits: nonneg_real(rng),
        n_target: rng.random(),
        n_nontarget: rng.random(),
    }
}

pub fn det(rng: &mut impl Rng) -> Vec<DetPoint> {
    (0..rng.random_range(0..8))
        .map(|_| DetPoint {
            pfa: rng.random(),
            pmiss: *[0.0, 1.0, 0.5, rng.random::<f64>(), 1.0 / 3.0].choose(rng).unwrap(),
        })
        .collect()
}

pub fn manifest(rng: &mut impl Rng) -> Manifest {
    let payload: String = (0..rng.random_range(0..30)).map(|_| rng.random_range('a'..='z')).collect();
    let mut m = Manifest::for_payload(&payload, rng.random());
    let mut entries = BTreeMap::new();
    for i in 0..rng.random_range(0..5) {
        entries.insert(format!("key.{i}"), format!("value {}", rng.random::<u32>()));
    }
    m.entries = entries;
    m
}

pub fn sim_config(rng: &mut impl Rng) -> SimConfig {
    let mut c = SimConfig::default();
    c.cohort.seed = rng.random();
    c.cohort.between_var = nonneg_real(rng);
    c.cohort.f0_mean_male = awkward_real(rng);
    c.scenario.enroll_seed = rng.random();
    c.scenario.f0_weight = if rng.random() { Some(nonneg_real(rng)) } else { None };
    c.selection.k_far = rng.random_range(1..1000);
    c
}

/// A text format: name, generator of canonical text, and parse-then-serialize.
pub struct Format {
    pub name: &'static str,
    pub generate: fn(&mut rand_chacha::ChaCha8Rng) -> String,
    pub reserialize: fn(&str) -> Result<String, String>,
    /// Canonical text of the default value for formats where omitted keys
    /// take defaults (config files).
    pub defaults: Option<fn() -> String>,
}

macro_rules! format_entry {
    ($name:literal, $gen:expr, $ser:expr, $parse:expr) => {
        Format {
            name: $name,
            generate: |rng| $ser(&$gen(rng)),
            reserialize: |text| $parse(text).map(|v| $ser(&v)).map_err(|e| e.to_string()),
            defaults: None,
        }
    };
}

pub fn formats() -> Vec<Format> {
    vec![
        format_entry!("contours", contours, |v: &Vec<_>| io::serialize_contours(v), io::parse_contours),
        format_entry!("stats", named_stats, |v: &Vec<_>| io::serialize_stats(v), io::parse_stats),
        format_entry!("embeddings", embeddings, |v: &Vec<_>| io::serialize_embeddings(v), io::parse_embeddings),
        format_entry!("pool", pool, |v: &Vec<_>| io::serialize_pool(v), io::parse_pool),
        format_entry!("plda", plda, io::serialize_plda, io::parse_plda),
        format_entry!("mapping", mapping, |v: &Vec<_>| io::serialize_mapping(v), io::parse_mapping),
        format_entry!("scores", scores, |v: &Vec<_>| io::serialize_scores(v), io::parse_scores),
        format_entry!("trial_key", trial_key, |v: &Vec<_>| io::serialize_trial_key(v), io::parse_trial_key),
        format_entry!("report", report, io::serialize_report, io::parse_report),
        format_entry!("det", det, |v: &Vec<_>| io::serialize_det(v), io::parse_det),
        format_entry!("manifest", manifest, io::serialize_manifest, io::parse_manifest),
        Format {
            defaults: Some(|| serialize_sim_config(&SimConfig::default())),
            ..format_entry!("sim_config", sim_config, serialize_sim_config, parse_sim_config)
        },
    ]
}

/// Value-level round trip: parse(serialize(v)) == v for every format,
/// with values generated in canonical (sorted) order.
pub fn value_roundtrip(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    fn check<T: PartialEq + std::fmt::Debug, E: std::fmt::Display>(
        name: &str,
        v: T,
        ser: impl Fn(&T) -> String,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<(), String> {
        let text = ser(&v);
        let back = parse(&text).map_err(|e| format!("{name}: {e}\n{text}"))?;
        if back != v {
            return Err(format!("{name}: value changed\n{v:?}\n{back:?}"));
        }
        Ok(())
    }
    check("contours", contours(rng), |v| io::serialize_contours(v), io::parse_contours)?;
    check("stats", named_stats(rng), |v| io::serialize_stats(v), io::parse_stats)?;
    let mut e = embeddings(rng);
    e.sort_by(|a, b| {
        (&a.speaker_id, a.utterance_id.as_deref().unwrap_or("-"))
            .cmp(&(&b.speaker_id, b.utterance_id.as_deref().unwrap_or("-")))
    });
    check("embeddings", e, |v| io::serialize_embeddings(v), io::parse_embeddings)?;
    check("pool", pool(rng), |v| io::serialize_pool(v), io::parse_pool)?;
    check("plda", plda(rng), io::serialize_plda, io::parse_plda)?;
    check("mapping", mapping(rng), |v| io::serialize_mapping(v), io::parse_mapping)?;
    check("scores", scores(rng), |v| io::serialize_scores(v), io::parse_scores)?;
    check("trial_key", trial_key(rng), |v| io::serialize_trial_key(v), io::parse_trial_key)?;
    check("report", report(rng), io::serialize_report, io::parse_report)?;
    check("det", det(rng), |v| io::serialize_det(v), io::parse_det)?;
    check("manifest", manifest(rng), io::serialize_manifest, io::parse_manifest)?;
    check("sim_config", sim_config(rng), serialize_sim_config, parse_sim_config)?;
    Ok(())
}

const NOISE: &[u8] = b"0123456789.-+eE |#\nxMF\t";

/// One random edit: byte insert/delete/replace, line drop/duplicate/swap,
/// or truncation.
pub fn mutate(rng: &mut impl Rng, text: &str) -> String {
    let mut bytes = text.as_bytes().to_vec();
    let mut lines: Vec<&str> = text.lines().collect();
    match rng.random_range(0..7) {
        0 if !bytes.is_empty() => {
            let i = rng.random_range(0..bytes.len());
            bytes.remove(i);
        }
        1 if !bytes.is_empty() => {
            let i = rng.random_range(0..bytes.len());
            bytes[i] = *NOISE.choose(rng).unwrap();
        }
        2 if !lines.is_empty() => {
            let i = rng.random_range(0..lines.len());
            lines.remove(i);
            return lines.join("\n") + "\n";
        }
        3 if !lines.is_empty() => {
            let i = rng.random_range(0..lines.len());
            lines.insert(i, lines[i]);
            return lines.join("\n") + "\n";
        }
        4 if lines.len() > 1 => {
            let i = rng.random_range(0..lines.len());
            let j = rng.random_range(0..lines.len());
            lines.swap(i, j);
            return lines.join("\n") + "\n";
        }
        5 if !bytes.is_empty() => {
            bytes.truncate(rng.random_range(0..bytes.len()));
        }
        _ => {
            let i = rng.random_range(0..=bytes.len());
            bytes.insert(i, *NOISE.choose(rng).unwrap());
        }
    }
    String::from_utf8(bytes).expect("ASCII corpus")
}

/// `text` plus the default record of every key it does not mention.
pub fn with_defaults(text: &str, defaults: &str) -> String {
    let present: std::collections::HashSet<String> =
        super::token_records(text).into_iter().map(|r| r[0].clone()).collect();
    let mut out = text.to_string();
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    for line in defaults.lines() {
        let key = line.split_whitespace().next().unwrap_or("");
        if !present.contains(key) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}
