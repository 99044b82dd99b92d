//! Line-oriented text formats.
//!
//! Every format shares the same lexical rules: UTF-8, LF line endings,
//! whitespace-separated fields, lines whose first non-blank character is `#`
//! are comments, blank lines are skipped. Reals are written in shortest
//! round-trip decimal (no exponent) and must be finite when read back.
//! Serializers emit single-space separated fields, records sorted by their
//! primary id, and a trailing newline.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{ParseError, ParseErrorKind};
use crate::f0::{F0Contour, LogF0Stats, DEFAULT_FRAME_SHIFT_MS};
use crate::metrics::DetPoint;
use crate::plda::{Gender, PldaModel, SpeakerEmbedding};
use crate::pseudo::{PoolSpeaker, PseudoSpeaker};

pub type ParseResult<T> = std::result::Result<T, ParseError>;

pub const FORMAT_VERSION: &str = "1";

/// Placeholder written for an absent utterance id.
pub const NO_UTTERANCE: &str = "-";

#[derive(Debug, Clone, Copy)]
pub struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub column: usize,
}

impl<'a> Token<'a> {
    fn err(&self, kind: ParseErrorKind, msg: impl Into<String>) -> ParseError {
        ParseError::new(kind, self.line, self.column, msg)
    }

    pub fn real(&self) -> ParseResult<f64> {
        let v: f64 = self.text.parse().map_err(|_| {
            self.err(ParseErrorKind::Syntax, format!("'{}' is not a number", self.text))
        })?;
        if !v.is_finite() {
            return Err(self.err(
                ParseErrorKind::InvalidValue,
                format!("'{}' is not finite", self.text),
            ));
        }
        Ok(v)
    }

    pub fn uint(&self) -> ParseResult<u64> {
        self.text.parse().map_err(|_| {
            self.err(
                ParseErrorKind::Syntax,
                format!("'{}' is not an unsigned integer", self.text),
            )
        })
    }

    pub fn gender(&self) -> ParseResult<Gender> {
        self.text
            .parse()
            .map_err(|_| self.err(ParseErrorKind::InvalidValue, format!("gender '{}' is not M or F", self.text)))
    }

    pub fn id(&self) -> ParseResult<String> {
        if self.text == "|" {
            return Err(self.err(ParseErrorKind::Syntax, "'|' is not a valid id"));
        }
        Ok(self.text.to_string())
    }

    pub fn keyword(&self, want: &str) -> ParseResult<()> {
        if self.text != want {
            return Err(self.err(
                ParseErrorKind::Syntax,
                format!("expected '{want}', found '{}'", self.text),
            ));
        }
        Ok(())
    }
}

/// A non-comment, non-blank line split into tokens.
#[derive(Debug, Clone)]
pub struct Record<'a> {
    pub line: usize,
    pub tokens: Vec<Token<'a>>,
}

impl<'a> Record<'a> {
    pub fn err(&self, kind: ParseErrorKind, msg: impl Into<String>) -> ParseError {
        ParseError::new(kind, self.line, 1, msg)
    }

    /// Token at `i`, or a syntax error naming `what` when the line is short.
    pub fn field(&self, i: usize, what: &str) -> ParseResult<&Token<'a>> {
        self.tokens.get(i).ok_or_else(|| {
            let column = self
                .tokens
                .last()
                .map(|t| t.column + t.text.len())
                .unwrap_or(1);
            ParseError::new(ParseErrorKind::Syntax, self.line, column, format!("missing {what}"))
        })
    }

    pub fn expect_len(&self, n: usize) -> ParseResult<()> {
        if self.tokens.len() > n {
            return Err(self.tokens[n].err(ParseErrorKind::Syntax, "unexpected trailing field"));
        }
        if self.tokens.len() < n {
            self.field(n - 1, "field")?;
        }
        Ok(())
    }

    fn reals(&self, from: usize) -> ParseResult<Vec<f64>> {
        self.tokens[from..].iter().map(Token::real).collect()
    }
}

pub fn records(text: &str) -> impl Iterator<Item = Record<'_>> {
    text.split('\n').enumerate().filter_map(|(i, line)| {
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in line.char_indices() {
            if ch == ' ' || ch == '\t' {
                if let Some(s) = start.take() {
                    tokens.push(Token {
                        text: &line[s..pos],
                        line: i + 1,
                        column: s + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if let Some(s) = start {
            tokens.push(Token {
                text: &line[s..],
                line: i + 1,
                column: s + 1,
            });
        }
        match tokens.first() {
            None => None,
            Some(t) if t.text.starts_with('#') => None,
            Some(_) => Some(Record {
                line: i + 1,
                tokens,
            }),
        }
    })
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn push_reals(out: &mut String, xs: &[f64]) {
    for x in xs {
        out.push(' ');
        out.push_str(&fmt_real(*x));
    }
}

fn check_unique<'a>(seen: &mut HashSet<String>, rec: &Record<'a>, key: String) -> ParseResult<()> {
    if !seen.insert(key.clone()) {
        return Err(rec.tokens[0].err(ParseErrorKind::InvalidValue, format!("duplicate id '{key}'")));
    }
    Ok(())
}

fn check_dim(rec: &Record<'_>, dim: &mut Option<usize>, found: usize, at: usize) -> ParseResult<()> {
    match *dim {
        None if found == 0 => Err(rec.err(ParseErrorKind::DimensionMismatch, "empty vector")),
        None => {
            *dim = Some(found);
            Ok(())
        }
        Some(d) if d != found => {
            let column = rec.tokens.get(at).map(|t| t.column).unwrap_or(1);
            Err(ParseError::new(
                ParseErrorKind::DimensionMismatch,
                rec.line,
                column,
                format!("expected {d} values, found {found}"),
            ))
        }
        Some(_) => Ok(()),
    }
}

// ---- F0 contours: `<utterance_id> <v1> ... <vN>` ----

pub fn parse_contours(text: &str) -> ParseResult<Vec<F0Contour>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        let id = rec.tokens[0].id()?;
        check_unique(&mut seen, &rec, id.clone())?;
        let mut values = Vec::with_capacity(rec.tokens.len() - 1);
        for t in &rec.tokens[1..] {
            let v = t.real()?;
            if v < 0.0 {
                return Err(t.err(ParseErrorKind::InvalidValue, "F0 must be non-negative"));
            }
            values.push(v);
        }
        out.push(F0Contour {
            utterance_id: id,
            values,
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
        });
    }
    Ok(out)
}

pub fn serialize_contours(contours: &[F0Contour]) -> String {
    let mut sorted: Vec<&F0Contour> = contours.iter().collect();
    sorted.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let mut out = String::new();
    for c in sorted {
        out.push_str(&c.utterance_id);
        push_reals(&mut out, &c.values);
        out.push('\n');
    }
    out
}

// ---- Stats: `<id> <mean> <std> <voiced_count>` ----

#[derive(Debug, Clone, PartialEq)]
pub struct NamedStats {
    pub id: String,
    pub stats: LogF0Stats,
}

fn parse_stats_fields(toks: &[Token<'_>]) -> ParseResult<LogF0Stats> {
    let mean = toks[0].real()?;
    let std = toks[1].real()?;
    if std < 0.0 {
        return Err(toks[1].err(ParseErrorKind::InvalidValue, "std must be non-negative"));
    }
    let count = toks[2].uint()?;
    if count == 0 {
        return Err(toks[2].err(ParseErrorKind::InvalidValue, "voiced count must be at least 1"));
    }
    Ok(LogF0Stats {
        mean,
        std,
        voiced_frame_count: count,
    })
}

pub fn parse_stats(text: &str) -> ParseResult<Vec<NamedStats>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        rec.expect_len(4)?;
        let id = rec.tokens[0].id()?;
        check_unique(&mut seen, &rec, id.clone())?;
        out.push(NamedStats {
            id,
            stats: parse_stats_fields(&rec.tokens[1..4])?,
        });
    }
    Ok(out)
}

fn push_stats(out: &mut String, s: &LogF0Stats) {
    let _ = write!(
        out,
        "{} {} {}",
        fmt_real(s.mean),
        fmt_real(s.std),
        s.voiced_frame_count
    );
}

pub fn serialize_stats(stats: &[NamedStats]) -> String {
    let mut sorted: Vec<&NamedStats> = stats.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    for s in sorted {
        out.push_str(&s.id);
        out.push(' ');
        push_stats(&mut out, &s.stats);
        out.push('\n');
    }
    out
}

// ---- Embeddings: `<speaker_id> <utterance_id> <M|F> <d reals>` ----

pub fn parse_embeddings(text: &str) -> ParseResult<Vec<SpeakerEmbedding>> {
    let mut seen = HashSet::new();
    let mut dim = None;
    let mut out = Vec::new();
    for rec in records(text) {
        let speaker = rec.field(0, "speaker id")?.id()?;
        let utt = rec.field(1, "utterance id")?.id()?;
        let gender = rec.field(2, "gender")?.gender()?;
        check_unique(&mut seen, &rec, format!("{speaker} {utt}"))?;
        let at = 3 + dim.unwrap_or(0);
        check_dim(&rec, &mut dim, rec.tokens.len() - 3, at)?;
        out.push(SpeakerEmbedding {
            speaker_id: speaker,
            utterance_id: (utt != NO_UTTERANCE).then_some(utt),
            gender,
            vector: rec.reals(3)?,
        });
    }
    Ok(out)
}

pub fn serialize_embeddings(embeddings: &[SpeakerEmbedding]) -> String {
    let mut sorted: Vec<&SpeakerEmbedding> = embeddings.iter().collect();
    sorted.sort_by(|a, b| {
        (a.speaker_id.as_str(), a.utterance_id.as_deref().unwrap_or(NO_UTTERANCE))
            .cmp(&(b.speaker_id.as_str(), b.utterance_id.as_deref().unwrap_or(NO_UTTERANCE)))
    });
    let mut out = String::new();
    for e in sorted {
        let _ = write!(
            out,
            "{} {} {}",
            e.speaker_id,
            e.utterance_id.as_deref().unwrap_or(NO_UTTERANCE),
            e.gender
        );
        push_reals(&mut out, &e.vector);
        out.push('\n');
    }
    out
}

// ---- Pool manifest: `<speaker_id> <M|F> <d reals> | <f0_mean> <f0_std> <voiced_count>` ----

pub fn parse_pool(text: &str) -> ParseResult<Vec<PoolSpeaker>> {
    let mut seen = HashSet::new();
    let mut dim = None;
    let mut out = Vec::new();
    for rec in records(text) {
        let id = rec.field(0, "speaker id")?.id()?;
        let gender = rec.field(1, "gender")?.gender()?;
        check_unique(&mut seen, &rec, id.clone())?;
        let bar = rec.tokens[2..]
            .iter()
            .position(|t| t.text == "|")
            .map(|p| p + 2)
            .ok_or_else(|| {
                let column = rec.tokens.last().map(|t| t.column).unwrap_or(1);
                ParseError::new(ParseErrorKind::Syntax, rec.line, column, "missing '|' separator")
            })?;
        check_dim(&rec, &mut dim, bar - 2, bar)?;
        let embedding = rec.tokens[2..bar]
            .iter()
            .map(Token::real)
            .collect::<ParseResult<Vec<f64>>>()?;
        let tail = &rec.tokens[bar + 1..];
        if tail.len() > 3 {
            return Err(tail[3].err(ParseErrorKind::Syntax, "unexpected trailing field"));
        }
        if tail.len() < 3 {
            let column = rec.tokens.last().map(|t| t.column + t.text.len()).unwrap_or(1);
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                rec.line,
                column,
                "expected '<f0_mean> <f0_std> <voiced_count>' after '|'",
            ));
        }
        out.push(PoolSpeaker {
            speaker_id: id,
            gender,
            embedding,
            f0_stats: parse_stats_fields(tail)?,
        });
    }
    Ok(out)
}

pub fn serialize_pool(speakers: &[PoolSpeaker]) -> String {
    let mut sorted: Vec<&PoolSpeaker> = speakers.iter().collect();
    sorted.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
    let mut out = String::new();
    for s in sorted {
        let _ = write!(out, "{} {}", s.speaker_id, s.gender);
        push_reals(&mut out, &s.embedding);
        out.push_str(" | ");
        push_stats(&mut out, &s.f0_stats);
        out.push('\n');
    }
    out
}

// ---- PLDA model ----
//
//   dim <d>
//   mean <d reals>
//   transform <d reals>     (d lines, one per row)
//   psi <d reals>

pub fn parse_plda(text: &str) -> ParseResult<PldaModel> {
    let mut recs = records(text);
    let eof = |what: &str| ParseError::new(ParseErrorKind::Syntax, text.split('\n').count(), 1, format!("missing '{what}' line"));
    let head = recs.next().ok_or_else(|| eof("dim"))?;
    head.field(0, "'dim'")?.keyword("dim")?;
    head.expect_len(2)?;
    let dim_tok = head.tokens[1];
    let dim = dim_tok.uint()? as usize;
    if dim == 0 {
        return Err(dim_tok.err(ParseErrorKind::InvalidValue, "dim must be positive"));
    }
    let mut vector_line = |kw: &str| -> ParseResult<Vec<f64>> {
        let rec = recs.next().ok_or_else(|| eof(kw))?;
        rec.tokens[0].keyword(kw)?;
        if rec.tokens.len() - 1 != dim {
            let at = rec.tokens.get(dim + 1).unwrap_or(rec.tokens.last().unwrap());
            return Err(at.err(
                ParseErrorKind::DimensionMismatch,
                format!("expected {dim} values, found {}", rec.tokens.len() - 1),
            ));
        }
        rec.reals(1)
    };
    let mean = vector_line("mean")?;
    let rows = (0..dim)
        .map(|_| vector_line("transform"))
        .collect::<ParseResult<Vec<_>>>()?;
    let psi = vector_line("psi")?;
    if let Some(extra) = recs.next() {
        return Err(extra.tokens[0].err(ParseErrorKind::Syntax, "unexpected content after 'psi'"));
    }
    let psi_line = records(text).last().map(|r| r.line).unwrap_or(1);
    if let Some(i) = psi.iter().position(|p| *p < 0.0) {
        let tok = records(text).last().unwrap().tokens[i + 1];
        return Err(tok.err(ParseErrorKind::InvalidValue, "psi must be non-negative"));
    }
    PldaModel::new(mean, rows, psi)
        .map_err(|e| ParseError::new(ParseErrorKind::InvalidValue, psi_line, 1, e.to_string()))
}

pub fn serialize_plda(model: &PldaModel) -> String {
    let mut out = format!("dim {}\nmean", model.dim());
    push_reals(&mut out, model.mean());
    out.push('\n');
    for row in model.transform_rows() {
        out.push_str("transform");
        push_reals(&mut out, row);
        out.push('\n');
    }
    out.push_str("psi");
    push_reals(&mut out, model.psi());
    out.push('\n');
    out
}

// ---- Pseudo-speaker mapping: `<source_speaker_id> <seed_used> <member_1> ... <member_k>` ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRecord {
    pub source_speaker_id: String,
    pub seed_used: u64,
    pub member_ids: Vec<String>,
}

impl From<&PseudoSpeaker> for MappingRecord {
    fn from(p: &PseudoSpeaker) -> Self {
        Self {
            source_speaker_id: p.source_speaker_id.clone(),
            seed_used: p.seed_used,
            member_ids: p.member_ids.clone(),
        }
    }
}

pub fn parse_mapping(text: &str) -> ParseResult<Vec<MappingRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        let id = rec.tokens[0].id()?;
        check_unique(&mut seen, &rec, id.clone())?;
        let seed = rec.field(1, "seed")?.uint()?;
        rec.field(2, "member id")?;
        let members = rec.tokens[2..]
            .iter()
            .map(Token::id)
            .collect::<ParseResult<Vec<_>>>()?;
        let mut uniq = HashSet::new();
        if let Some(dup) = rec.tokens[2..].iter().find(|t| !uniq.insert(t.text)) {
            return Err(dup.err(ParseErrorKind::InvalidValue, format!("member '{}' repeated", dup.text)));
        }
        out.push(MappingRecord {
            source_speaker_id: id,
            seed_used: seed,
            member_ids: members,
        });
    }
    Ok(out)
}

pub fn serialize_mapping(records: &[MappingRecord]) -> String {
    let mut sorted: Vec<&MappingRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.source_speaker_id.cmp(&b.source_speaker_id));
    let mut out = String::new();
    for r in sorted {
        let _ = write!(out, "{} {}", r.source_speaker_id, r.seed_used);
        for m in &r.member_ids {
            out.push(' ');
            out.push_str(m);
        }
        out.push('\n');
    }
    out
}

// ---- Scores: `<enroll_speaker_id> <test_utterance_id> <score>` ----

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub enroll_id: String,
    pub test_id: String,
    pub score: f64,
}

pub fn parse_scores(text: &str) -> ParseResult<Vec<ScoreRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        rec.expect_len(3)?;
        let enroll_id = rec.tokens[0].id()?;
        let test_id = rec.tokens[1].id()?;
        check_unique(&mut seen, &rec, format!("{enroll_id} {test_id}"))?;
        out.push(ScoreRecord {
            enroll_id,
            test_id,
            score: rec.tokens[2].real()?,
        });
    }
    Ok(out)
}

pub fn serialize_scores(scores: &[ScoreRecord]) -> String {
    let mut sorted: Vec<&ScoreRecord> = scores.iter().collect();
    sorted.sort_by(|a, b| (&a.enroll_id, &a.test_id).cmp(&(&b.enroll_id, &b.test_id)));
    let mut out = String::new();
    for s in sorted {
        let _ = writeln!(out, "{} {} {}", s.enroll_id, s.test_id, fmt_real(s.score));
    }
    out
}

// ---- Trial key: `<enroll_speaker_id> <test_utterance_id> <target|nontarget>` ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialKeyRecord {
    pub enroll_id: String,
    pub test_id: String,
    pub is_target: bool,
}

pub fn parse_trial_key(text: &str) -> ParseResult<Vec<TrialKeyRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        rec.expect_len(3)?;
        let enroll_id = rec.tokens[0].id()?;
        let test_id = rec.tokens[1].id()?;
        check_unique(&mut seen, &rec, format!("{enroll_id} {test_id}"))?;
        let is_target = match rec.tokens[2].text {
            "target" => true,
            "nontarget" => false,
            other => {
                return Err(rec.tokens[2].err(
                    ParseErrorKind::InvalidValue,
                    format!("label must be target|nontarget, got '{other}'"),
                ))
            }
        };
        out.push(TrialKeyRecord {
            enroll_id,
            test_id,
            is_target,
        });
    }
    Ok(out)
}

pub fn serialize_trial_key(key: &[TrialKeyRecord]) -> String {
    let mut sorted: Vec<&TrialKeyRecord> = key.iter().collect();
    sorted.sort_by(|a, b| (&a.enroll_id, &a.test_id).cmp(&(&b.enroll_id, &b.test_id)));
    let mut out = String::new();
    for k in sorted {
        let label = if k.is_target { "target" } else { "nontarget" };
        let _ = writeln!(out, "{} {} {}", k.enroll_id, k.test_id, label);
    }
    out
}

// ---- Key/value files (reports, configs, manifests) ----

/// `key value` lines in file order. Keys must be unique; values are the rest
/// of the line with single spaces between tokens.
pub fn parse_key_values(text: &str) -> ParseResult<Vec<(Token<'_>, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in records(text) {
        let key = rec.tokens[0];
        if !seen.insert(key.text) {
            return Err(key.err(ParseErrorKind::InvalidValue, format!("duplicate key '{}'", key.text)));
        }
        rec.field(1, &format!("value for '{}'", key.text))?;
        let value = rec.tokens[1..]
            .iter()
            .map(|t| t.text)
            .collect::<Vec<_>>()
            .join(" ");
        out.push((key, value));
    }
    Ok(out)
}

/// Text form of an evaluation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub eer_pct: f64,
    pub cllr_bits: f64,
    pub min_cllr_bits: f64,
    pub n_target: u64,
    pub n_nontarget: u64,
}

impl From<&crate::metrics::EvalReport> for Report {
    fn from(r: &crate::metrics::EvalReport) -> Self {
        Self {
            eer_pct: r.eer_pct(),
            cllr_bits: r.cllr_bits,
            min_cllr_bits: r.min_cllr_bits,
            n_target: r.n_target as u64,
            n_nontarget: r.n_nontarget as u64,
        }
    }
}

const REPORT_KEYS: [&str; 5] = ["eer_pct", "cllr_bits", "min_cllr_bits", "n_target", "n_nontarget"];

pub fn parse_report(text: &str) -> ParseResult<Report> {
    let kv = parse_key_values(text)?;
    let mut found: BTreeMap<&str, Token<'_>> = BTreeMap::new();
    for (key, _) in &kv {
        if !REPORT_KEYS.contains(&key.text) {
            return Err(key.err(ParseErrorKind::Syntax, format!("unknown report key '{}'", key.text)));
        }
    }
    for rec in records(text) {
        rec.expect_len(2)?;
        found.insert(rec.tokens[0].text, rec.tokens[1]);
    }
    let get = |k: &str| {
        found.get(k).copied().ok_or_else(|| {
            ParseError::new(ParseErrorKind::Syntax, text.split('\n').count(), 1, format!("missing key '{k}'"))
        })
    };
    Ok(Report {
        eer_pct: get("eer_pct")?.real()?,
        cllr_bits: get("cllr_bits")?.real()?,
        min_cllr_bits: get("min_cllr_bits")?.real()?,
        n_target: get("n_target")?.uint()?,
        n_nontarget: get("n_nontarget")?.uint()?,
    })
}

pub fn serialize_report(r: &Report) -> String {
    format!(
        "eer_pct {}\ncllr_bits {}\nmin_cllr_bits {}\nn_target {}\nn_nontarget {}\n",
        fmt_real(r.eer_pct),
        fmt_real(r.cllr_bits),
        fmt_real(r.min_cllr_bits),
        r.n_target,
        r.n_nontarget
    )
}

// ---- DET export: `<Pfa> <Pmiss>` rows, in curve order ----

pub fn parse_det(text: &str) -> ParseResult<Vec<DetPoint>> {
    records(text)
        .map(|rec| {
            rec.expect_len(2)?;
            let pfa = rec.tokens[0].real()?;
            let pmiss = rec.tokens[1].real()?;
            for (t, v) in [(&rec.tokens[0], pfa), (&rec.tokens[1], pmiss)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(t.err(ParseErrorKind::InvalidValue, "rate outside [0, 1]"));
                }
            }
            Ok(DetPoint { pfa, pmiss })
        })
        .collect()
}

pub fn serialize_det(points: &[DetPoint]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(out, "{} {}", fmt_real(p.pfa), fmt_real(p.pmiss));
    }
    out
}

// ---- Manifest ----

/// Run manifest: header fields plus free-form `key value` entries
/// (seeds, versions, per-file checksums), serialized with sorted keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub format_version: String,
    pub record_count: u64,
    /// SHA-256 (lowercase hex) over the canonical serialization of the payload.
    pub checksum: String,
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn for_payload(payload: &str, record_count: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            record_count,
            checksum: checksum(payload),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }
}

pub fn checksum(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

const MANIFEST_HEADER: [&str; 3] = ["format_version", "record_count", "checksum"];

pub fn parse_manifest(text: &str) -> ParseResult<Manifest> {
    let kv = parse_key_values(text)?;
    let mut entries = BTreeMap::new();
    let mut header: BTreeMap<&str, (Token<'_>, String)> = BTreeMap::new();
    for (key, value) in kv {
        if MANIFEST_HEADER.contains(&key.text) {
            header.insert(key.text, (key, value));
        } else {
            entries.insert(key.text.to_string(), value);
        }
    }
    let missing = |k: &str| {
        ParseError::new(ParseErrorKind::Syntax, text.split('\n').count(), 1, format!("missing key '{k}'"))
    };
    let (_, format_version) = header.get("format_version").cloned().ok_or_else(|| missing("format_version"))?;
    let (count_tok, count) = header.get("record_count").cloned().ok_or_else(|| missing("record_count"))?;
    let record_count = count.parse().map_err(|_| {
        count_tok.err(ParseErrorKind::Syntax, format!("'{count}' is not an unsigned integer"))
    })?;
    let (sum_tok, checksum) = header.get("checksum").cloned().ok_or_else(|| missing("checksum"))?;
    if checksum.len() != 64 || !checksum.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(sum_tok.err(ParseErrorKind::InvalidValue, "checksum must be 64 lowercase hex digits"));
    }
    Ok(Manifest {
        format_version,
        record_count,
        checksum,
        entries,
    })
}

pub fn serialize_manifest(m: &Manifest) -> String {
    let mut out = format!(
        "format_version {}\nrecord_count {}\nchecksum {}\n",
        m.format_version, m.record_count, m.checksum
    );
    for (k, v) in &m.entries {
        let _ = writeln!(out, "{k} {v}");
    }
    out
}
