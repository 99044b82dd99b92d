//! C ABI over the pseudovox core.
//!
//! Conventions: every fallible function returns a [`PvStatus`] and writes its
//! result through out-pointers. On failure a message is available from
//! [`pv_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their `*_free` function; strings returned by the library
//! are released with [`pv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pseudovox::io;
use pseudovox::metrics::{evaluate, TrialScoreSet};
use pseudovox::plda::{cosine, PldaModel, SpeakerEmbedding};
use pseudovox::pseudo::{self, PseudoSpeaker, SpeakerPool};
use pseudovox::{Error, F0Contour, Gender, GenderPolicy, LogF0Stats, Scorer, SelectionConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    DimensionMismatch = 4,
    NoVoicedFrames = 5,
    DegenerateSourceStats = 6,
    EmptyInput = 7,
    PoolTooSmall = 8,
    MissingPldaModel = 9,
    BufferTooSmall = 10,
    Panic = 11,
    Other = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvGender {
    Male = 0,
    Female = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvGenderPolicy {
    Same = 0,
    Opposite = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvScorer {
    Plda = 0,
    Cosine = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvLogF0Stats {
    pub mean: f64,
    pub std: f64,
    pub voiced_frame_count: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvSelectionConfig {
    pub k_far: usize,
    pub k_sel: usize,
    pub gender_policy: PvGenderPolicy,
    pub scorer: PvScorer,
    pub global_seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvEvalReport {
    pub eer: f64,
    pub cllr_bits: f64,
    pub min_cllr_bits: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

/// Opaque PLDA model.
pub struct PvPlda(PldaModel);

/// Opaque speaker pool (optionally carrying a PLDA model).
pub struct PvPool(SpeakerPool);

/// Opaque derived pseudo-speaker.
pub struct PvPseudoSpeaker(PseudoSpeaker);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PvStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NoVoicedFrames(_) => PvStatus::NoVoicedFrames,
            Error::DegenerateSourceStats { .. } => PvStatus::DegenerateSourceStats,
            Error::DimensionMismatch { .. } | Error::ZeroVector => PvStatus::DimensionMismatch,
            Error::EmptySpeakerSet | Error::EmptyAfterFilter | Error::EmptyPopulation(_) => PvStatus::EmptyInput,
            Error::PoolTooSmall { .. } => PvStatus::PoolTooSmall,
            Error::MissingPldaModel => PvStatus::MissingPldaModel,
            Error::Parse(_) => PvStatus::Parse,
            Error::InvalidValue(_) | Error::InvalidConfig(_) | Error::UnknownId(_) => PvStatus::InvalidArgument,
            _ => PvStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

impl From<pseudovox::ParseError> for Failure {
    fn from(e: pseudovox::ParseError) -> Self {
        Failure(PvStatus::Parse, e.to_string())
    }
}

fn fail(status: PvStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PvStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PvStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PvStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(PvStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(PvStatus::NullPointer, format!("{what} is null")))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(PvStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PvStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(fail(
            PvStatus::BufferTooSmall,
            format!("output buffer holds {capacity} values, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(fail(PvStatus::NullPointer, "output buffer is null"));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

fn to_stats(s: &PvLogF0Stats) -> Result<LogF0Stats, Failure> {
    Ok(LogF0Stats::new(s.mean, s.std, s.voiced_frame_count)?)
}

fn from_stats(s: &LogF0Stats) -> PvLogF0Stats {
    PvLogF0Stats {
        mean: s.mean,
        std: s.std,
        voiced_frame_count: s.voiced_frame_count,
    }
}

fn contour(values: &[f64]) -> Result<F0Contour, Failure> {
    Ok(F0Contour::new("ffi", values.to_vec())?)
}

fn into_handle<T>(value: T, out: *mut *mut T) -> Result<(), Failure> {
    let out = unsafe { out_ref(out, "out handle")? };
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ---- errors, strings, version ----

/// Message of the last failed call on this thread, or null. Valid until the
/// next library call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn pv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- F0 ----

/// Log-F0 statistics over the voiced (> 0) frames of `values[0..n]`.
///
/// # Safety
/// `values` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_log_f0_stats(values: *const f64, n: usize, out: *mut PvLogF0Stats) -> PvStatus {
    guard(|| {
        let c = contour(slice(values, n, "values")?)?;
        let stats = pseudovox::compute_log_f0_stats(&c)?;
        *out_ref(out, "out")? = from_stats(&stats);
        Ok(())
    })
}

/// Maps the voiced frames of a contour from `source` to `target` log-F0
/// statistics; unvoiced frames stay 0. Writes `n` values to `out`.
///
/// # Safety
/// `values` and `out` must each hold `n` doubles; `source`/`target` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pv_transform_contour(
    values: *const f64,
    n: usize,
    source: *const PvLogF0Stats,
    target: *const PvLogF0Stats,
    out: *mut f64,
) -> PvStatus {
    guard(|| {
        let c = contour(slice(values, n, "values")?)?;
        let src = to_stats(handle(source, "source")?)?;
        let tgt = to_stats(handle(target, "target")?)?;
        let t = pseudovox::transform_contour(&c, &src, &tgt)?;
        copy_out(&t.values, out, n)
    })
}

/// Pseudo-speaker target statistics from `n` member statistics.
///
/// # Safety
/// `stats` must point to `n` valid records; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_aggregate_stats(stats: *const PvLogF0Stats, n: usize, out: *mut PvLogF0Stats) -> PvStatus {
    guard(|| {
        let members = slice(stats, n, "stats")?
            .iter()
            .map(to_stats)
            .collect::<Result<Vec<_>, _>>()?;
        let agg = pseudovox::aggregate_target_stats(&members)?;
        *out_ref(out, "out")? = from_stats(&agg);
        Ok(())
    })
}

// ---- PLDA ----

/// Parses a PLDA model file (text) into a new handle. Length normalization is on.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_parse(text: *const c_char, out: *mut *mut PvPlda) -> PvStatus {
    guard(|| {
        let model = io::parse_plda(cstr(text, "text")?)?;
        into_handle(PvPlda(model), out)
    })
}

/// # Safety
/// `plda` must be null or a handle from [`pv_plda_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_free(plda: *mut PvPlda) {
    free_handle(plda)
}

/// Embedding dimension of the model, 0 for a null handle.
///
/// # Safety
/// `plda` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_dim(plda: *const PvPlda) -> usize {
    plda.as_ref().map_or(0, |p| p.0.dim())
}

/// Switches length normalization before projection on or off.
///
/// # Safety
/// `plda` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_set_length_norm(plda: *mut PvPlda, on: bool) -> PvStatus {
    guard(|| {
        let p = out_ref(plda, "plda")?;
        p.0 = p.0.clone().with_length_norm(on);
        Ok(())
    })
}

/// Projects an embedding into the model's latent space (`dim` values written).
///
/// # Safety
/// `vector` and `out` must each hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_project(plda: *const PvPlda, vector: *const f64, dim: usize, out: *mut f64) -> PvStatus {
    guard(|| {
        let p = handle(plda, "plda")?;
        let latent = p.0.project_vector(slice(vector, dim, "vector")?)?;
        copy_out(&latent, out, dim)
    })
}

/// PLDA log-likelihood ratio between two projected vectors.
///
/// # Safety
/// `enroll` and `test` must each hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_plda_score(
    plda: *const PvPlda,
    enroll: *const f64,
    test: *const f64,
    dim: usize,
    out: *mut f64,
) -> PvStatus {
    guard(|| {
        let p = handle(plda, "plda")?;
        let s = p.0.score(slice(enroll, dim, "enroll")?, slice(test, dim, "test")?)?;
        *out_ref(out, "out")? = s;
        Ok(())
    })
}

/// Cosine similarity of two vectors.
///
/// # Safety
/// `a` and `b` must each hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_cosine(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> PvStatus {
    guard(|| {
        *out_ref(out, "out")? = cosine(slice(a, dim, "a")?, slice(b, dim, "b")?)?;
        Ok(())
    })
}

// ---- metrics ----

/// ROCCH-EER (fraction), Cllr and min-Cllr (bits) of a trial score set.
///
/// # Safety
/// `target`/`nontarget` must hold `n_target`/`n_nontarget` doubles.
#[no_mangle]
pub unsafe extern "C" fn pv_evaluate(
    target: *const f64,
    n_target: usize,
    nontarget: *const f64,
    n_nontarget: usize,
    out: *mut PvEvalReport,
) -> PvStatus {
    guard(|| {
        let set = TrialScoreSet::new(
            slice(target, n_target, "target")?.to_vec(),
            slice(nontarget, n_nontarget, "nontarget")?.to_vec(),
        );
        let r = evaluate(&set)?;
        *out_ref(out, "out")? = PvEvalReport {
            eer: r.eer,
            cllr_bits: r.cllr_bits,
            min_cllr_bits: r.min_cllr_bits,
            n_target: r.n_target,
            n_nontarget: r.n_nontarget,
        };
        Ok(())
    })
}

// ---- pseudo-speaker selection ----

/// Deterministic per-speaker sampling seed.
///
/// # Safety
/// `speaker_id` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_seed_for_speaker(global_seed: u64, speaker_id: *const c_char, out: *mut u64) -> PvStatus {
    guard(|| {
        *out_ref(out, "out")? = pseudo::seed_for_speaker(global_seed, cstr(speaker_id, "speaker_id")?);
        Ok(())
    })
}

/// Parses a pool file (text) into a new handle.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_pool_parse(text: *const c_char, out: *mut *mut PvPool) -> PvStatus {
    guard(|| {
        let speakers = io::parse_pool(cstr(text, "text")?)?;
        into_handle(PvPool(SpeakerPool::new(speakers)?), out)
    })
}

/// Attaches a copy of `plda` to the pool, enabling the PLDA scorer.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn pv_pool_attach_plda(pool: *mut PvPool, plda: *const PvPlda) -> PvStatus {
    guard(|| {
        let model = handle(plda, "plda")?.0.clone();
        let pool = out_ref(pool, "pool")?;
        pool.0 = pool.0.clone().with_plda(model)?;
        Ok(())
    })
}

/// Number of pool speakers, 0 for a null handle.
///
/// # Safety
/// `pool` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_pool_len(pool: *const PvPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `pool` must be null or a handle from [`pv_pool_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pv_pool_free(pool: *mut PvPool) {
    free_handle(pool)
}

/// Derives the pseudo-speaker for one source speaker.
///
/// # Safety
/// `speaker_id` must be NUL-terminated, `vector` must hold `dim` doubles,
/// `cfg` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pv_derive_pseudo_speaker(
    pool: *const PvPool,
    speaker_id: *const c_char,
    gender: PvGender,
    vector: *const f64,
    dim: usize,
    cfg: *const PvSelectionConfig,
    out: *mut *mut PvPseudoSpeaker,
) -> PvStatus {
    guard(|| {
        let pool = handle(pool, "pool")?;
        let c = handle(cfg, "cfg")?;
        let cfg = SelectionConfig {
            k_far: c.k_far,
            k_sel: c.k_sel,
            gender_policy: match c.gender_policy {
                PvGenderPolicy::Same => GenderPolicy::Same,
                PvGenderPolicy::Opposite => GenderPolicy::Opposite,
            },
            scorer: match c.scorer {
                PvScorer::Plda => Scorer::Plda,
                PvScorer::Cosine => Scorer::Cosine,
            },
            global_seed: c.global_seed,
        };
        let gender = match gender {
            PvGender::Male => Gender::Male,
            PvGender::Female => Gender::Female,
        };
        let source = SpeakerEmbedding::new(
            cstr(speaker_id, "speaker_id")?.to_string(),
            None,
            gender,
            slice(vector, dim, "vector")?.to_vec(),
        );
        let p = pseudo::derive_pseudo_speaker(&pool.0, &source, &cfg)?;
        into_handle(PvPseudoSpeaker(p), out)
    })
}

/// Dimension of the pseudo x-vector, 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_pseudo_dim(p: *const PvPseudoSpeaker) -> usize {
    p.as_ref().map_or(0, |p| p.0.xvector.len())
}

/// Copies the pseudo x-vector into `out` (capacity `cap` values).
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn pv_pseudo_xvector(p: *const PvPseudoSpeaker, out: *mut f64, cap: usize) -> PvStatus {
    guard(|| copy_out(&handle(p, "pseudo")?.0.xvector, out, cap))
}

/// Target F0 statistics and sampling seed of the pseudo-speaker.
///
/// # Safety
/// `stats` and `seed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_pseudo_info(p: *const PvPseudoSpeaker, stats: *mut PvLogF0Stats, seed: *mut u64) -> PvStatus {
    guard(|| {
        let p = &handle(p, "pseudo")?.0;
        *out_ref(stats, "stats")? = from_stats(&p.f0_stats);
        *out_ref(seed, "seed")? = p.seed_used;
        Ok(())
    })
}

/// Space-separated member ids in rank order; free with [`pv_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pv_pseudo_members(p: *const PvPseudoSpeaker, out: *mut *mut c_char) -> PvStatus {
    guard(|| {
        let joined = handle(p, "pseudo")?.0.member_ids.join(" ");
        let c = CString::new(joined).map_err(|_| fail(PvStatus::Other, "member id contains NUL"))?;
        *out_ref(out, "out")? = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`pv_derive_pseudo_speaker`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pv_pseudo_free(p: *mut PvPseudoSpeaker) {
    free_handle(p)
}
