//! Pseudo-speaker selection, F0 renormalization and linkability evaluation
//! for x-vector based speech pseudonymization.
//!
//! The crate covers the decision and evaluation core of the pipeline; feature
//! extraction and waveform synthesis happen elsewhere and enter as text files
//! (see [`io`]).

pub mod cli;
pub mod error;
pub mod f0;
pub mod io;
pub mod metrics;
pub mod plda;
pub mod pseudo;
pub mod sim;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use f0::{aggregate_target_stats, compute_log_f0_stats, transform_contour, F0Contour, LogF0Stats};
pub use metrics::{cllr, det_points, eer, evaluate, min_cllr, DetPoint, EvalReport, TrialScoreSet};
pub use plda::{cosine_score, plda_score, Gender, PldaModel, SpeakerEmbedding};
pub use pseudo::{
    derive_pseudo_speaker, filter_by_gender, rank_furthest, seed_for_speaker, GenderPolicy,
    PoolSpeaker, PseudoSpeaker, Scorer, SelectionConfig, SpeakerPool,
};
pub use sim::{
    generate_cohort, run_scenario, AttackModel, Attacker, Cohort, CohortSpec, F0Mode,
    ScenarioConfig,
};
