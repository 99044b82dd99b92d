#ifndef PSEUDOVOX_H
#define PSEUDOVOX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PvStatus {
  PV_STATUS_OK = 0,
  PV_STATUS_NULL_POINTER = 1,
  PV_STATUS_INVALID_ARGUMENT = 2,
  PV_STATUS_PARSE = 3,
  PV_STATUS_DIMENSION_MISMATCH = 4,
  PV_STATUS_NO_VOICED_FRAMES = 5,
  PV_STATUS_DEGENERATE_SOURCE_STATS = 6,
  PV_STATUS_EMPTY_INPUT = 7,
  PV_STATUS_POOL_TOO_SMALL = 8,
  PV_STATUS_MISSING_PLDA_MODEL = 9,
  PV_STATUS_BUFFER_TOO_SMALL = 10,
  PV_STATUS_PANIC = 11,
  PV_STATUS_OTHER = 12,
} PvStatus;

typedef enum PvGender {
  PV_GENDER_MALE = 0,
  PV_GENDER_FEMALE = 1,
} PvGender;

typedef enum PvGenderPolicy {
  PV_GENDER_POLICY_SAME = 0,
  PV_GENDER_POLICY_OPPOSITE = 1,
} PvGenderPolicy;

typedef enum PvScorer {
  PV_SCORER_PLDA = 0,
  PV_SCORER_COSINE = 1,
} PvScorer;

/**
 * Opaque PLDA model.
 */
typedef struct PvPlda PvPlda;

/**
 * Opaque speaker pool (optionally carrying a PLDA model).
 */
typedef struct PvPool PvPool;

/**
 * Opaque derived pseudo-speaker.
 */
typedef struct PvPseudoSpeaker PvPseudoSpeaker;

typedef struct PvLogF0Stats {
  double mean;
  double std;
  uint64_t voiced_frame_count;
} PvLogF0Stats;

typedef struct PvEvalReport {
  double eer;
  double cllr_bits;
  double min_cllr_bits;
  size_t n_target;
  size_t n_nontarget;
} PvEvalReport;

typedef struct PvSelectionConfig {
  size_t k_far;
  size_t k_sel;
  enum PvGenderPolicy gender_policy;
  enum PvScorer scorer;
  uint64_t global_seed;
} PvSelectionConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next library call on the same thread; do not free.
 */
const char *pv_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pv_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pv_version(void);

/**
 * Log-F0 statistics over the voiced (> 0) frames of `values[0..n]`.
 *
 * # Safety
 * `values` must point to `n` readable doubles; `out` must be writable.
 */
enum PvStatus pv_log_f0_stats(const double *values, size_t n, struct PvLogF0Stats *out);

/**
 * Maps the voiced frames of a contour from `source` to `target` log-F0
 * statistics; unvoiced frames stay 0. Writes `n` values to `out`.
 *
 * # Safety
 * `values` and `out` must each hold `n` doubles; `source`/`target` must be valid.
 */
enum PvStatus pv_transform_contour(const double *values,
                                   size_t n,
                                   const struct PvLogF0Stats *source,
                                   const struct PvLogF0Stats *target,
                                   double *out);

/**
 * Pseudo-speaker target statistics from `n` member statistics.
 *
 * # Safety
 * `stats` must point to `n` valid records; `out` must be writable.
 */
enum PvStatus pv_aggregate_stats(const struct PvLogF0Stats *stats,
                                 size_t n,
                                 struct PvLogF0Stats *out);

/**
 * Parses a PLDA model file (text) into a new handle. Length normalization is on.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum PvStatus pv_plda_parse(const char *text, struct PvPlda **out);

/**
 * # Safety
 * `plda` must be null or a handle from [`pv_plda_parse`] not yet freed.
 */
void pv_plda_free(struct PvPlda *plda);

/**
 * Embedding dimension of the model, 0 for a null handle.
 *
 * # Safety
 * `plda` must be null or a live handle.
 */
size_t pv_plda_dim(const struct PvPlda *plda);

/**
 * Switches length normalization before projection on or off.
 *
 * # Safety
 * `plda` must be a live handle.
 */
enum PvStatus pv_plda_set_length_norm(struct PvPlda *plda, bool on);

/**
 * Projects an embedding into the model's latent space (`dim` values written).
 *
 * # Safety
 * `vector` and `out` must each hold `dim` doubles.
 */
enum PvStatus pv_plda_project(const struct PvPlda *plda,
                              const double *vector,
                              size_t dim,
                              double *out);

/**
 * PLDA log-likelihood ratio between two projected vectors.
 *
 * # Safety
 * `enroll` and `test` must each hold `dim` doubles; `out` must be writable.
 */
enum PvStatus pv_plda_score(const struct PvPlda *plda,
                            const double *enroll,
                            const double *test,
                            size_t dim,
                            double *out);

/**
 * Cosine similarity of two vectors.
 *
 * # Safety
 * `a` and `b` must each hold `dim` doubles; `out` must be writable.
 */
enum PvStatus pv_cosine(const double *a, const double *b, size_t dim, double *out);

/**
 * ROCCH-EER (fraction), Cllr and min-Cllr (bits) of a trial score set.
 *
 * # Safety
 * `target`/`nontarget` must hold `n_target`/`n_nontarget` doubles.
 */
enum PvStatus pv_evaluate(const double *target,
                          size_t n_target,
                          const double *nontarget,
                          size_t n_nontarget,
                          struct PvEvalReport *out);

/**
 * Deterministic per-speaker sampling seed.
 *
 * # Safety
 * `speaker_id` must be NUL-terminated; `out` must be writable.
 */
enum PvStatus pv_seed_for_speaker(uint64_t global_seed, const char *speaker_id, uint64_t *out);

/**
 * Parses a pool file (text) into a new handle.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum PvStatus pv_pool_parse(const char *text, struct PvPool **out);

/**
 * Attaches a copy of `plda` to the pool, enabling the PLDA scorer.
 *
 * # Safety
 * Both handles must be live.
 */
enum PvStatus pv_pool_attach_plda(struct PvPool *pool, const struct PvPlda *plda);

/**
 * Number of pool speakers, 0 for a null handle.
 *
 * # Safety
 * `pool` must be null or a live handle.
 */
size_t pv_pool_len(const struct PvPool *pool);

/**
 * # Safety
 * `pool` must be null or a handle from [`pv_pool_parse`] not yet freed.
 */
void pv_pool_free(struct PvPool *pool);

/**
 * Derives the pseudo-speaker for one source speaker.
 *
 * # Safety
 * `speaker_id` must be NUL-terminated, `vector` must hold `dim` doubles,
 * `cfg` must be valid and `out` writable.
 */
enum PvStatus pv_derive_pseudo_speaker(const struct PvPool *pool,
                                       const char *speaker_id,
                                       enum PvGender gender,
                                       const double *vector,
                                       size_t dim,
                                       const struct PvSelectionConfig *cfg,
                                       struct PvPseudoSpeaker **out);

/**
 * Dimension of the pseudo x-vector, 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t pv_pseudo_dim(const struct PvPseudoSpeaker *p);

/**
 * Copies the pseudo x-vector into `out` (capacity `cap` values).
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum PvStatus pv_pseudo_xvector(const struct PvPseudoSpeaker *p, double *out, size_t cap);

/**
 * Target F0 statistics and sampling seed of the pseudo-speaker.
 *
 * # Safety
 * `stats` and `seed` must be writable.
 */
enum PvStatus pv_pseudo_info(const struct PvPseudoSpeaker *p,
                             struct PvLogF0Stats *stats,
                             uint64_t *seed);

/**
 * Space-separated member ids in rank order; free with [`pv_string_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum PvStatus pv_pseudo_members(const struct PvPseudoSpeaker *p, char **out);

/**
 * # Safety
 * `p` must be null or a handle from [`pv_derive_pseudo_speaker`] not yet freed.
 */
void pv_pseudo_free(struct PvPseudoSpeaker *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSEUDOVOX_H */
