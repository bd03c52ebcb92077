#ifndef ERALOC_H
#define ERALOC_H

/* C interface to the eraloc library. Every call returns an eraloc_status;
 * on failure eraloc_last_error() describes the problem for the calling
 * thread. Strings returned through char** are owned by the caller and
 * released with eraloc_string_free. Option arguments are JSON objects
 * (NULL or "" means all defaults). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ERALOC_API __declspec(dllexport)
#else
#define ERALOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eraloc_status {
  ERALOC_OK = 0,
  ERALOC_INVALID_INPUT = 1,
  ERALOC_INSUFFICIENT_DATA = 2,
  ERALOC_INVALID_DIMENSION = 3,
  ERALOC_DEGENERATE_SPECTRUM = 4,
  ERALOC_DEGENERATE_DATA = 5,
  ERALOC_MISSING_LABELS = 6,
  ERALOC_MISSING_MODEL = 7,
  ERALOC_SCHEMA_ERROR = 8,
  ERALOC_CORRUPT_STORE = 9,
  ERALOC_UNSUPPORTED_VERSION = 10,
  ERALOC_FEEDBACK_SIZE = 11,
  ERALOC_NOT_READY = 12,
  ERALOC_ADAPTATION_FAILED = 13,
  ERALOC_INVALID_EIGENVALUES = 14,
  ERALOC_IO_ERROR = 15,
  ERALOC_INTERNAL = 16,
  ERALOC_INVALID_OPTIONS = 17 /* malformed option JSON or null handle */
} eraloc_status;

typedef struct eraloc_features eraloc_features;
typedef struct eraloc_model eraloc_model;
typedef struct eraloc_index eraloc_index;
typedef struct eraloc_service eraloc_service;

ERALOC_API const char* eraloc_version(void);
ERALOC_API const char* eraloc_last_error(void);
ERALOC_API const char* eraloc_status_name(eraloc_status s);
ERALOC_API void eraloc_string_free(char* s);

/* ---- feature stores ---- */
ERALOC_API eraloc_status eraloc_features_load(const char* path, eraloc_features** out);
ERALOC_API eraloc_status eraloc_features_save(const eraloc_features* f, const char* path);
/* row-major n x dim doubles; ids may be NULL ("s<row>" or "t<row>"), labels may be NULL */
ERALOC_API eraloc_status eraloc_features_create(const double* rows, size_t n, size_t dim, const char* const* ids,
                                                const char* const* labels, int target_domain, eraloc_features** out);
ERALOC_API eraloc_status eraloc_features_merge_distractors(const eraloc_features* relevant,
                                                           const eraloc_features* distractors, eraloc_features** out);
/* {"n", "dim", "scheme", "domain", "labeled", "distractors"} */
ERALOC_API eraloc_status eraloc_features_info(const eraloc_features* f, char** json_out);
ERALOC_API void eraloc_features_free(eraloc_features* f);

/* ---- models (codebook, gmm, sa, gfk, subspace) ---- */
ERALOC_API eraloc_status eraloc_model_load(const char* path, eraloc_model** out);
ERALOC_API eraloc_status eraloc_model_save(const eraloc_model* m, const char* path);
/* {"kind", "fingerprint", ...kind-specific sizes} */
ERALOC_API eraloc_status eraloc_model_info(const eraloc_model* m, char** json_out);
ERALOC_API void eraloc_model_free(eraloc_model* m);

/* ---- pipeline ---- */
/* {"k", "mode": "exact"|"approximate", "seed", "max_iter", "sample", "trees", "checks"} */
ERALOC_API eraloc_status eraloc_train_codebook(const eraloc_features* descriptors, const char* options,
                                               eraloc_model** out);
/* {"k", "seed", "max_iter", "sample"} */
ERALOC_API eraloc_status eraloc_train_gmm(const eraloc_features* descriptors, const char* options, eraloc_model** out);
/* Descriptor rows named "<image>#<i>" are grouped per image and encoded with a
 * codebook (BOW, {"tfidf": bool, "checks": int}) or a GMM (Fisher vector).
 * Labels, distractor flags and domain come from each image's first row. */
ERALOC_API eraloc_status eraloc_encode(const eraloc_features* descriptors, const eraloc_model* model,
                                       const char* options, eraloc_features** out);
/* {"d"} or {"energy"} */
ERALOC_API eraloc_status eraloc_fit_subspace(const eraloc_features* data, const char* options, eraloc_model** out);
/* {"method": "mle"|"gmst"|"cdm"|"eig", "k_min", "k_max", "energy", "seed"} -> {"value", "rounded", "method"} */
ERALOC_API eraloc_status eraloc_estimate_dim(const eraloc_features* data, const char* options, char** json_out);
/* {"method": "sa"|"esa"|"gfk", "d_source", "d_target", "d_max", "seed"} */
ERALOC_API eraloc_status eraloc_learn_alignment(const eraloc_features* source, const eraloc_features* target,
                                                const char* options, eraloc_model** out);
/* model may be NULL for the euclidean metric. {"metric", "direction"} ->
 * {"predictions": [...], "accuracy": percent|null} */
ERALOC_API eraloc_status eraloc_classify(const eraloc_features* train, const eraloc_features* test,
                                         const eraloc_model* model, const char* options, char** json_out);
/* {"samples_per_class", "repetitions", "seed", "metric", "direction", "method",
 *  "d_source", "d_target"} -> protocol result */
ERALOC_API eraloc_status eraloc_evaluate(const eraloc_features* source, const eraloc_features* target,
                                         const char* options, char** json_out);
/* {"schedule_length", "top_k", "repetitions", "seed", "noise", "relearn_every",
 *  "min_dim_images"} -> session report with curve */
ERALOC_API eraloc_status eraloc_simulate_session(const eraloc_features* archive, const eraloc_features* queries,
                                                 const char* options, char** json_out);
/* {"classification": [rows], "retrieval": [rows], "curve": [points]} or a
 * simulate_session report -> {"<file name>": "<csv text>", ...} */
ERALOC_API eraloc_status eraloc_report(const char* results_json, char** text_out);

/* ---- retrieval index ---- */
ERALOC_API eraloc_status eraloc_index_build(const eraloc_features* archive, eraloc_index** out);
/* Adapted-mode copy using an SA model; whitening uses the target eigenvalues. */
ERALOC_API eraloc_status eraloc_index_adapt(const eraloc_index* index, const eraloc_model* sa_model, eraloc_index** out);
/* {"k"} -> [{"query", "results": [{"rank", "id", "score"}]}] */
ERALOC_API eraloc_status eraloc_index_query(const eraloc_index* index, const eraloc_features* queries,
                                            const char* options, char** json_out);
/* {"size", "dim", "mode", "bytes"} */
ERALOC_API eraloc_status eraloc_index_info(const eraloc_index* index, char** json_out);
ERALOC_API void eraloc_index_free(eraloc_index* index);

/* ---- service ---- */
/* {"archive", "queries", "manifest", "thumb_root", "gmm", "state_dir",
 *  "relearn_every", "min_dim_images", "max_k"} */
ERALOC_API eraloc_status eraloc_service_create(const char* options, eraloc_service** out);
/* port 0 picks a free port; returns once listening */
ERALOC_API eraloc_status eraloc_service_start(eraloc_service* s, const char* host, int port, int* bound_port);
ERALOC_API eraloc_status eraloc_service_wait(eraloc_service* s);
ERALOC_API eraloc_status eraloc_service_stop(eraloc_service* s);
ERALOC_API void eraloc_service_free(eraloc_service* s);

#ifdef __cplusplus
}
#endif

#endif
