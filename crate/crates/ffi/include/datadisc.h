#ifndef DATADISC_H
#define DATADISC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DdBaseline {
  /**
   * Ask the model.
   */
  DD_BASELINE_NONE = 0,
  DD_BASELINE_JACCARD = 1,
  DD_BASELINE_LEVENSHTEIN = 2,
} DdBaseline;

typedef enum DdOntologyFormat {
  /**
   * One IRI per line, all classes.
   */
  DD_ONTOLOGY_FORMAT_LINE_DELIMITED = 0,
  /**
   * `C<TAB>iri` or `P<TAB>iri` per line.
   */
  DD_ONTOLOGY_FORMAT_TAB_SEPARATED = 1,
} DdOntologyFormat;

typedef enum DdStatus {
  DD_STATUS_OK = 0,
  DD_STATUS_NULL_ARGUMENT = 1,
  DD_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed input: CSV, ontology, transcript, options or an empty table.
   */
  DD_STATUS_INVALID_INPUT = 3,
  /**
   * The model never produced an answer that passed the checks.
   */
  DD_STATUS_TASK_FAILED = 4,
  DD_STATUS_BACKEND = 5,
  DD_STATUS_PANIC = 6,
} DdStatus;

typedef struct DdBackend DdBackend;

typedef struct DdOntology DdOntology;

typedef struct DdTable DdTable;

/**
 * Pipeline options; start from [`dd_options_default`].
 */
typedef struct DdOptions {
  uint32_t sample_rows;
  /**
   * 0 takes the first rows; anything else seeds random row sampling.
   */
  uint64_t seed;
  double temperature;
  uint32_t max_tokens;
  bool demonstration;
  bool metadata;
  bool prefix;
  bool anchoring;
  bool context_flow;
  uint32_t max_anchor_attempts;
} DdOptions;

typedef struct DdMetrics {
  double precision;
  double recall;
  double f1;
} DdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, statically allocated.
 */
const char *dd_version(void);

/**
 * Message for the calling thread's last failure, or NULL after a success.
 */
const char *dd_last_error(void);

/**
 * # Safety
 * `s` is NULL or a string returned by this library that has not been freed.
 */
void dd_string_free(char *s);

struct DdOptions dd_options_default(void);

/**
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum DdStatus dd_ontology_parse(const char *text,
                                enum DdOntologyFormat format,
                                struct DdOntology **out_ontology);

/**
 * # Safety
 * `ontology` is NULL or a live handle.
 */
void dd_ontology_free(struct DdOntology *ontology);

/**
 * Parses RFC-4180 text; with `has_headers` the first record is the header row.
 *
 * # Safety
 * `name` and `csv` are NUL-terminated strings; `out_table` is writable.
 */
enum DdStatus dd_table_from_csv(const char *name,
                                const char *csv,
                                bool has_headers,
                                struct DdTable **out_table);

/**
 * Number of columns, or 0 for NULL.
 *
 * # Safety
 * `table` is NULL or a live handle.
 */
uintptr_t dd_table_arity(const struct DdTable *table);

/**
 * # Safety
 * `table` is NULL or a live handle.
 */
void dd_table_free(struct DdTable *table);

/**
 * Backend replaying a JSON-lines transcript of `{"match"?, "response"}` entries.
 *
 * # Safety
 * `transcript` is a NUL-terminated string; `out_backend` is writable.
 */
enum DdStatus dd_backend_scripted(const char *transcript, struct DdBackend **out_backend);

/**
 * Chat-completions backend. Model and credential come from the environment;
 * `endpoint` may be NULL for the default.
 *
 * # Safety
 * `endpoint` is NULL or a NUL-terminated string; `out_backend` is writable.
 */
enum DdStatus dd_backend_http(const char *endpoint, struct DdBackend **out_backend);

/**
 * # Safety
 * `backend` is NULL or a live handle.
 */
void dd_backend_free(struct DdBackend *backend);

/**
 * Assembled table-class prompt. `allowed_classes` is NULL or a newline-separated list.
 *
 * # Safety
 * Pointers are NULL where allowed or valid; `out_prompt` is writable.
 */
enum DdStatus dd_prompt_table_class(const struct DdTable *table,
                                    const char *allowed_classes,
                                    const struct DdOptions *options,
                                    char **out_prompt);

/**
 * # Safety
 * Pointers are NULL where allowed or valid; `out_prompt` is writable.
 */
enum DdStatus dd_prompt_column_type(const struct DdTable *table,
                                    const struct DdOptions *options,
                                    char **out_prompt);

/**
 * # Safety
 * Pointers are NULL where allowed or valid; `out_prompt` is writable.
 */
enum DdStatus dd_prompt_join(const struct DdTable *left,
                             const struct DdTable *right,
                             const char *context_notes,
                             const struct DdOptions *options,
                             char **out_prompt);

/**
 * Table-class detection. Writes the class IRI, whether anchoring intervened and the
 * number of answers considered. `out_anchored` and `out_attempts` may be NULL.
 *
 * # Safety
 * Handles are live; `allowed_classes` and `options` may be NULL; `out_iri` is writable.
 */
enum DdStatus dd_classify_table(const struct DdTable *table,
                                const struct DdOntology *ontology,
                                const struct DdBackend *backend,
                                const char *allowed_classes,
                                const struct DdOptions *options,
                                char **out_iri,
                                bool *out_anchored,
                                uint32_t *out_attempts);

/**
 * Column-type annotation. Writes one `index<TAB>label` line per column, with labels
 * in `dbo:` form or `Unknown`.
 *
 * # Safety
 * Handles are live; `options` may be NULL; `out_tsv` is writable.
 */
enum DdStatus dd_annotate_columns(const struct DdTable *table,
                                  const struct DdOntology *ontology,
                                  const struct DdBackend *backend,
                                  const struct DdOptions *options,
                                  char **out_tsv);

/**
 * Join-column prediction, written as `left_cols<TAB>right_cols` with comma-joined
 * names. With a baseline, `backend` may be NULL.
 *
 * # Safety
 * Handles are live where required; `context_notes` and `options` may be NULL;
 * `out_join` is writable.
 */
enum DdStatus dd_predict_join(const struct DdTable *left,
                              const struct DdTable *right,
                              const struct DdBackend *backend,
                              enum DdBaseline baseline,
                              const char *context_notes,
                              const struct DdOptions *options,
                              char **out_join);

/**
 * Character-level Levenshtein distance.
 *
 * # Safety
 * `a` and `b` are NUL-terminated strings; `out_distance` is writable.
 */
enum DdStatus dd_edit_distance(const char *a, const char *b, uintptr_t *out_distance);

/**
 * Support-weighted precision, recall and F1 of `n` predictions against `n` gold labels.
 *
 * # Safety
 * `predictions` and `golds` point to `n` NUL-terminated strings each; `out_metrics`
 * is writable.
 */
enum DdStatus dd_weighted_metrics(const char *const *predictions,
                                  const char *const *golds,
                                  uintptr_t n,
                                  struct DdMetrics *out_metrics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATADISC_H */
