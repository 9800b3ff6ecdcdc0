#ifndef DSRE_H
#define DSRE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsreStatus {
  DSRE_STATUS_OK = 0,
  DSRE_STATUS_NULL_POINTER = 1,
  DSRE_STATUS_INVALID_UTF8 = 2,
  DSRE_STATUS_IO = 3,
  DSRE_STATUS_PARSE = 4,
  DSRE_STATUS_CHECKPOINT = 5,
  DSRE_STATUS_INVALID_ARGUMENT = 6,
  DSRE_STATUS_OUT_OF_RANGE = 7,
  DSRE_STATUS_PANIC = 8,
} DsreStatus;

/**
 * Bags read from a JSON-lines corpus.
 */
typedef struct DsreCorpus DsreCorpus;

/**
 * Static word vectors, one per line: `word v1 v2 ...`.
 */
typedef struct DsreEmbeddings DsreEmbeddings;

/**
 * A trained model loaded from a checkpoint.
 */
typedef struct DsreModel DsreModel;

/**
 * Scores for every (entity pair, non-NA relation), sorted by pair then relation.
 */
typedef struct DsrePredictions DsrePredictions;

/**
 * One scored (entity pair, relation). Borrowed from its [`DsrePredictions`].
 */
typedef struct DsrePrediction {
  const char *e1;
  const char *e2;
  const char *relation;
  double score;
} DsrePrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *dsre_last_error(void);

/**
 * Library version as a static string.
 */
const char *dsre_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DsreStatus dsre_model_load(const char *path, struct DsreModel **out);

/**
 * # Safety
 * `model` must come from [`dsre_model_load`] or be null.
 */
void dsre_model_free(struct DsreModel *model);

/**
 * Number of relations in the model's schema, NA included (index 0).
 *
 * # Safety
 * `model` must be a live handle or null (which yields 0).
 */
size_t dsre_model_num_relations(const struct DsreModel *model);

/**
 * Name of relation `index`, or null when out of range.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
const char *dsre_model_relation_name(const struct DsreModel *model, size_t index);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DsreStatus dsre_embeddings_load(const char *path, struct DsreEmbeddings **out);

/**
 * # Safety
 * `embeddings` must come from [`dsre_embeddings_load`] or be null.
 */
void dsre_embeddings_free(struct DsreEmbeddings *embeddings);

/**
 * Loads a corpus without truncating bags; scoring cuts oversized bags.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DsreStatus dsre_corpus_load(const char *path, struct DsreCorpus **out);

/**
 * # Safety
 * `corpus` must come from [`dsre_corpus_load`] or be null.
 */
void dsre_corpus_free(struct DsreCorpus *corpus);

/**
 * # Safety
 * `corpus` must be a live handle or null (which yields 0).
 */
size_t dsre_corpus_num_bags(const struct DsreCorpus *corpus);

/**
 * Scores every bag of `corpus`. `threads == 0` uses every core; the
 * result is identical for any thread count.
 *
 * # Safety
 * All handles must be live; `out` must be writable.
 */
enum DsreStatus dsre_score_corpus(const struct DsreModel *model,
                                  const struct DsreCorpus *corpus,
                                  const struct DsreEmbeddings *embeddings,
                                  uint32_t threads,
                                  struct DsrePredictions **out);

/**
 * # Safety
 * `predictions` must come from [`dsre_score_corpus`] or be null.
 */
void dsre_predictions_free(struct DsrePredictions *predictions);

/**
 * # Safety
 * `predictions` must be a live handle or null (which yields 0).
 */
size_t dsre_predictions_len(const struct DsrePredictions *predictions);

/**
 * # Safety
 * `predictions` must be a live handle; `out` must be writable.
 */
enum DsreStatus dsre_predictions_get(const struct DsrePredictions *predictions,
                                     size_t index,
                                     struct DsrePrediction *out);

/**
 * Area under the precision/recall curve of `predictions` against gold
 * facts. `gold_path` names an `e1<TAB>e2<TAB>relation` file; when it is
 * null the labels of `corpus` are the gold set.
 *
 * # Safety
 * `predictions` must be live; `corpus` must be live when `gold_path` is
 * null; `auc_out` must be writable.
 */
enum DsreStatus dsre_auc_pr(const struct DsrePredictions *predictions,
                            const char *gold_path,
                            const struct DsreCorpus *corpus,
                            double *auc_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSRE_H */
