#ifndef BIASPROP_H
#define BIASPROP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpSmoothing {
  BP_SMOOTHING_LAPLACE = 0,
  BP_SMOOTHING_ADD_LAMBDA = 1,
  BP_SMOOTHING_KNESER_NEY = 2,
} BpSmoothing;

typedef enum BpStatus {
  BP_STATUS_OK = 0,
  BP_STATUS_NULL_ARGUMENT = 1,
  BP_STATUS_INVALID_UTF8 = 2,
  BP_STATUS_IO = 3,
  BP_STATUS_INVALID_ARGUMENT = 4,
  BP_STATUS_FORMAT = 5,
  BP_STATUS_FAILED = 6,
  BP_STATUS_PANIC = 7,
} BpStatus;

// Sentences loaded from a file.
typedef struct BpCorpus BpCorpus;

// Trained n-gram counts.
typedef struct BpNgram BpNgram;

// Minimal pairs.
typedef struct BpPairs BpPairs;

// Transformer checkpoint together with its tokenizer.
typedef struct BpTransformer BpTransformer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (always
// NUL-terminated when `len > 0`) and returns the full message length in
// bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t bp_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *bp_version(void);

// # Safety
// `path` and `label` must be NUL-terminated strings; `out` must be writable.
enum BpStatus bp_corpus_load(const char *path, const char *label, struct BpCorpus **out);

// Number of sentences; 0 for a null handle.
//
// # Safety
// `c` must be null or a live handle.
size_t bp_corpus_len(const struct BpCorpus *c);

// # Safety
// `c` must be null or a handle not yet freed.
void bp_corpus_free(struct BpCorpus *c);

// # Safety
// `corpus` must be a live handle; `out` must be writable.
enum BpStatus bp_ngram_train(const struct BpCorpus *corpus, size_t n, struct BpNgram **out);

// Reads a model saved by `biasprop train-ngram` (`.bin` is binary).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum BpStatus bp_ngram_load(const char *path, struct BpNgram **out);

// # Safety
// `m` must be a live handle; `path` a NUL-terminated string.
enum BpStatus bp_ngram_save(const struct BpNgram *m, const char *path);

// Natural-log likelihood of a whitespace-tokenized sentence.
//
// # Safety
// `m` must be a live handle; `sentence` a NUL-terminated string; `out`
// writable.
enum BpStatus bp_ngram_logprob(const struct BpNgram *m,
                               int32_t kind,
                               double lambda,
                               const char *sentence,
                               double *out);

// # Safety
// `m` must be null or a handle not yet freed.
void bp_ngram_free(struct BpNgram *m);

// Loads a checkpoint and the tokenizer it was trained with.
//
// # Safety
// Both paths must be NUL-terminated strings; `out` must be writable.
enum BpStatus bp_transformer_load(const char *checkpoint,
                                  const char *tokenizer,
                                  struct BpTransformer **out);

// Natural-log likelihood of a sentence under the transformer.
//
// # Safety
// `t` must be a live handle; `sentence` a NUL-terminated string; `out`
// writable.
enum BpStatus bp_transformer_logprob(const struct BpTransformer *t,
                                     const char *sentence,
                                     double *out);

// # Safety
// `t` must be null or a handle not yet freed.
void bp_transformer_free(struct BpTransformer *t);

// Reads a CrowS-Pairs-format CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum BpStatus bp_pairs_load(const char *path, struct BpPairs **out);

// # Safety
// `p` must be null or a live handle.
size_t bp_pairs_len(const struct BpPairs *p);

// # Safety
// `p` must be null or a handle not yet freed.
void bp_pairs_free(struct BpPairs *p);

// Overall bias score of an n-gram model on `pairs`.
//
// # Safety
// `m` and `pairs` must be live handles; `out` writable.
enum BpStatus bp_bias_score_ngram(const struct BpNgram *m,
                                  int32_t kind,
                                  double lambda,
                                  const struct BpPairs *pairs,
                                  double *out);

// Overall bias score of a transformer on `pairs`.
//
// # Safety
// `t` and `pairs` must be live handles; `out` writable.
enum BpStatus bp_bias_score_transformer(const struct BpTransformer *t,
                                        const struct BpPairs *pairs,
                                        double *out);

// Projects `z[0..n]` onto the probability simplex, writing `out[0..n]`.
//
// # Safety
// `z` and `out` must each point to `n` doubles.
enum BpStatus bp_sparsemax(const double *z, size_t n, double *out);

// Parameter count of the larger preset at the given vocabulary size.
//
// # Safety
// `out` must be writable.
enum BpStatus bp_large_preset_params(size_t vocab_size, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIASPROP_H */
