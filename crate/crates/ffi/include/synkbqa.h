#ifndef SYNKBQA_H
#define SYNKBQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SynkbqaStatus {
  SYNKBQA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SYNKBQA_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not UTF-8.
   */
  SYNKBQA_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be read.
   */
  SYNKBQA_STATUS_IO = 3,
  /**
   * Malformed input text or file contents.
   */
  SYNKBQA_STATUS_PARSE = 4,
  /**
   * Input was well formed but unusable (bad index, shape, mismatch).
   */
  SYNKBQA_STATUS_INVALID = 5,
  /**
   * The question produced no candidate graph; the output is still set.
   */
  SYNKBQA_STATUS_NO_CANDIDATES = 6,
  /**
   * Non-finite numbers or a caught panic.
   */
  SYNKBQA_STATUS_INTERNAL = 7,
} SynkbqaStatus;

/**
 * Loaded model, triple store and word vectors.
 */
typedef struct SynkbqaEngine SynkbqaEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *synkbqa_last_error(void);

/**
 * Library version as a static string.
 */
const char *synkbqa_version(void);

/**
 * Loads a checkpoint (with its manifest beside it), a triples file and a
 * word-vector file. On success `*out` owns a new engine.
 *
 * # Safety
 * Path arguments are NUL-terminated strings; `out` is a valid pointer.
 */
enum SynkbqaStatus synkbqa_engine_open(const char *checkpoint,
                                       const char *triples,
                                       const char *word_vectors,
                                       struct SynkbqaEngine **out);

/**
 * # Safety
 * `engine` is null or came from [`synkbqa_engine_open`] and is not used
 * afterwards.
 */
void synkbqa_engine_free(struct SynkbqaEngine *engine);

/**
 * Answers `question` (whitespace-tokenized) using its dependency parse in
 * CoNLL-U form. `*out` receives the sorted answers, one per line, or an
 * empty string with status `NO_CANDIDATES`.
 *
 * # Safety
 * `engine` came from [`synkbqa_engine_open`]; strings are NUL-terminated;
 * `out` is a valid pointer.
 */
enum SynkbqaStatus synkbqa_engine_answer(const struct SynkbqaEngine *engine,
                                         const char *question,
                                         const char *conllu,
                                         char **out);

/**
 * Shortest dependency path between 1-based tokens `from` and `to` of a
 * single CoNLL-U sentence, rendered as `a -label-> b -label-> c`.
 *
 * # Safety
 * `conllu` is NUL-terminated; `out` is a valid pointer.
 */
enum SynkbqaStatus synkbqa_sdp(const char *conllu, size_t from, size_t to, char **out);

/**
 * `max(0, margin - pos + neg)`.
 */
double synkbqa_hinge_loss(double pos, double neg, double margin);

/**
 * # Safety
 * `s` is null or a string returned by this library, not freed before.
 */
void synkbqa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNKBQA_H */
