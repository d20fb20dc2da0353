#ifndef ARCHETYPE_H
#define ARCHETYPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ArchStatus {
  ARCH_STATUS_OK = 0,
  ARCH_STATUS_NULL_POINTER = 1,
  ARCH_STATUS_INVALID_UTF8 = 2,
  ARCH_STATUS_INVALID_ARGUMENT = 3,
  ARCH_STATUS_IO = 4,
  ARCH_STATUS_PARSE = 5,
  ARCH_STATUS_DIM_MISMATCH = 6,
  ARCH_STATUS_PROVIDER = 7,
  ARCH_STATUS_BUFFER_TOO_SMALL = 8,
  ARCH_STATUS_EMPTY_INPUT = 9,
  ARCH_STATUS_PANIC = 10,
  ARCH_STATUS_OTHER = 11,
} ArchStatus;

/**
 * A built-in embedding provider.
 */
typedef struct ArchEmbedder ArchEmbedder;

/**
 * A fitted nearest-centroid model.
 */
typedef struct ArchModel ArchModel;

/**
 * Result of classifying one vector.
 *
 * `section_type` is the index of the assigned type in canonical order, or
 * -1 when the vector was rejected. `nearest` is always the index of the
 * closest centroid and `distance` the distance to it.
 */
typedef struct ArchLabel {
  int32_t section_type;
  int32_t nearest;
  double distance;
} ArchLabel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 *
 * The pointer stays valid until the next `arch_*` call on the same thread.
 */
const char *arch_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void arch_string_free(char *s);

/**
 * Number of section types.
 */
size_t arch_section_type_count(void);

/**
 * Static lowercase name of the type at `index`, or null when out of range.
 */
const char *arch_section_type_name(size_t index);

/**
 * Loads a model saved by `archetype fit`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArchStatus arch_model_load(const char *path, struct ArchModel **out);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArchStatus arch_model_from_json(const char *json, struct ArchModel **out);

/**
 * Embedding dimension the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t arch_model_dim(const struct ArchModel *model);

/**
 * Rejection weight of the model, or NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double arch_model_weight(const struct ArchModel *model);

/**
 * Classifies `len` components starting at `vector`.
 *
 * # Safety
 * `model` must be a live handle, `vector` must point to `len` doubles and
 * `out` must be a valid pointer.
 */
enum ArchStatus arch_model_classify(const struct ArchModel *model,
                                    const double *vector,
                                    size_t len,
                                    struct ArchLabel *out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void arch_model_free(struct ArchModel *model);

/**
 * Creates the seeded pseudorandom test provider.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ArchStatus arch_embedder_new_hash(size_t dim, uint64_t seed, struct ArchEmbedder **out);

/**
 * Creates the feature-hashed bag-of-words provider.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ArchStatus arch_embedder_new_lexical(size_t dim, struct ArchEmbedder **out);

/**
 * Output dimension of the provider, or 0 for a null handle.
 *
 * # Safety
 * `embedder` must be null or a live handle.
 */
size_t arch_embedder_dim(const struct ArchEmbedder *embedder);

/**
 * Embeds `text` into `out`, which must hold at least `capacity` doubles.
 *
 * Returns `BufferTooSmall` without writing when `capacity` is below the
 * provider dimension.
 *
 * # Safety
 * `embedder` must be a live handle, `text` a NUL-terminated string and
 * `out` must point to `capacity` writable doubles.
 */
enum ArchStatus arch_embedder_embed(const struct ArchEmbedder *embedder,
                                    const char *text,
                                    double *out,
                                    size_t capacity);

/**
 * Releases an embedder. Null is ignored.
 *
 * # Safety
 * `embedder` must be null or a handle not yet freed.
 */
void arch_embedder_free(struct ArchEmbedder *embedder);

/**
 * Normalizes a raw heading for vocabulary lookup.
 *
 * # Safety
 * `raw` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArchStatus arch_normalize_heading(const char *raw, char **out);

/**
 * Builds the truncated embedding input for a section.
 *
 * # Safety
 * `heading` and `body` must be NUL-terminated strings and `out` a valid
 * pointer.
 */
enum ArchStatus arch_build_input_text(const char *heading,
                                      const char *body,
                                      size_t max_tokens,
                                      char **out);

/**
 * Cache key (lowercase SHA-256 hex) of an embedding input.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArchStatus arch_content_key(const char *text, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARCHETYPE_H */
