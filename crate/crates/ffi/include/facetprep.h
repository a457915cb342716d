#ifndef FACETPREP_H
#define FACETPREP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum FpStatus {
  FP_OK = 0,
  FP_NULL_ARGUMENT = 1,
  FP_INVALID_UTF8 = 2,
  FP_INVALID_JSON = 3,
  FP_REJECTED = 4,
  FP_NOTHING_TO_UNDO = 5,
  FP_NOTHING_TO_REDO = 6,
  FP_SOURCE_ERROR = 7,
  FP_LOCKED = 8,
  FP_IO_ERROR = 9,
  FP_EXPORT_ERROR = 10,
  FP_PANIC = 11,
} FpStatus;

/**
 * An editing session, either in memory or bound to a project folder.
 */
typedef struct FpSession FpSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *fp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fp_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void fp_string_free(char *s);

/**
 * Creates an in-memory session from CSV (`tab == 0`) or TSV text.
 *
 * # Safety
 * `text_in` must be a NUL-terminated string; `out` must be writable.
 */
enum FpStatus fp_session_from_text(const char *text_in, int tab, struct FpSession **out);

/**
 * Opens a project folder for writing; mutations are persisted.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum FpStatus fp_session_open(const char *dir, struct FpSession **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library, freed once.
 */
void fp_session_free(struct FpSession *s);

/**
 * Applies one transformation given as `{"type":..,"params":..}` JSON. On
 * success `outcome_out` (if not NULL) receives the logged record.
 *
 * # Safety
 * `s` must be a live handle; `json` a NUL-terminated string.
 */
enum FpStatus fp_session_apply(struct FpSession *s, const char *json, char **outcome_out);

/**
 * # Safety
 * `s` must be a live handle.
 */
enum FpStatus fp_session_undo(struct FpSession *s);

/**
 * # Safety
 * `s` must be a live handle.
 */
enum FpStatus fp_session_redo(struct FpSession *s);

/**
 * # Safety
 * `s` must be a live handle; `out` writable.
 */
enum FpStatus fp_session_row_count(const struct FpSession *s, uintptr_t *out);

/**
 * Facet summaries in display order as a JSON array.
 *
 * # Safety
 * `s` must be a live handle; `out` writable.
 */
enum FpStatus fp_session_facets_json(const struct FpSession *s, char **out);

/**
 * Exports the current dataset as `ntriples`, `turtle`, `csv` or `tsv`.
 *
 * # Safety
 * `s` must be a live handle; `format` a NUL-terminated string.
 */
enum FpStatus fp_session_export(const struct FpSession *s, const char *format, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACETPREP_H */
