#ifndef GEOSMOOTH_H
#define GEOSMOOTH_H

/* Generated by cbindgen from geosmooth-ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a geosmooth call.
 */
typedef enum GsStatus {
  /**
   * The call succeeded.
   */
  GS_STATUS_OK = 0,
  /**
   * An internal failure: geometry, numerics, I/O, or a caught panic.
   */
  GS_STATUS_ERROR = 1,
  /**
   * A solve that the driver requires to converge did not.
   */
  GS_STATUS_NON_CONVERGENCE = 2,
  /**
   * The case file or its parameters are invalid.
   */
  GS_STATUS_CONFIG_ERROR = 3,
  /**
   * A pointer argument was null or not valid UTF-8.
   */
  GS_STATUS_INVALID_ARGUMENT = 4,
} GsStatus;

/**
 * Opaque handle to a parsed analysis case. Create with one of the
 * `gs_case_*` constructors, release with [`gs_case_free`].
 */
typedef struct GsCase GsCase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message for the most recent failure on this thread, or an
 * empty string when the last call succeeded. The pointer stays valid
 * until the next geosmooth call on the same thread; copy the string if
 * it must outlive that.
 */
const char *gs_last_error(void);

/**
 * Parses the case file at `path` into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer; `*out` is set to null before parsing and owns the new handle
 * on success.
 */
enum GsStatus gs_case_open(const char *path, struct GsCase **out);

/**
 * Parses case text held in memory into a new handle stored in `*out`.
 *
 * # Safety
 * Same contract as [`gs_case_open`], with `text` holding the complete
 * case file contents.
 */
enum GsStatus gs_case_from_str(const char *text, struct GsCase **out);

/**
 * Loads one of the shipped benchmark cases (`cylinder`, `biaxial`,
 * `footing`, `tunnel`, `slope`) into a new handle stored in `*out`.
 *
 * # Safety
 * Same contract as [`gs_case_open`].
 */
enum GsStatus gs_case_builtin(const char *name, struct GsCase **out);

/**
 * Redirects the case's output files to `directory`, creating it on the
 * next run if necessary.
 *
 * # Safety
 * `case` must be a live handle from a `gs_case_*` constructor and
 * `directory` a valid NUL-terminated string.
 */
enum GsStatus gs_case_set_output_dir(struct GsCase *case_, const char *directory);

/**
 * Runs the case's driver to completion, writing its output files. Maps a
 * schedule that fails to converge to `GS_STATUS_NON_CONVERGENCE` with
 * the driver's summary in the error slot.
 *
 * # Safety
 * `case` must be a live handle from a `gs_case_*` constructor.
 */
enum GsStatus gs_run(const struct GsCase *case_);

/**
 * Runs the built-in self-check battery. Returns `GS_STATUS_OK` when all
 * checks pass; otherwise the failing check names are in the error slot.
 */
enum GsStatus gs_verify(void);

/**
 * Releases a handle. Passing null is a no-op; passing a handle twice is
 * undefined behaviour, as in `free`.
 *
 * # Safety
 * `case` must be null or a live handle from a `gs_case_*` constructor.
 */
void gs_case_free(struct GsCase *case_);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSMOOTH_H */
