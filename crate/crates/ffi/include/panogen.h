#ifndef PANOGEN_H
#define PANOGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PanogenStatus {
  PANOGEN_STATUS_OK = 0,
  // A null pointer or a string that is not UTF-8.
  PANOGEN_STATUS_INVALID_ARGUMENT = 1,
  // Bad configuration, geometry or steering request.
  PANOGEN_STATUS_CONFIG = 2,
  // The generator failed; the run state is unchanged.
  PANOGEN_STATUS_GENERATOR = 3,
  // Run state, storage or I/O problem.
  PANOGEN_STATUS_STATE = 4,
  // A Rust panic was caught at the boundary.
  PANOGEN_STATUS_PANIC = 5,
} PanogenStatus;

// Opaque run handle.
typedef struct PanogenRun PanogenRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *panogen_last_error(void);

// Creates a run in `dir` from the PNG at `input_png`.
//
// `config_json` may be NULL for defaults; `fov_deg` and `pano_width`
// override its fields when positive.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings and `out`
// must point to writable storage for one handle.
enum PanogenStatus panogen_run_init(const char *dir,
                                    const char *input_png,
                                    double yaw_deg,
                                    double pitch_deg,
                                    double fov_deg,
                                    uint32_t pano_width,
                                    const char *prompt,
                                    const char *config_json,
                                    struct PanogenRun **out);

// Opens an existing run directory, recovering an interrupted step.
//
// # Safety
// `dir` must be a valid NUL-terminated string and `out` writable.
enum PanogenStatus panogen_run_open(const char *dir, struct PanogenRun **out);

// Runs one step. `prompt` may be NULL to keep the current prompt. When
// `steer` is true the step outpaints the view at `(yaw_deg, pitch_deg)`.
// A failed generator call returns `Generator` and leaves the panorama
// unchanged.
//
// # Safety
// `run` must be a live handle; `prompt` NULL or a valid string.
enum PanogenStatus panogen_run_step(struct PanogenRun *run,
                                    const char *prompt,
                                    bool steer,
                                    double yaw_deg,
                                    double pitch_deg);

// Steps until complete, or at most `max_steps` times when nonzero.
// Writes the number of attempted steps to `steps_taken` if non-NULL.
//
// # Safety
// `run` must be a live handle; `steps_taken` NULL or writable.
enum PanogenStatus panogen_run_auto(struct PanogenRun *run,
                                    uint32_t max_steps,
                                    uint32_t *steps_taken);

// Solid-angle weighted known share of the sphere, in `[0, 1]`.
//
// # Safety
// `run` must be a live handle and `out` writable.
enum PanogenStatus panogen_run_known_fraction(const struct PanogenRun *run, double *out);

// Writes the panorama, cube faces and manifest of a complete run.
//
// # Safety
// `run` must be a live handle and `out_dir` a valid string.
enum PanogenStatus panogen_run_export(const struct PanogenRun *run, const char *out_dir);

// The run manifest as JSON. Free the result with [`panogen_string_free`].
// Returns NULL on failure.
//
// # Safety
// `run` must be a live handle.
char *panogen_run_manifest_json(const struct PanogenRun *run);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void panogen_string_free(char *s);

// # Safety
// `run` must be NULL or a handle from this library, not yet freed.
void panogen_run_free(struct PanogenRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PANOGEN_H */
