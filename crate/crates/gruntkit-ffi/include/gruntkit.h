#ifndef GRUNTKIT_H
#define GRUNTKIT_H

/* Generated by cbindgen; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by fallible functions.
typedef enum GruntkitStatus {
  GRUNTKIT_STATUS_OK = 0,
  GRUNTKIT_STATUS_INVALID_ARGUMENT = 1,
  GRUNTKIT_STATUS_IO_ERROR = 2,
  GRUNTKIT_STATUS_DSP_ERROR = 3,
  GRUNTKIT_STATUS_INTERNAL_ERROR = 4,
} GruntkitStatus;

// Mono audio handle.
typedef struct GruntkitClip GruntkitClip;

// Row-major time x descriptor matrix handle.
typedef struct GruntkitMatrix GruntkitMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Crate version as a static NUL-terminated string. Do not free.
const char *gruntkit_version(void);

// Message of the most recent error on this thread, or null. The pointer is
// valid until the next failing call on the same thread. Do not free.
const char *gruntkit_last_error_message(void);

// Decode a 16-bit PCM WAV file into a clip. Returns null on failure.
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct GruntkitClip *gruntkit_clip_from_wav_file(const char *path);

// Wrap raw samples (copied) as a clip. Returns null on failure.
//
// # Safety
// `samples` must point to `len` readable doubles.
struct GruntkitClip *gruntkit_clip_from_samples(const double *samples,
                                                uintptr_t len,
                                                uint32_t sample_rate);

// # Safety
// `clip` must be a pointer returned by a gruntkit constructor, freed once.
void gruntkit_clip_free(struct GruntkitClip *clip);

// # Safety
// `clip` must be a live clip handle.
uint32_t gruntkit_clip_sample_rate(const struct GruntkitClip *clip);

// # Safety
// `clip` must be a live clip handle.
uintptr_t gruntkit_clip_sample_count(const struct GruntkitClip *clip);

// Resample to a lower or equal rate. Returns a new clip or null.
//
// # Safety
// `clip` must be a live clip handle.
struct GruntkitClip *gruntkit_clip_resample(const struct GruntkitClip *clip, uint32_t target_rate);

// 44 x 40 MFCC matrix of a 1000 ms clip at 44.1 kHz. Null on failure.
//
// # Safety
// `clip` must be a live clip handle.
struct GruntkitMatrix *gruntkit_mfcc(const struct GruntkitClip *clip);

// 227 x 227 normalized log-magnitude spectrogram image (time x frequency).
//
// # Safety
// `clip` must be a live clip handle.
struct GruntkitMatrix *gruntkit_spectrogram(const struct GruntkitClip *clip);

// Low-level descriptor matrix at a 10 ms frame period (padded 130-channel
// layout). Input above 16 kHz is resampled internally.
//
// # Safety
// `clip` must be a live clip handle.
struct GruntkitMatrix *gruntkit_llds(const struct GruntkitClip *clip);

// # Safety
// `matrix` must be a live matrix handle, freed once.
void gruntkit_matrix_free(struct GruntkitMatrix *matrix);

// # Safety
// `matrix` must be a live matrix handle.
uintptr_t gruntkit_matrix_rows(const struct GruntkitMatrix *matrix);

// # Safety
// `matrix` must be a live matrix handle.
uintptr_t gruntkit_matrix_cols(const struct GruntkitMatrix *matrix);

// Row-major data pointer (`rows * cols` doubles), valid while the matrix
// handle lives.
//
// # Safety
// `matrix` must be a live matrix handle.
const double *gruntkit_matrix_data(const struct GruntkitMatrix *matrix);

// Unweighted average recall of binary label arrays (values 0 or 1).
//
// # Safety
// `truth` and `predicted` must point to `len` readable ints; `out_uar`
// must be writable.
enum GruntkitStatus gruntkit_uar(const int *truth,
                                 const int *predicted,
                                 uintptr_t len,
                                 double *out_uar);

// Write a deterministic synthetic corpus (clip store plus manifest).
//
// # Safety
// `out_dir` must be a valid NUL-terminated string.
enum GruntkitStatus gruntkit_synth_corpus(const char *out_dir,
                                          uintptr_t players,
                                          uintptr_t clips_per_player,
                                          uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRUNTKIT_H */
