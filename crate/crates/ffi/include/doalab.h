#ifndef DOALAB_H
#define DOALAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DoaMethod {
  DOA_METHOD_SRP_PHAT = 0,
  DOA_METHOD_SRP_MP = 1,
  DOA_METHOD_SRP_OUTPUT_MASKED = 2,
  DOA_METHOD_NORM_MUSIC = 3,
} DoaMethod;

typedef enum DoaStatus {
  DOA_STATUS_OK = 0,
  DOA_STATUS_NULL_POINTER = 1,
  DOA_STATUS_INVALID_ARGUMENT = 2,
  DOA_STATUS_SHAPE_MISMATCH = 3,
  /*
   Empty frame range, empty attention, or a spectrum without a positive peak.
   */
  DOA_STATUS_EMPTY = 4,
  DOA_STATUS_IO = 5,
  DOA_STATUS_PANIC = 6,
} DoaStatus;

/*
 DOA grid, array geometry and precomputed steering vectors.
 */
typedef struct DoaEstimator DoaEstimator;

/*
 Time-frequency attention mask.
 */
typedef struct DoaMask DoaMask;

/*
 Multichannel STFT.
 */
typedef struct DoaSpectrogram DoaSpectrogram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *doa_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *doa_version(void);

/*
 Per-frame SRP-PHAT flop estimate for `bins` frequency bins, `directions`
 grid points and `mics` microphones.

 # Safety
 `out` must be a valid pointer to a `u64`.
 */
enum DoaStatus doa_srp_flops(uint64_t bins, uint64_t directions, uint64_t mics, uint64_t *out);

/*
 STFT of `channels × length` samples stored channel after channel.
 `window` is 0 for Hann, 1 for Hamming, 2 for rectangular.

 # Safety
 `samples` must point to `channels * length` doubles; `out` to a handle slot.
 */
enum DoaStatus doa_stft(const double *samples,
                        size_t channels,
                        size_t length,
                        double sample_rate,
                        size_t window_length,
                        size_t hop,
                        uint32_t window,
                        struct DoaSpectrogram **out);

/*
 Writes the channel, bin and frame counts; any output may be null.

 # Safety
 `spec` must be a live handle; non-null outputs must be valid.
 */
enum DoaStatus doa_spectrogram_dims(const struct DoaSpectrogram *spec,
                                    size_t *channels,
                                    size_t *bins,
                                    size_t *frames);

/*
 # Safety
 `spec` must be null or a handle from `doa_stft` not freed before.
 */
void doa_spectrogram_free(struct DoaSpectrogram *spec);

/*
 Mask from `bins × frames` weights in [0, 1], stored bin after bin.

 # Safety
 `weights` must point to `bins * frames` doubles; `out` to a handle slot.
 */
enum DoaStatus doa_mask_new(const double *weights,
                            size_t bins,
                            size_t frames,
                            struct DoaMask **out);

/*
 Oracle phase-sensitive mask of `direct` within `mixture` at microphone `channel`.

 # Safety
 Both spectrograms must be live handles; `out` a valid handle slot.
 */
enum DoaStatus doa_mask_psm(const struct DoaSpectrogram *direct,
                            const struct DoaSpectrogram *mixture,
                            size_t channel,
                            struct DoaMask **out);

/*
 # Safety
 `mask` must be null or a live mask handle.
 */
void doa_mask_free(struct DoaMask *mask);

/*
 Estimator for a uniform linear array of `num_mics` microphones spaced
 `spacing_m` apart, a `grid_size`-point grid over [0°, 180°], and STFTs
 with `fft_length` samples at `sample_rate`.

 # Safety
 `out` must be a valid handle slot.
 */
enum DoaStatus doa_estimator_new(size_t num_mics,
                                 double spacing_m,
                                 double speed_of_sound,
                                 size_t grid_size,
                                 double sample_rate,
                                 size_t fft_length,
                                 size_t num_sources,
                                 struct DoaEstimator **out);

/*
 # Safety
 `est` must be null or a live estimator handle.
 */
void doa_estimator_free(struct DoaEstimator *est);

/*
 Number of grid points, i.e. the spectrum length `doa_estimate` writes.

 # Safety
 `est` must be a live handle.
 */
size_t doa_estimator_grid_size(const struct DoaEstimator *est);

/*
 Normalized spatial spectrum over frames `[frame_start, frame_end)` and the
 DOA in degrees at its peak. `mask` may be null (all ones); it is ignored
 by `DOA_METHOD_SRP_PHAT`. `sps` receives `sps_len` values and must match
 the grid size; either output may be null.

 # Safety
 Handles must be live; `sps` must point to `sps_len` doubles if non-null.
 */
enum DoaStatus doa_estimate(const struct DoaEstimator *est,
                            enum DoaMethod method,
                            const struct DoaSpectrogram *spec,
                            const struct DoaMask *mask,
                            size_t frame_start,
                            size_t frame_end,
                            double *sps,
                            size_t sps_len,
                            double *doa_deg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOALAB_H */
