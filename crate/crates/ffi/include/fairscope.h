#ifndef FAIRSCOPE_H
#define FAIRSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_ARGUMENT = 2,
  FS_STATUS_IO = 3,
  FS_STATUS_FORMAT = 4,
  FS_STATUS_SHAPE = 5,
  /*
   A threshold could not be calibrated for the requested target.
   */
  FS_STATUS_UNRESOLVABLE = 6,
  /*
   An output buffer has the wrong length.
   */
  FS_STATUS_BUFFER_SIZE = 7,
  FS_STATUS_PANIC = 8,
} FsStatus;

/*
 Loaded model.
 */
typedef struct FsModel FsModel;

/*
 Indexed comparison scores.
 */
typedef struct FsScoreSet FsScoreSet;

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 owned by the library.
 */
const char *fs_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *fs_version(void);

/*
 Parses a model from an in-memory model file.

 # Safety
 `bytes` must be valid for `len` reads; `out` must be a valid pointer.
 */
enum FsStatus fs_model_load(const uint8_t *bytes, size_t len, struct FsModel **out);

/*
 Reads and parses a model file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum FsStatus fs_model_load_file(const char *path, struct FsModel **out);

/*
 # Safety
 `model` must be NULL or a handle from `fs_model_load*` not yet freed.
 */
void fs_model_free(struct FsModel *model);

/*
 Input shape as channels, height, width.

 # Safety
 `model` must be a live handle; the out pointers must be valid.
 */
enum FsStatus fs_model_input_shape(const struct FsModel *model,
                                   size_t *channels,
                                   size_t *height,
                                   size_t *width);

/*
 Score-CAM map of a CHW image at the input resolution. With `symmetrized`
 non-zero, the map is averaged with the mirrored map of the flipped image.

 # Safety
 `model` must be a live handle; `image` valid for `image_len` reads and
 `out_map` for `out_len` writes.
 */
enum FsStatus fs_score_cam(const struct FsModel *model,
                           const double *image,
                           size_t image_len,
                           int32_t symmetrized,
                           double *out_map,
                           size_t out_len);

/*
 Mean (MAM) and spread (AM-V) maps of `count` maps stored back to back.

 # Safety
 `maps` must be valid for `count * width * height` reads; `out_mam` and
 `out_amv` for `width * height` writes each.
 */
enum FsStatus fs_cohort_stats(const double *maps,
                              size_t count,
                              size_t width,
                              size_t height,
                              double *out_mam,
                              double *out_amv);

/*
 Mirror-averaged absolute difference of two AM-V grids (D-AM-V).

 # Safety
 `a` and `b` must be valid for `width * height` reads and `out` for as many
 writes.
 */
enum FsStatus fs_damv(const double *a, const double *b, size_t width, size_t height, double *out);

/*
 Column sums (`s_x`, `width` values) and row sums (`s_y`, `height` values)
 of an AM-V grid.

 # Safety
 `amv` must be valid for `width * height` reads, `s_x` for `width` and
 `s_y` for `height` writes.
 */
enum FsStatus fs_spatial_profile(const double *amv,
                                 size_t width,
                                 size_t height,
                                 double *s_x,
                                 double *s_y);

/*
 Loads a score CSV (`pair_id,group,kind,score`).

 # Safety
 `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum FsStatus fs_scores_load_csv(const char *path, struct FsScoreSet **out);

/*
 Builds a score set from parallel arrays. `genuine[i]` is non-zero for a
 genuine pair and zero for an imposter pair.

 # Safety
 `groups` must hold `count` NUL-terminated strings; `genuine` and `scores`
 must be valid for `count` reads; `out` must be a valid pointer.
 */
enum FsStatus fs_scores_from_arrays(const char *const *groups,
                                    const uint8_t *genuine,
                                    const double *scores,
                                    size_t count,
                                    struct FsScoreSet **out);

/*
 # Safety
 `set` must be NULL or a handle from `fs_scores_*` not yet freed.
 */
void fs_scores_free(struct FsScoreSet *set);

/*
 FMR of `group` (or `"all"`) at `tau`.

 # Safety
 `set` must be a live handle, `group` a NUL-terminated string and `out` a
 valid pointer.
 */
enum FsStatus fs_fmr(const struct FsScoreSet *set, const char *group, double tau, double *out);

/*
 FNMR of `group` (or `"all"`) at `tau`.

 # Safety
 As for [`fs_fmr`].
 */
enum FsStatus fs_fnmr(const struct FsScoreSet *set, const char *group, double tau, double *out);

/*
 Global threshold for `target_fmr` on the pooled imposter scores, with the
 FMR it achieves.

 # Safety
 `set` must be a live handle; `tau` and `achieved_fmr` valid pointers.
 */
enum FsStatus fs_calibrate_tau(const struct FsScoreSet *set,
                               double target_fmr,
                               double *tau,
                               double *achieved_fmr);

/*
 FDR at `tau` across every group of the set.

 # Safety
 `set` must be a live handle and `out` a valid pointer.
 */
enum FsStatus fs_fdr_at(const struct FsScoreSet *set, double tau, double alpha, double *out);

/*
 FDR from per-group error rates, e.g. published tables.

 # Safety
 `fmr` and `fnmr` must be valid for `groups` reads; `out` a valid pointer.
 */
enum FsStatus fs_fdr_from_rates(const double *fmr,
                                const double *fnmr,
                                size_t groups,
                                double alpha,
                                double *out);

#endif  /* FAIRSCOPE_H */
