#ifndef RMCPD_H
#define RMCPD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum RmcpdStatus {
  RMCPD_STATUS_OK = 0,
  RMCPD_STATUS_NULL_POINTER = 1,
  RMCPD_STATUS_INVALID_ARGUMENT = 2,
  RMCPD_STATUS_IO = 3,
  RMCPD_STATUS_PARSE = 4,
  RMCPD_STATUS_STRUCTURAL = 5,
  RMCPD_STATUS_DEGENERATE = 6,
  RMCPD_STATUS_NUMERICAL = 7,
  RMCPD_STATUS_UNSUPPORTED_SIZE = 8,
  RMCPD_STATUS_INTERNAL = 9,
  RMCPD_STATUS_PANIC = 10,
} RmcpdStatus;

/**
 * Values accepted for `channel` arguments.
 */
typedef enum RmcpdChannel {
  RMCPD_CHANNEL_OUT_W = 0,
  RMCPD_CHANNEL_OUT_D = 1,
  RMCPD_CHANNEL_IN = 2,
  RMCPD_CHANNEL_IN_TILDE = 3,
} RmcpdChannel;

/**
 * Values accepted for `family` arguments.
 */
typedef enum RmcpdFamily {
  RMCPD_FAMILY_GAUSSIAN = 0,
  RMCPD_FAMILY_LOGNORMAL = 1,
  RMCPD_FAMILY_GAUSSIAN_MIXTURE = 2,
} RmcpdFamily;

/**
 * Opaque panel dataset.
 */
typedef struct RmcpdDataset RmcpdDataset;

/**
 * Opaque segmentation result.
 */
typedef struct RmcpdSegmentation RmcpdSegmentation;

/**
 * Options of the single change-point test.
 */
typedef struct RmcpdDetectOptions {
  /**
   * Number of successive MSTs.
   */
  size_t k;
  double n0_frac;
  double n1_frac;
  double alpha;
  /**
   * 0 uncorrected, 1 skewness corrected.
   */
  int skew_correction;
  /**
   * Permutation replicates; 0 disables the permutation test.
   */
  size_t permutations;
  uint64_t seed;
} RmcpdDetectOptions;

/**
 * Outcome of the single change-point test. Undefined values are NaN.
 */
typedef struct RmcpdDetectResult {
  size_t tau_hat;
  double m_star;
  double p_value;
  int reject;
  double z_out_w;
  double z_out_d;
  double z_in;
  double z_in_tilde;
  double p_out_w;
  double p_out_d;
  double p_in;
  double p_in_tilde;
  double permutation_p_value;
  size_t out_edges;
  size_t in_edges;
  double varrho;
  size_t warning_count;
} RmcpdDetectResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rmcpd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rmcpd_version(void);

/**
 * Copies `n * ell * d` values laid out as `[individual][rep][feature]`.
 */
enum RmcpdStatus rmcpd_dataset_new(size_t n,
                                   size_t ell,
                                   size_t d,
                                   const double *values,
                                   struct RmcpdDataset **out);

enum RmcpdStatus rmcpd_dataset_load_csv(const char *path,
                                        size_t n,
                                        size_t ell,
                                        struct RmcpdDataset **out);

/**
 * Draws data from one of the standard settings (1..=4).
 */
enum RmcpdStatus rmcpd_dataset_generate(int family,
                                        uint8_t setting,
                                        size_t n,
                                        size_t ell,
                                        size_t d,
                                        size_t tau,
                                        uint64_t seed,
                                        struct RmcpdDataset **out);

/**
 * Shape of a dataset; any of the output pointers may be NULL.
 */
enum RmcpdStatus rmcpd_dataset_shape(const struct RmcpdDataset *ds,
                                     size_t *n,
                                     size_t *ell,
                                     size_t *d);

void rmcpd_dataset_free(struct RmcpdDataset *ds);

struct RmcpdDetectOptions rmcpd_detect_options_default(void);

/**
 * Single change-point test. `options` may be NULL for the defaults.
 */
enum RmcpdStatus rmcpd_detect(const struct RmcpdDataset *ds,
                              const struct RmcpdDetectOptions *options,
                              struct RmcpdDetectResult *out);

/**
 * Binary segmentation. `min_seg = 0` selects the default minimum length;
 * a nonzero `bonferroni` halves alpha at each recursion level.
 */
enum RmcpdStatus rmcpd_segment(const struct RmcpdDataset *ds,
                               const struct RmcpdDetectOptions *options,
                               size_t min_seg,
                               int bonferroni,
                               struct RmcpdSegmentation **out);

/**
 * Number of detected change-points (0 for a NULL handle).
 */
size_t rmcpd_segmentation_count(const struct RmcpdSegmentation *seg);

/**
 * Change-point `index` in increasing order: the last individual (1-based)
 * before the change and its p-value.
 */
enum RmcpdStatus rmcpd_segmentation_get(const struct RmcpdSegmentation *seg,
                                        size_t index,
                                        size_t *position,
                                        double *p_value);

void rmcpd_segmentation_free(struct RmcpdSegmentation *seg);

/**
 * Uncorrected (graph-free) critical value of a single channel.
 */
enum RmcpdStatus rmcpd_critical_value_a1(double alpha,
                                         int channel,
                                         size_t n,
                                         size_t n0,
                                         size_t n1,
                                         double *out);

/**
 * Overshoot correction function.
 */
enum RmcpdStatus rmcpd_nu(double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RMCPD_H */
