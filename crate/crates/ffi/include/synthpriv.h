#ifndef SYNTHPRIV_H
#define SYNTHPRIV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpDirection {
  SP_DIRECTION_FORWARD = 0,
  SP_DIRECTION_MAX = 1,
} SpDirection;

typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_POINTER = 1,
  SP_STATUS_INVALID_ARGUMENT = 2,
  SP_STATUS_IO = 3,
  SP_STATUS_PARSE = 4,
  SP_STATUS_DIMENSION_MISMATCH = 5,
  SP_STATUS_UNDERSIZED = 6,
  SP_STATUS_DEGENERATE = 7,
  SP_STATUS_LABELS = 8,
  SP_STATUS_PANIC = 99,
} SpStatus;

typedef enum SpGenerator {
  SP_GENERATOR_SMOOTHED_BOOTSTRAP = 0,
  SP_GENERATOR_MEMORIZE = 1,
  SP_GENERATOR_GAUSSIAN_FIT = 2,
} SpGenerator;

// Opaque dataset handle.
typedef struct SpDataset SpDataset;

// Audit parameters. `k == 0` picks the neighbourhood size from the data.
typedef struct SpAuditConfig {
  size_t n_pairs;
  size_t k;
  size_t nn_order;
  enum SpDirection direction;
  uint64_t seed;
  double gamma;
} SpAuditConfig;

typedef struct SpPrivacyEstimate {
  double mean_loss;
  double variance;
  double upper_semivariance;
  double mu;
  double gamma;
  size_t n_samples;
  size_t k_removed;
} SpPrivacyEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next call into this library from the same thread.
const char *sp_last_error(void);

// Library defaults: 100 pairs, data-driven k, first neighbour, max direction,
// seed 42, gamma 1e-5.
struct SpAuditConfig sp_audit_config_default(void);

// Copies `n_rows * dim` row-major values into a new dataset.
//
// # Safety
// `values` must point to `n_rows * dim` readable doubles; `out` must be writable.
enum SpStatus sp_dataset_from_rows(const double *values,
                                   size_t n_rows,
                                   size_t dim,
                                   struct SpDataset **out);

// Loads a CSV file. With `has_labels`, the last column holds integer labels.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SpStatus sp_dataset_load_csv(const char *path, bool has_labels, struct SpDataset **out);

// # Safety
// `data` must come from this library and not have been freed. NULL is ignored.
void sp_dataset_free(struct SpDataset *data);

// Number of points, or 0 for NULL.
//
// # Safety
// `data` must be NULL or a live handle.
size_t sp_dataset_len(const struct SpDataset *data);

// Feature dimension, or 0 for NULL.
//
// # Safety
// `data` must be NULL or a live handle.
size_t sp_dataset_dim(const struct SpDataset *data);

// Copies the row-major values into `buffer`, which must hold `len * dim` doubles.
//
// # Safety
// `data` must be a live handle; `buffer` must have room for `capacity` doubles.
enum SpStatus sp_dataset_values(const struct SpDataset *data, double *buffer, size_t capacity);

// Draws a synthetic dataset from `real`.
//
// # Safety
// `real` must be a live handle; `out` must be writable.
enum SpStatus sp_generate(const struct SpDataset *real,
                          enum SpGenerator kind,
                          double bandwidth,
                          size_t count,
                          uint64_t seed,
                          struct SpDataset **out);

// Runs the full audit and writes the bound into `out`.
//
// # Safety
// All pointers must be live and, for `out`, writable.
enum SpStatus sp_audit(const struct SpDataset *real,
                       const struct SpDataset *synthetic,
                       const struct SpAuditConfig *config,
                       struct SpPrivacyEstimate *out);

// Nearest-neighbour estimate of KL(P || Q) in nats.
//
// # Safety
// `p` and `q` must be live handles; `out` must be writable.
enum SpStatus sp_kl_estimate(const struct SpDataset *p,
                             const struct SpDataset *q,
                             size_t nn_order,
                             double *out);

// # Safety
// `out` must be writable.
enum SpStatus sp_calibrate_sigma(double epsilon, double delta, double clip, double *out);

// # Safety
// `values` must point to `len` doubles; `out` must be writable.
enum SpStatus sp_chebyshev_mu(const double *values, size_t len, double gamma, double *out);

// # Safety
// `values` must point to `len` doubles; `out` must be writable.
enum SpStatus sp_chebyshev_gamma(const double *values, size_t len, double mu, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNTHPRIV_H */
