#ifndef RMT_PORTFOLIO_H
#define RMT_PORTFOLIO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmtStatus {
  RMT_STATUS_OK = 0,
  RMT_STATUS_NULL_POINTER = 1,
  RMT_STATUS_BUFFER_TOO_SMALL = 2,
  RMT_STATUS_INVALID_ARGUMENT = 3,
  RMT_STATUS_PARSE_ERROR = 4,
  RMT_STATUS_SHAPE_ERROR = 5,
  RMT_STATUS_DOMAIN_ERROR = 6,
  RMT_STATUS_DEGENERATE_SERIES = 7,
  RMT_STATUS_CONVERGENCE_ERROR = 8,
  RMT_STATUS_INFEASIBLE_TARGET = 9,
  RMT_STATUS_NUMERICAL_FAILURE = 10,
  RMT_STATUS_INSUFFICIENT_POINTS = 11,
  RMT_STATUS_DEGENERATE_ABSCISSA = 12,
  RMT_STATUS_ALIGNMENT_ERROR = 13,
  RMT_STATUS_IO_ERROR = 14,
  RMT_STATUS_PANIC = 15,
} RmtStatus;

typedef enum RmtComponent {
  RMT_COMPONENT_RANDOM_BAND = 0,
  RMT_COMPONENT_FILTERED = 1,
  RMT_COMPONENT_LARGEST_MODE = 2,
} RmtComponent;

typedef enum RmtCorrVariant {
  RMT_CORR_VARIANT_ORIGINAL = 0,
  RMT_CORR_VARIANT_RANDOM_BAND = 1,
  RMT_CORR_VARIANT_FILTERED = 2,
  RMT_CORR_VARIANT_LARGEST = 3,
} RmtCorrVariant;

typedef struct RmtCorrelation RmtCorrelation;

typedef struct RmtFrontier RmtFrontier;

/**
 * Asset-by-time return panel.
 */
typedef struct RmtPanel RmtPanel;

typedef struct RmtPartitionHandle RmtPartitionHandle;

typedef struct RmtSpectrum RmtSpectrum;

typedef struct RmtPowerLaw {
  double gamma;
  double log_intercept;
  double r_squared;
  size_t n_points;
  size_t excluded;
} RmtPowerLaw;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rmt_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *rmt_last_error(void);

enum RmtStatus rmt_mp_bounds(double q, double *lambda_minus, double *lambda_plus);

enum RmtStatus rmt_mp_density(double lambda, double q, double *out);

/**
 * Panel from an `n x l` row-major buffer, one row per asset.
 */
enum RmtStatus rmt_panel_from_row_major(size_t n,
                                        size_t l,
                                        const double *data,
                                        struct RmtPanel **out);

enum RmtStatus rmt_panel_synth_iid(size_t n, size_t l, uint64_t seed, struct RmtPanel **out);

/**
 * One-factor panel; the market series is written to `market` (length `l`)
 * when it is not null.
 */
enum RmtStatus rmt_panel_synth_one_factor(size_t n,
                                          size_t l,
                                          double beta_lo,
                                          double beta_hi,
                                          double noise_sd,
                                          uint64_t seed,
                                          double *market,
                                          struct RmtPanel **out);

enum RmtStatus rmt_panel_dims(const struct RmtPanel *p, size_t *n, size_t *l);

void rmt_panel_free(struct RmtPanel *p);

enum RmtStatus rmt_correlation(const struct RmtPanel *p, struct RmtCorrelation **out);

/**
 * Correlation handle from an `n x n` row-major buffer.
 */
enum RmtStatus rmt_correlation_from_row_major(size_t n,
                                              const double *data,
                                              struct RmtCorrelation **out);

enum RmtStatus rmt_correlation_n(const struct RmtCorrelation *c, size_t *n);

/**
 * Copy the `n x n` entries row-major into `out`.
 */
enum RmtStatus rmt_correlation_entries(const struct RmtCorrelation *c,
                                       double *out,
                                       size_t capacity);

void rmt_correlation_free(struct RmtCorrelation *c);

enum RmtStatus rmt_eigendecompose(const struct RmtCorrelation *c, struct RmtSpectrum **out);

/**
 * Eigenvalues in ascending order, `n` of them.
 */
enum RmtStatus rmt_spectrum_eigenvalues(const struct RmtSpectrum *s, double *out, size_t capacity);

/**
 * Unit eigenvector `k`, paired with the `k`-th smallest eigenvalue.
 */
enum RmtStatus rmt_spectrum_eigenvector(const struct RmtSpectrum *s,
                                        size_t k,
                                        double *out,
                                        size_t capacity);

void rmt_spectrum_free(struct RmtSpectrum *s);

/**
 * Split the spectrum at the upper edge of the law for `q = L / N`.
 */
enum RmtStatus rmt_partition(const struct RmtSpectrum *s,
                             double q,
                             struct RmtPartitionHandle **out);

/**
 * Number of eigenvalues above the upper edge.
 */
enum RmtStatus rmt_partition_deviating_count(const struct RmtPartitionHandle *p, size_t *out);

enum RmtStatus rmt_partition_component(const struct RmtPartitionHandle *p,
                                       enum RmtComponent component,
                                       double *out,
                                       size_t capacity);

void rmt_partition_free(struct RmtPartitionHandle *p);

/**
 * Long-only minimum-variance weights for `target_mu`, using the panel's
 * means and volatilities and the chosen correlation variant.
 */
enum RmtStatus rmt_min_variance_weights(const struct RmtPanel *p,
                                        enum RmtCorrVariant variant,
                                        bool diagonal_repair,
                                        double target_mu,
                                        double *out,
                                        size_t capacity);

enum RmtStatus rmt_efficient_frontier(const struct RmtPanel *p,
                                      enum RmtCorrVariant variant,
                                      bool diagonal_repair,
                                      size_t n_points,
                                      struct RmtFrontier **out);

enum RmtStatus rmt_frontier_len(const struct RmtFrontier *f, size_t *out);

/**
 * Target return, achieved risk and weight entropy of point `k`.
 */
enum RmtStatus rmt_frontier_point(const struct RmtFrontier *f,
                                  size_t k,
                                  double *target_mu,
                                  double *sigma,
                                  double *entropy);

enum RmtStatus rmt_frontier_weights(const struct RmtFrontier *f,
                                    size_t k,
                                    double *out,
                                    size_t capacity);

/**
 * Entropy against risk on the upper branch of the frontier, or on every
 * point when `upper` is false.
 */
enum RmtStatus rmt_frontier_fit(const struct RmtFrontier *f,
                                bool upper,
                                double entropy_floor,
                                struct RmtPowerLaw *out);

void rmt_frontier_free(struct RmtFrontier *f);

/**
 * Shannon entropy in nats of a weight vector on the simplex.
 */
enum RmtStatus rmt_weight_entropy(const double *w, size_t len, double *out);

/**
 * Least-squares fit of `ln entropy = log_intercept - gamma ln sigma`.
 */
enum RmtStatus rmt_fit_power_law(const double *sigma,
                                 const double *entropy,
                                 size_t len,
                                 struct RmtPowerLaw *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RMT_PORTFOLIO_H */
