#ifndef CONFGAP_H
#define CONFGAP_H

#include <stddef.h>
#include <stdint.h>

typedef enum ConfgapStatus {
  CONFGAP_STATUS_OK = 0,
  CONFGAP_STATUS_NULL_POINTER = 1,
  CONFGAP_STATUS_INVALID_ARGUMENT = 2,
  CONFGAP_STATUS_OUT_OF_DOMAIN = 3,
  CONFGAP_STATUS_SINGULAR_AXIS = 4,
  CONFGAP_STATUS_NON_POSITIVE_SIGMA = 5,
  CONFGAP_STATUS_TOLERANCE_UNACHIEVABLE = 6,
  CONFGAP_STATUS_NO_ROOT = 7,
  CONFGAP_STATUS_QUADRATURE_FAILED = 8,
  CONFGAP_STATUS_OUT_OF_TABLE = 9,
  CONFGAP_STATUS_DEGENERATE_CURVE = 10,
  CONFGAP_STATUS_IO = 11,
  CONFGAP_STATUS_PANIC = 12,
} ConfgapStatus;

typedef enum ConfgapMetricKind {
  CONFGAP_METRIC_KIND_EUCLIDEAN = 0,
  CONFGAP_METRIC_KIND_HYPERBOLIC = 1,
  CONFGAP_METRIC_KIND_SPHERICAL = 2,
  CONFGAP_METRIC_KIND_GAUSSIAN = 3,
} ConfgapMetricKind;

// Why an integration stopped early; `None` when it reached its end.
typedef enum ConfgapTruncation {
  CONFGAP_TRUNCATION_NONE = 0,
  CONFGAP_TRUNCATION_AXIS = 1,
  CONFGAP_TRUNCATION_SLOPE_CAP = 2,
  CONFGAP_TRUNCATION_DOMAIN = 3,
  CONFGAP_TRUNCATION_EVENT = 4,
} ConfgapTruncation;

typedef enum ConfgapVerdict {
  CONFGAP_VERDICT_HOLDS_STRICTLY = 0,
  CONFGAP_VERDICT_HOLDS_WITH_EQUALITY = 1,
  CONFGAP_VERDICT_FAILS = 2,
} ConfgapVerdict;

typedef struct ConfgapCurve ConfgapCurve;

typedef struct ConfgapMetric ConfgapMetric;

typedef struct ConfgapPhiTable ConfgapPhiTable;

// Point on a profile: `slope` is `x'` for graph curves and the tangent angle for arclength ones.
typedef struct ConfgapPoint {
  double param;
  double x;
  double z;
  double slope;
} ConfgapPoint;

typedef struct ConfgapGapSummary {
  enum ConfgapVerdict verdict;
  size_t sample_count;
  size_t fail_count;
  size_t equality_count;
  // NaN when no sample has σ > 0.
  double max_f;
  double min_lambda;
} ConfgapGapSummary;

typedef struct ConfgapRoot {
  double parameter;
  double residual;
  double bracket_lo;
  double bracket_hi;
  size_t iterations;
  // Boundary radius for free-boundary searches, far intercept for the torus; NaN otherwise.
  double extra;
} ConfgapRoot;

typedef struct ConfgapExample {
  double delta;
  double epsilon;
  double xi;
  double r;
  double boundary_curvature;
  enum ConfgapVerdict verdict;
} ConfgapExample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Owned by the library;
// valid until the next failing call on the same thread.
const char *confgap_last_error(void);

void confgap_clear_error(void);

// Library version as a static NUL-terminated string.
const char *confgap_version(void);

// # Safety
// `out` must be valid for a pointer write.
enum ConfgapStatus confgap_metric_new(enum ConfgapMetricKind kind, struct ConfgapMetric **out);

// Custom factor `u(t) = sum coeffs[i] t^i`. Pass a non-positive or NaN
// `domain_limit` for an unbounded domain.
//
// # Safety
// `coeffs` must point to `len` doubles; `out` must be valid for a pointer write.
enum ConfgapStatus confgap_metric_new_polynomial(const double *coeffs,
                                                 size_t len,
                                                 double domain_limit,
                                                 struct ConfgapMetric **out);

// # Safety
// `metric` must come from a metric constructor and not be freed twice. Null is ignored.
void confgap_metric_free(struct ConfgapMetric *metric);

// # Safety
// `metric` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_metric_sigma(const struct ConfgapMetric *metric,
                                        double radius_sq,
                                        double *out);

// # Safety
// `metric` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_metric_sigma_positivity_radius(const struct ConfgapMetric *metric,
                                                          double *out);

// # Safety
// `metric` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_metric_distance(const struct ConfgapMetric *metric,
                                           double r,
                                           double *out);

// Integrates the graph profile of constant conformal mean curvature `hbar`
// from `(t = 0, x0, xp0)` to `t_end`.
//
// # Safety
// `metric` must be a live handle; `out` valid for a pointer write.
enum ConfgapStatus confgap_integrate(const struct ConfgapMetric *metric,
                                     double hbar,
                                     double x0,
                                     double xp0,
                                     double t_end,
                                     double tol,
                                     struct ConfgapCurve **out);

// Same as [`confgap_integrate`] but reflects the result through `t = 0`,
// covering `[-t_end, t_end]`.
//
// # Safety
// `metric` must be a live handle; `out` valid for a pointer write.
enum ConfgapStatus confgap_integrate_symmetric(const struct ConfgapMetric *metric,
                                               double hbar,
                                               double x0,
                                               double t_end,
                                               double tol,
                                               struct ConfgapCurve **out);

// # Safety
// `curve` must come from an integration call and not be freed twice. Null is ignored.
void confgap_curve_free(struct ConfgapCurve *curve);

// # Safety
// `curve` must be a live handle; `lo` and `hi` valid for writes.
enum ConfgapStatus confgap_curve_range(const struct ConfgapCurve *curve, double *lo, double *hi);

// # Safety
// `curve` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_curve_truncation(const struct ConfgapCurve *curve,
                                            enum ConfgapTruncation *out);

// Dense-output evaluation at parameter `p` inside the curve's range.
//
// # Safety
// `curve` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_curve_eval(const struct ConfgapCurve *curve,
                                      double p,
                                      struct ConfgapPoint *out);

// Checks the gap condition along the curve with equality tolerance `tolerance`.
//
// # Safety
// `curve` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_curve_gap_check(const struct ConfgapCurve *curve,
                                           double tolerance,
                                           struct ConfgapGapSummary *out);

// Tabulates the convexity potential on `[0, s_max]` with `n` nodes. Pass a
// non-positive `s_max` for the default range.
//
// # Safety
// `metric` must be a live handle; `out` valid for a pointer write.
enum ConfgapStatus confgap_phi_table_new(const struct ConfgapMetric *metric,
                                         double s_max,
                                         size_t n,
                                         struct ConfgapPhiTable **out);

// # Safety
// `table` must come from [`confgap_phi_table_new`] and not be freed twice. Null is ignored.
void confgap_phi_table_free(struct ConfgapPhiTable *table);

// Value and first derivative of the potential at `s`.
//
// # Safety
// `table` must be a live handle; `phi` and `dphi` valid for writes.
enum ConfgapStatus confgap_phi_table_eval(const struct ConfgapPhiTable *table,
                                          double s,
                                          double *phi,
                                          double *dphi);

// Boundary height where the profile through `(0, x0)` meets a sphere orthogonally.
//
// # Safety
// `metric` must be a live handle; `out` valid for a write.
enum ConfgapStatus confgap_find_free_boundary(const struct ConfgapMetric *metric,
                                              double hbar,
                                              double x0,
                                              double search_lo,
                                              double search_hi,
                                              double tol,
                                              struct ConfgapRoot *out);

// Waist of the rotationally symmetric shrinking torus; `extra` holds its far intercept.
//
// # Safety
// `out` must be valid for a write.
enum ConfgapStatus confgap_find_torus(double search_lo,
                                      double search_hi,
                                      double tol,
                                      struct ConfgapRoot *out);

// Shrinker piece through `(0, x0)` cut at a convex boundary and certified against the gap condition.
//
// # Safety
// `out` must be valid for a write.
enum ConfgapStatus confgap_example(double x0,
                                   double tol,
                                   double margin,
                                   struct ConfgapExample *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFGAP_H */
