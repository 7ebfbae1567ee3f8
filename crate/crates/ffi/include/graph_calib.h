#ifndef GRAPH_CALIB_H
#define GRAPH_CALIB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  // Input failed validation (ranges, shapes, distributions).
  GC_STATUS_INVALID_INPUT = 2,
  // The metric is undefined on an empty set.
  GC_STATUS_EMPTY_SET = 3,
  // Exact inference would enumerate too many states.
  GC_STATUS_TOO_LARGE = 4,
  // Unknown metric name or malformed string.
  GC_STATUS_PARSE = 5,
  GC_STATUS_INTERNAL = 6,
} GcStatus;

typedef enum GcMethod {
  GC_METHOD_EXACT = 0,
  GC_METHOD_MEAN_FIELD = 1,
  GC_METHOD_LBP = 2,
} GcMethod;

typedef struct GcGraph GcGraph;

typedef struct GcInference GcInference;

typedef struct GcMrf GcMrf;

typedef struct GcReport GcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *gc_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void gc_string_free(char *s);

// Builds an undirected graph from `num_edges` endpoint pairs. Direction and
// duplicates are ignored; self-loops and ids `>= num_nodes` are rejected.
//
// # Safety
// `src` and `dst` must point to `num_edges` values; `out` must be writable.
enum GcStatus gc_graph_new(size_t num_nodes,
                           const size_t *src,
                           const size_t *dst,
                           size_t num_edges,
                           struct GcGraph **out);

// # Safety
// `graph` must be null or a live handle.
void gc_graph_free(struct GcGraph *graph);

// Number of distinct undirected edges, or 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t gc_graph_num_edges(const struct GcGraph *graph);

// Edge `index` in canonical order (`src < dst`, sorted). Per-edge arrays
// passed to or returned by this library follow this order.
//
// # Safety
// `graph` must be a live handle; `src` and `dst` must be writable.
enum GcStatus gc_graph_edge(const struct GcGraph *graph, size_t index, size_t *src, size_t *dst);

// Expected calibration error of `n` items over `bins` equal-width bins.
//
// # Safety
// `confidence` and `correct` must point to `n` values; `out` must be writable.
enum GcStatus gc_ece(const double *confidence,
                     const uint8_t *correct,
                     size_t n,
                     size_t bins,
                     double *out);

// Computes the full metric report with product-form edge marginals.
//
// `labels` and `test_mask` hold one value per node; `node_probs` holds
// `num_nodes * num_classes` probabilities. Rows must sum to 1 unless
// `renormalize` is non-zero.
//
// # Safety
// All pointers must be valid for the stated lengths; `out` must be writable.
enum GcStatus gc_report_compute(const struct GcGraph *graph,
                                const size_t *labels,
                                size_t num_classes,
                                const uint8_t *test_mask,
                                const double *node_probs,
                                size_t bins,
                                uint8_t renormalize,
                                struct GcReport **out);

// Reads a named value (e.g. `"edgewise_ece"`). Undefined values return
// [`GcStatus::EmptySet`] and leave `out` untouched.
//
// # Safety
// `report` must be a live handle, `name` a NUL-terminated string and `out`
// writable.
enum GcStatus gc_report_get(const struct GcReport *report, const char *name, double *out);

// Serializes the report as JSON; free the result with [`gc_string_free`].
//
// # Safety
// `report` must be a live handle and `out` writable.
enum GcStatus gc_report_to_json(const struct GcReport *report, char **out);

// # Safety
// `report` must be null or a live handle.
void gc_report_free(struct GcReport *report);

// Builds a pairwise MRF on a copy of `graph`.
//
// `unary` holds `num_nodes * num_classes` log-potentials. With `per_edge`
// zero, `pairwise` is one `num_classes^2` matrix shared by all edges;
// otherwise it holds one matrix per edge in [`gc_graph_edge`] order, each
// indexed `[src class][dst class]`.
//
// # Safety
// All pointers must be valid for the stated lengths; `out` must be writable.
enum GcStatus gc_mrf_new(const struct GcGraph *graph,
                         size_t num_classes,
                         const double *unary,
                         const double *pairwise,
                         uint8_t per_edge,
                         struct GcMrf **out);

// Clamps `count` nodes to observed classes in place.
//
// # Safety
// `mrf` must be a live handle; `nodes` and `classes` must point to `count`
// values.
enum GcStatus gc_mrf_observe(struct GcMrf *mrf,
                             const size_t *nodes,
                             const size_t *classes,
                             size_t count);

// # Safety
// `mrf` must be null or a live handle.
void gc_mrf_free(struct GcMrf *mrf);

// Runs inference. `max_iters == 0` and `tol <= 0` select the method's
// defaults; `damping` applies to loopy BP only.
//
// # Safety
// `mrf` must be a live handle and `out` writable.
enum GcStatus gc_infer(const struct GcMrf *mrf,
                       enum GcMethod method,
                       size_t max_iters,
                       double tol,
                       double damping,
                       struct GcInference **out);

// 1 if the method met its tolerance, 0 otherwise (or for a null handle).
//
// # Safety
// `res` must be null or a live handle.
uint8_t gc_inference_converged(const struct GcInference *res);

// # Safety
// `res` must be null or a live handle.
size_t gc_inference_iterations(const struct GcInference *res);

// Copies node marginals (`num_nodes * num_classes` values) into `out`.
//
// # Safety
// `res` must be a live handle and `out` writable for `len` values.
enum GcStatus gc_inference_node_marginals(const struct GcInference *res, double *out, size_t len);

// Copies edge marginals (`num_edges * num_classes^2` values, edges in
// [`gc_graph_edge`] order) into `out`.
//
// # Safety
// `res` must be a live handle and `out` writable for `len` values.
enum GcStatus gc_inference_edge_marginals(const struct GcInference *res, double *out, size_t len);

// # Safety
// `res` must be null or a live handle.
void gc_inference_free(struct GcInference *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_CALIB_H */
