#ifndef TRIPLETCUT_H
#define TRIPLETCUT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_ARGUMENT = 2,
  TC_STATUS_SHAPE_MISMATCH = 3,
  TC_STATUS_NON_FINITE = 4,
  TC_STATUS_SIZE_LIMIT = 5,
  TC_STATUS_IO = 6,
  TC_STATUS_FORMAT = 7,
  TC_STATUS_BUFFER_TOO_SMALL = 8,
  TC_STATUS_INTERNAL = 9,
} TcStatus;

// Selects one of the three triplet losses.
typedef enum TcLoss {
  TC_LOSS_TRIPLET1 = 1,
  TC_LOSS_TRIPLET2 = 2,
  TC_LOSS_TRIPLET3 = 3,
} TcLoss;

// Weighted graph for the multicut problem.
typedef struct TcGraph TcGraph;

// Trained embedding network.
typedef struct TcNet TcNet;

// Node partition, one component id per node.
typedef struct TcPartition TcPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t tc_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *tc_version(void);

// Builds a graph on `n` nodes from `m` edges `(us[i], vs[i], costs[i])`.
//
// # Safety
// The three arrays must hold `m` elements; `out` must be writable.
enum TcStatus tc_graph_new(size_t n,
                           const size_t *us,
                           const size_t *vs,
                           const double *costs,
                           size_t m,
                           struct TcGraph **out);

// # Safety
// `g` must be null or a handle from `tc_graph_new` not yet freed.
void tc_graph_free(struct TcGraph *g);

// # Safety
// `g` must be a live graph handle.
size_t tc_graph_node_count(const struct TcGraph *g);

// # Safety
// `g` must be a live graph handle.
size_t tc_graph_edge_count(const struct TcGraph *g);

// Partition from `n` component ids.
//
// # Safety
// `labels` must hold `n` elements; `out` must be writable.
enum TcStatus tc_partition_new(const size_t *labels, size_t n, struct TcPartition **out);

// # Safety
// `p` must be null or a partition handle not yet freed.
void tc_partition_free(struct TcPartition *p);

// # Safety
// `p` must be a live partition handle.
size_t tc_partition_len(const struct TcPartition *p);

// # Safety
// `p` must be a live partition handle.
size_t tc_partition_component_count(const struct TcPartition *p);

// Copies the component ids into `buf`, which must hold at least
// `tc_partition_len(p)` elements.
//
// # Safety
// `p` must be a live handle and `buf` valid for `len` elements.
enum TcStatus tc_partition_labels(const struct TcPartition *p, size_t *buf, size_t len);

// Greedy additive edge contraction.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum TcStatus tc_gaec(const struct TcGraph *g, struct TcPartition **out);

// Local search starting from `start`; never increases the objective.
//
// # Safety
// Handles must be live; `out` must be writable.
enum TcStatus tc_kl_refine(const struct TcGraph *g,
                           const struct TcPartition *start,
                           struct TcPartition **out);

// Exact optimum by enumeration; graphs up to 12 nodes.
//
// # Safety
// `g` must be live; `out` and `objective_out` must be writable.
enum TcStatus tc_brute_force(const struct TcGraph *g,
                             struct TcPartition **out,
                             double *objective_out);

// Sum of costs of the edges cut by `p`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum TcStatus tc_objective(const struct TcGraph *g, const struct TcPartition *p, double *out);

// Checks the cycle constraints of the edge labeling induced by `p`.
// Writes 1 when they hold, 0 otherwise.
//
// # Safety
// Handles must be live; `out` must be writable.
enum TcStatus tc_validate_partition(const struct TcGraph *g,
                                    const struct TcPartition *p,
                                    int32_t *out);

// Clustering accuracy under the best one-to-one cluster/label map.
//
// # Safety
// `pred` and `truth` must hold `n` elements; `out` must be writable.
enum TcStatus tc_accuracy(const size_t *pred, const size_t *truth, size_t n, double *out);

// `sqrt((alpha + beta) / 2)`. Accepts `beta = 0`.
//
// # Safety
// `out` must be writable.
enum TcStatus tc_analytic_threshold(double alpha, double beta, double *out);

// `logit(1 - p_cut)` with `p_cut` clamped to `[clamp, 1 - clamp]`.
double tc_edge_cost(double p_cut, double clamp);

// Triplet loss of one triplet of `dim`-dimensional embeddings. Gradient
// buffers may be null; otherwise each must hold `dim` elements.
//
// # Safety
// Input arrays must hold `dim` elements; `loss_out` must be writable.
enum TcStatus tc_triplet_loss(enum TcLoss kind,
                              const double *anchor,
                              const double *positive,
                              const double *negative,
                              size_t dim,
                              double alpha,
                              double beta,
                              double *loss_out,
                              double *grad_anchor,
                              double *grad_positive,
                              double *grad_negative);

// Loads a network checkpoint from a JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum TcStatus tc_net_load(const char *path, struct TcNet **out);

// # Safety
// `net` must be null or a handle from `tc_net_load` not yet freed.
void tc_net_free(struct TcNet *net);

// # Safety
// `net` must be a live handle.
size_t tc_net_input_dim(const struct TcNet *net);

// # Safety
// `net` must be a live handle.
size_t tc_net_output_dim(const struct TcNet *net);

// Embeds `n` row-major inputs of the network's input size into `out`,
// which must hold `n * tc_net_output_dim(net)` values.
//
// # Safety
// `net` must be live; buffers must have the stated lengths.
enum TcStatus tc_net_forward(const struct TcNet *net,
                             const double *inputs,
                             size_t n,
                             double *out,
                             size_t out_len);

// k-means++ with Lloyd iterations, best of `restarts` runs. `points` is
// row-major `n x dim`; `assignment` must hold `n` elements.
//
// # Safety
// Buffers must have the stated lengths; `inertia_out` may be null.
enum TcStatus tc_kmeans(const double *points,
                        size_t n,
                        size_t dim,
                        size_t k,
                        size_t restarts,
                        uint64_t seed,
                        size_t *assignment,
                        double *inertia_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIPLETCUT_H */
