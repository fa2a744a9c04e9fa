#ifndef UOAN_H
#define UOAN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UoanStatus {
  UOAN_STATUS_OK = 0,
  UOAN_STATUS_NULL_POINTER = 1,
  UOAN_STATUS_INVALID_UTF8 = 2,
  UOAN_STATUS_CONFIG = 3,
  UOAN_STATUS_IO = 4,
  UOAN_STATUS_SERIALIZATION = 5,
  /**
   * A computation was asked for something outside its domain, such as an
   * unknown node id or a degenerate geometry.
   */
  UOAN_STATUS_DOMAIN = 6,
  UOAN_STATUS_OUT_OF_RANGE = 7,
  UOAN_STATUS_PANIC = 8,
} UoanStatus;

/**
 * Parsed and validated scenario.
 */
typedef struct UoanConfig UoanConfig;

/**
 * Routing graph of one trial.
 */
typedef struct UoanGraph UoanGraph;

/**
 * Aggregated sweep output.
 */
typedef struct UoanSweep UoanSweep;

/**
 * Localization aggregates for one ranging technology. NaN when the mode
 * was not run.
 */
typedef struct UoanModeStats {
  double rmse_m;
  double stderr_rmse_m;
  double rmse_all_m;
  double stderr_rmse_all_m;
  double localized_frac;
} UoanModeStats;

typedef struct UoanSweepPoint {
  size_t n_faces;
  double divergence_rad;
  size_t trials;
  double mean_e2e_bps;
  double stderr_e2e_bps;
  double conn_prob;
  struct UoanModeStats acoustic;
  struct UoanModeStats optical;
  struct UoanModeStats hybrid;
} UoanSweepPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *uoan_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uoan_version(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void uoan_string_free(char *s);

/**
 * Built-in defaults.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum UoanStatus uoan_config_default(struct UoanConfig **out);

/**
 * Loads a TOML scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for a pointer write.
 */
enum UoanStatus uoan_config_load(const char *path, struct UoanConfig **out);

/**
 * Parses a TOML scenario held in memory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` valid for a pointer write.
 */
enum UoanStatus uoan_config_parse(const char *toml, struct UoanConfig **out);

/**
 * Applies one `dotted.key=value` override. On failure the config is left
 * unchanged.
 *
 * # Safety
 * `cfg` must be a live handle and `assignment` a NUL-terminated string.
 */
enum UoanStatus uoan_config_set(struct UoanConfig *cfg, const char *assignment);

/**
 * Serializes the config as TOML. Free the result with `uoan_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for a pointer write.
 */
enum UoanStatus uoan_config_to_toml(const struct UoanConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void uoan_config_free(struct UoanConfig *cfg);

/**
 * Runs the configured sweep. `threads` = 0 uses every core; results do not
 * depend on it.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for a pointer write.
 */
enum UoanStatus uoan_sweep_run(const struct UoanConfig *cfg,
                               size_t threads,
                               struct UoanSweep **out);

/**
 * Runs the sweep and writes `csv_path` plus its `.manifest.toml`.
 * `out` may be NULL when the in-memory result is not needed.
 *
 * # Safety
 * `cfg` must be a live handle, `csv_path` a NUL-terminated string, and
 * `out` NULL or valid for a pointer write.
 */
enum UoanStatus uoan_sweep_run_to_file(const struct UoanConfig *cfg,
                                       const char *csv_path,
                                       size_t threads,
                                       struct UoanSweep **out);

/**
 * # Safety
 * `sweep` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_sweep_len(const struct UoanSweep *sweep, size_t *out);

/**
 * # Safety
 * `sweep` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_sweep_point(const struct UoanSweep *sweep,
                                 size_t index,
                                 struct UoanSweepPoint *out);

/**
 * The result table as CSV text. Free with `uoan_string_free`.
 *
 * # Safety
 * `sweep` must be a live handle and `out` valid for a pointer write.
 */
enum UoanStatus uoan_sweep_to_csv(const struct UoanSweep *sweep, char **out);

/**
 * # Safety
 * `sweep` must be NULL or a handle not yet freed.
 */
void uoan_sweep_free(struct UoanSweep *sweep);

/**
 * Builds the routing graph of trial `trial` in the configured routing mode.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for a pointer write.
 */
enum UoanStatus uoan_graph_build(const struct UoanConfig *cfg,
                                 uint64_t trial,
                                 struct UoanGraph **out);

/**
 * Node count including the sink.
 *
 * # Safety
 * `graph` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_graph_node_count(const struct UoanGraph *graph, size_t *out);

/**
 * # Safety
 * `graph` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_graph_edge_count(const struct UoanGraph *graph, size_t *out);

/**
 * # Safety
 * `graph` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_graph_sink(const struct UoanGraph *graph, size_t *out);

/**
 * Bottleneck rate of the widest path from `src` to `dst` in bit/s, 0 when
 * unreachable.
 *
 * # Safety
 * `graph` must be a live handle and `out` valid for a write.
 */
enum UoanStatus uoan_graph_widest_rate(const struct UoanGraph *graph,
                                       size_t src,
                                       size_t dst,
                                       double *out);

/**
 * End-to-end rate of every node to the sink, written to `rates[0..len]`
 * indexed by node id. The sink's own entry is 0. `len` must equal the
 * node count.
 *
 * # Safety
 * `graph` must be a live handle and `rates` valid for `len` writes.
 */
enum UoanStatus uoan_graph_e2e_rates(const struct UoanGraph *graph, double *rates, size_t len);

/**
 * The graph as JSON. Free with `uoan_string_free`.
 *
 * # Safety
 * `graph` must be a live handle and `out` valid for a pointer write.
 */
enum UoanStatus uoan_graph_to_json(const struct UoanGraph *graph, char **out);

/**
 * # Safety
 * `graph` must be NULL or a handle not yet freed.
 */
void uoan_graph_free(struct UoanGraph *graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UOAN_H */
