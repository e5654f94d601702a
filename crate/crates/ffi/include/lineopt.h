#ifndef LINEOPT_H
#define LINEOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum LineoptStatus {
  LINEOPT_STATUS_OK = 0,
  LINEOPT_STATUS_NULL_POINTER = 1,
  LINEOPT_STATUS_INVALID_ARGUMENT = 2,
  LINEOPT_STATUS_IO = 3,
  LINEOPT_STATUS_PARSE = 4,
  LINEOPT_STATUS_INFEASIBLE_MARGIN = 5,
  LINEOPT_STATUS_INVALID_STATE = 6,
  LINEOPT_STATUS_BUFFER_TOO_SMALL = 7,
  LINEOPT_STATUS_INTERNAL = 8,
} LineoptStatus;

typedef enum LineoptScheme {
  LINEOPT_SCHEME_BASIC = 0,
  LINEOPT_SCHEME_GRAY = 1,
  LINEOPT_SCHEME_PGGRAY = 2,
} LineoptScheme;

typedef enum LineoptSolver {
  LINEOPT_SOLVER_GA1 = 0,
  LINEOPT_SOLVER_GA2 = 1,
  LINEOPT_SOLVER_GAU = 2,
  LINEOPT_SOLVER_SA = 3,
  LINEOPT_SOLVER_PT = 4,
} LineoptSolver;

// Opaque problem catalog.
typedef struct LineoptCatalog LineoptCatalog;

// Opaque encoding of a reduced space.
typedef struct LineoptCodec LineoptCodec;

// Opaque reduced 3-body search space.
typedef struct LineoptSpace LineoptSpace;

typedef struct LineoptCost {
  double total;
  double production_term;
  double idle_term;
} LineoptCost;

typedef struct LineoptSimulation {
  uint64_t monthly_production[12];
  uint64_t annual_production;
  double total_idle_hours;
  uint32_t final_buffers[2];
  struct LineoptCost cost;
} LineoptSimulation;

typedef struct LineoptSolveResult {
  double best_cost;
  uint32_t best_triple[3];
  uint8_t best_config[12];
  size_t evaluations;
} LineoptSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the calling thread's last failure, or null if none. Valid
// until the next failing call on the same thread.
const char *lineopt_last_error(void);

// The built-in default catalog.
//
// # Safety
// `out` must be a valid pointer.
enum LineoptStatus lineopt_catalog_default(struct LineoptCatalog **out);

// Loads a catalog file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LineoptStatus lineopt_catalog_load(const char *path, struct LineoptCatalog **out);

// # Safety
// `catalog` must be null or a handle from this library, not yet freed.
void lineopt_catalog_free(struct LineoptCatalog *catalog);

// Simulates a configuration and returns its cost.
//
// # Safety
// `config` must point to 12 bytes; handles and `out` must be valid.
enum LineoptStatus lineopt_evaluate(const struct LineoptCatalog *catalog,
                                    const uint8_t *config,
                                    struct LineoptCost *out);

// Simulates a configuration and returns production, idle time and cost.
//
// # Safety
// As for [`lineopt_evaluate`].
enum LineoptStatus lineopt_simulate(const struct LineoptCatalog *catalog,
                                    const uint8_t *config,
                                    struct LineoptSimulation *out);

// Reduced 3-body space for a margin (1.0 or more keeps every state).
//
// # Safety
// Handles and `out` must be valid.
enum LineoptStatus lineopt_reduce(const struct LineoptCatalog *catalog,
                                  double margin,
                                  bool free_rates,
                                  struct LineoptSpace **out);

// # Safety
// `space` must be null or a handle from this library, not yet freed.
void lineopt_space_free(struct LineoptSpace *space);

// Number of allowed states of each stage.
//
// # Safety
// `space` must be valid and `sizes` point to 3 writable values.
enum LineoptStatus lineopt_space_stage_sizes(const struct LineoptSpace *space, uint64_t *sizes);

// Configuration addressed by a triple of stage positions.
//
// # Safety
// `triple` must point to 3 values and `config` to 12 writable bytes.
enum LineoptStatus lineopt_space_config(const struct LineoptSpace *space,
                                        const uint32_t *triple,
                                        uint8_t *config);

// Encoding of a space. `chained` keys stage 3 to the chosen stage-2
// estimate instead of stage 1 (PGGray only).
//
// # Safety
// `space` and `out` must be valid.
enum LineoptStatus lineopt_codec_new(const struct LineoptSpace *space,
                                     enum LineoptScheme scheme,
                                     bool chained,
                                     struct LineoptCodec **out);

// # Safety
// `codec` must be null or a handle from this library, not yet freed.
void lineopt_codec_free(struct LineoptCodec *codec);

// Bits per encoded state, or 0 for a null handle.
//
// # Safety
// `codec` must be null or valid.
size_t lineopt_codec_n_bits(const struct LineoptCodec *codec);

// Writes the code of `triple` into `bits` (`len` bytes, at least n_bits).
//
// # Safety
// `triple` must point to 3 values and `bits` to `len` writable bytes.
enum LineoptStatus lineopt_encode(const struct LineoptCodec *codec,
                                  const uint32_t *triple,
                                  uint8_t *bits,
                                  size_t len);

// Decodes `len` bits into a triple; fails with `InvalidState` for codes
// outside the space.
//
// # Safety
// `bits` must point to `len` bytes and `triple` to 3 writable values.
enum LineoptStatus lineopt_decode(const struct LineoptCodec *codec,
                                  const uint8_t *bits,
                                  size_t len,
                                  uint32_t *triple);

// Runs one conventional solver on a reduced space.
//
// # Safety
// Handles and `out` must be valid.
enum LineoptStatus lineopt_solve(const struct LineoptCatalog *catalog,
                                 const struct LineoptSpace *space,
                                 enum LineoptSolver solver,
                                 size_t budget,
                                 uint64_t seed,
                                 struct LineoptSolveResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINEOPT_H */
