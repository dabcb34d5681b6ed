#ifndef OMPAC_H
#define OMPAC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OmpacStatus {
  OMPAC_STATUS_OK = 0,
  OMPAC_STATUS_NULL_POINTER = 1,
  OMPAC_STATUS_INVALID_ARGUMENT = 2,
  OMPAC_STATUS_CONFIG = 3,
  OMPAC_STATUS_RUNTIME = 4,
  OMPAC_STATUS_BUFFER_TOO_SMALL = 5,
  OMPAC_STATUS_PANIC = 6,
} OmpacStatus;

typedef enum OmpacActivation {
  OMPAC_ACTIVATION_SIL = 0,
  OMPAC_ACTIVATION_DSIL = 1,
} OmpacActivation;

/**
 * Opaque Tetris board.
 */
typedef struct OmpacBoard OmpacBoard;

/**
 * Opaque feed-forward value network.
 */
typedef struct OmpacNetwork OmpacNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null.
 */
const char *ompac_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ompac_version(void);

/**
 * Creates a randomly initialised network. `hidden == 0` gives a linear map.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum OmpacStatus ompac_network_new(size_t inputs,
                                   size_t hidden,
                                   size_t outputs,
                                   enum OmpacActivation activation,
                                   uint64_t seed,
                                   struct OmpacNetwork **out);

/**
 * Number of parameters in `net`.
 *
 * # Safety
 * `net` must be null or a live handle from [`ompac_network_new`].
 */
size_t ompac_network_param_count(const struct OmpacNetwork *net);

/**
 * Copies the parameter vector into `buf` (length `len`).
 *
 * # Safety
 * `net` must be a live handle; `buf` must hold `len` doubles.
 */
enum OmpacStatus ompac_network_get_params(const struct OmpacNetwork *net, double *buf, size_t len);

/**
 * Overwrites the parameter vector from `buf` (exactly `len` doubles).
 *
 * # Safety
 * `net` must be a live handle; `buf` must hold `len` doubles.
 */
enum OmpacStatus ompac_network_set_params(struct OmpacNetwork *net, const double *buf, size_t len);

/**
 * Evaluates the network on `input` (length `input_len`) and writes all
 * outputs into `output` (length `output_len`).
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum OmpacStatus ompac_network_forward(const struct OmpacNetwork *net,
                                       const double *input,
                                       size_t input_len,
                                       double *output,
                                       size_t output_len);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void ompac_network_free(struct OmpacNetwork *net);

/**
 * Creates an empty board.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum OmpacStatus ompac_board_new(size_t width, size_t height, struct OmpacBoard **out);

/**
 * Number of placements available for `piece` (0..7 in the order
 * S, Z, O, I, J, L, T).
 *
 * # Safety
 * `board` must be a live handle.
 */
size_t ompac_board_action_count(const struct OmpacBoard *board, uint32_t piece);

/**
 * Drops `piece` in `rotation` with its leftmost cell in `column`. On a
 * non-terminal drop the board is updated in place and completed rows are
 * cleared; on a terminal drop the board is unchanged.
 *
 * # Safety
 * `board` must be a live handle; out pointers may be null.
 */
enum OmpacStatus ompac_board_drop(struct OmpacBoard *board,
                                  uint32_t piece,
                                  uint32_t rotation,
                                  uint32_t column,
                                  uint32_t *cleared,
                                  bool *terminal);

/**
 * Number of holes (empty cells below a column's top filled cell).
 *
 * # Safety
 * `board` must be null or a live handle.
 */
uint32_t ompac_board_holes(const struct OmpacBoard *board);

/**
 * Height of column `x`, or 0 for an invalid column.
 *
 * # Safety
 * `board` must be null or a live handle.
 */
size_t ompac_board_column_height(const struct OmpacBoard *board, size_t x);

/**
 * Length of the binary feature vector for the given layout.
 */
size_t ompac_encoding_len(size_t width, size_t max_height, size_t max_diff, size_t max_holes);

/**
 * Writes the binary features of `board` into `out`.
 *
 * # Safety
 * `board` must be a live handle and `out` valid for `out_len` doubles.
 */
enum OmpacStatus ompac_board_encode(const struct OmpacBoard *board,
                                    size_t max_height,
                                    size_t max_diff,
                                    size_t max_holes,
                                    double *out,
                                    size_t out_len);

/**
 * # Safety
 * `board` must be null or a handle not yet freed.
 */
void ompac_board_free(struct OmpacBoard *board);

/**
 * Stochastic universal sampling: draws `slots` indices into `fitness`
 * (length `n`) with probability proportional to fitness.
 *
 * # Safety
 * `fitness` must hold `n` doubles and `out` `slots` indices.
 */
enum OmpacStatus ompac_sus_select(const double *fitness,
                                  size_t n,
                                  size_t slots,
                                  uint64_t seed,
                                  size_t *out);

/**
 * Runs one experiment described by a JSON run configuration. The artifact
 * directory path is written, NUL-terminated, into `dir_buf` when it fits.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `dir_buf` may be null or
 * valid for `dir_buf_len` bytes.
 */
enum OmpacStatus ompac_run_experiment(const char *config_json, char *dir_buf, size_t dir_buf_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OMPAC_H */
