#ifndef REACHGUARD_H
#define REACHGUARD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_ARGUMENT = 2,
  RG_STATUS_IO = 3,
  RG_STATUS_PARSE = 4,
  RG_STATUS_INVALID_NETWORK = 5,
  RG_STATUS_VERIFICATION = 6,
  RG_STATUS_BUFFER_TOO_SMALL = 7,
  RG_STATUS_INTERNAL = 8,
} RgStatus;

typedef enum RgVerdictKind {
  RG_VERDICT_KIND_SAFE = 0,
  RG_VERDICT_KIND_UNSAFE = 1,
  /**
   * The flowpipe could not be computed; treat as unsafe.
   */
  RG_VERDICT_KIND_FAILURE = 2,
} RgVerdictKind;

typedef enum RgTangentialSource {
  /**
   * Rotate the robot-to-obstacle vector.
   */
  RG_TANGENTIAL_SOURCE_UM = 0,
  /**
   * Rotate the vector to the standoff point.
   */
  RG_TANGENTIAL_SOURCE_UP = 1,
} RgTangentialSource;

/**
 * Opaque network handle.
 */
typedef struct RgNetwork RgNetwork;

typedef struct RgVerificationSettings {
  size_t steps;
  double delta;
  uint32_t tm_degree;
  size_t bp_order;
  bool symbolic_remainder;
  size_t substeps;
} RgVerificationSettings;

typedef struct RgPose {
  double x;
  double y;
  double theta;
} RgPose;

typedef struct RgObstacle {
  double x;
  double y;
  double radius;
} RgObstacle;

/**
 * Rectangular world `[0, width] x [0, height]`.
 */
typedef struct RgWorld {
  double width;
  double height;
  double robot_radius;
} RgWorld;

typedef struct RgVerdict {
  enum RgVerdictKind kind;
  /**
   * Control period of the first violation, -1 if none.
   */
  int64_t violation_step;
  /**
   * Index of the violated obstacle, -1 for a wall or no violation.
   */
  int64_t violation_obstacle;
  double runtime_seconds;
  /**
   * Flowpipe segments computed.
   */
  size_t segments;
} RgVerdict;

/**
 * Axis-aligned x-y hull of one flowpipe segment.
 */
typedef struct RgBox {
  double t_start;
  double t_end;
  double x_lo;
  double x_hi;
  double y_lo;
  double y_hi;
} RgBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rg_version(void);

/**
 * Loads a JSON weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RgStatus rg_network_load(const char *path, struct RgNetwork **out);

/**
 * Parses a weight document held in memory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RgStatus rg_network_from_json(const char *json, struct RgNetwork **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void rg_network_free(struct RgNetwork *net);

/**
 * Input dimension, 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rg_network_input_dim(const struct RgNetwork *net);

/**
 * Output dimension, 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rg_network_output_dim(const struct RgNetwork *net);

/**
 * Exact forward pass.
 *
 * # Safety
 * `input` must hold `n_input` doubles and `output` room for `n_output`.
 */
enum RgStatus rg_network_eval(const struct RgNetwork *net,
                              const double *input,
                              size_t n_input,
                              double *output,
                              size_t n_output);

/**
 * The default verification settings: 10 steps of 0.2 s, TM degree 2,
 * Bernstein order 2, symbolic remainders, 10 segments per step.
 */
struct RgVerificationSettings rg_verification_default(void);

/**
 * Checks whether the network keeps every pose in the estimate box clear of
 * the obstacles and walls over the verification horizon.
 *
 * `boxes` may be null when `box_capacity` is 0. When non-null, up to
 * `box_capacity` segment hulls are written and `n_boxes` (if non-null)
 * receives the number written.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `uncertainty` holds 3
 * doubles (x, y, theta half-widths).
 */
enum RgStatus rg_verify(const struct RgNetwork *net,
                        struct RgPose estimate,
                        const double *uncertainty,
                        const struct RgObstacle *obstacles,
                        size_t n_obstacles,
                        struct RgWorld world,
                        struct RgVerificationSettings settings,
                        struct RgVerdict *verdict,
                        struct RgBox *boxes,
                        size_t box_capacity,
                        size_t *n_boxes);

/**
 * Geometric avoidance control with standoff distance `d`.
 *
 * # Safety
 * `v` and `omega` must be writable.
 */
enum RgStatus rg_kb_control(struct RgPose pose,
                            struct RgObstacle obstacle,
                            double d,
                            enum RgTangentialSource source,
                            double *v,
                            double *omega);

/**
 * Certified bound on `max |ReLU(y) - B(y)|` over `[lo, hi]` for the
 * Bernstein interpolant `B` of the given order.
 *
 * # Safety
 * `error_bound` must be writable.
 */
enum RgStatus rg_bernstein_relu_error(double lo, double hi, size_t order, double *error_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REACHGUARD_H */
