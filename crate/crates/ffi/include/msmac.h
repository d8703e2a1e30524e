#ifndef MSMAC_H
#define MSMAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsmacStatus {
  MSMAC_STATUS_OK = 0,
  MSMAC_STATUS_NULL_POINTER = 1,
  MSMAC_STATUS_INVALID_ARGUMENT = 2,
  MSMAC_STATUS_IO = 3,
  MSMAC_STATUS_PARSE = 4,
  MSMAC_STATUS_SCHEMA_VERSION = 5,
  MSMAC_STATUS_OVERLOAD = 6,
  MSMAC_STATUS_NO_FEASIBLE_CANDIDATE = 7,
  MSMAC_STATUS_NOT_FOUND = 8,
  MSMAC_STATUS_RUNTIME = 9,
  MSMAC_STATUS_PANIC = 10,
} MsmacStatus;

typedef struct MsmacAssignment MsmacAssignment;

typedef struct MsmacModel MsmacModel;

typedef struct MsmacReport MsmacReport;

typedef struct MsmacScenario MsmacScenario;

/**
 * Protocol parameters, durations in seconds.
 */
typedef struct MsmacParams {
  uint32_t n_m;
  uint32_t r_h;
  uint32_t r_r;
  uint32_t r_l;
  double t_m;
  double t_x;
} MsmacParams;

/**
 * Simulation switches; `warmup` is in seconds.
 */
typedef struct MsmacSimOptions {
  double duration;
  double warmup;
  uint64_t seed;
  bool buffer;
  bool synccs;
} MsmacSimOptions;

/**
 * Per-class results; delays in seconds.
 */
typedef struct MsmacClassStats {
  size_t devices;
  double mean_delay;
  double max_delay;
  double mean_collision;
  double max_collision;
  bool qos_met;
} MsmacClassStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 */
const char *msmac_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *msmac_version(void);

/**
 * Parameters with the default 9 us mini-slot and 133 us transmission.
 */
struct MsmacParams msmac_params_new(uint32_t n_m, uint32_t r_h, uint32_t r_r, uint32_t r_l);

enum MsmacStatus msmac_params_validate(const struct MsmacParams *params);

/**
 * Builds the scenario described by a TOML config's `[devices]` and `[qos]`.
 */
enum MsmacStatus msmac_scenario_from_config(const char *path,
                                            uint64_t seed,
                                            struct MsmacScenario **out);

enum MsmacStatus msmac_scenario_load(const char *path, struct MsmacScenario **out);

enum MsmacStatus msmac_scenario_save(const struct MsmacScenario *s, const char *path);

/**
 * Number of devices, or 0 for a null handle.
 */
size_t msmac_scenario_device_count(const struct MsmacScenario *s);

void msmac_scenario_free(struct MsmacScenario *s);

/**
 * One assignment pass with guard margin `guard_margin` (1.0 for none).
 * An incomplete assignment is still returned; check
 * `msmac_assignment_success`.
 */
enum MsmacStatus msmac_assign(const struct MsmacScenario *s,
                              const struct MsmacParams *params,
                              double guard_margin,
                              struct MsmacAssignment **out);

/**
 * Tries the default guard ladder from the largest margin down and keeps
 * the first complete assignment. The margin used is written to
 * `out_margin` when non-null.
 */
enum MsmacStatus msmac_assign_auto(const struct MsmacScenario *s,
                                   const struct MsmacParams *params,
                                   struct MsmacAssignment **out,
                                   double *out_margin);

bool msmac_assignment_success(const struct MsmacAssignment *a);

size_t msmac_assignment_assigned_count(const struct MsmacAssignment *a);

/**
 * Anchor of `device_id`; `MSMAC_STATUS_NOT_FOUND` when unassigned.
 */
enum MsmacStatus msmac_assignment_anchor(const struct MsmacAssignment *a,
                                         uint32_t device_id,
                                         uint32_t *out_slot,
                                         uint32_t *out_mini_slot);

enum MsmacStatus msmac_assignment_save(const struct MsmacAssignment *a, const char *path);

void msmac_assignment_free(struct MsmacAssignment *a);

/**
 * Defaults: buffered queues, SyncCS on, 5% warm-up.
 */
struct MsmacSimOptions msmac_sim_options_new(double duration, uint64_t seed);

enum MsmacStatus msmac_simulate(const struct MsmacScenario *s,
                                const struct MsmacParams *params,
                                const struct MsmacAssignment *a,
                                const struct MsmacSimOptions *opts,
                                struct MsmacReport **out);

/**
 * True when every device met its class thresholds.
 */
bool msmac_report_qos_met(const struct MsmacReport *r);

/**
 * Statistics of class 0 (HP), 1 (RP) or 2 (LP); `MSMAC_STATUS_NOT_FOUND`
 * when the class has no devices.
 */
enum MsmacStatus msmac_report_class(const struct MsmacReport *r,
                                    uint32_t class_,
                                    struct MsmacClassStats *out);

enum MsmacStatus msmac_report_save(const struct MsmacReport *r, const char *path);

void msmac_report_free(struct MsmacReport *r);

enum MsmacStatus msmac_model_load(const char *path, struct MsmacModel **out);

void msmac_model_free(struct MsmacModel *m);

/**
 * Ranks `count` candidates with the surrogate and writes the index of the
 * best one to `out_index` and its relative slack to `out_slack` (if
 * non-null).
 */
enum MsmacStatus msmac_select(const struct MsmacModel *m,
                              const struct MsmacScenario *s,
                              const struct MsmacParams *candidates,
                              size_t count,
                              size_t *out_index,
                              double *out_slack);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSMAC_H */
