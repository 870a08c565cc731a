#ifndef CO2NET_H
#define CO2NET_H

/* Generated by cbindgen from co2net-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of an API call.
typedef enum Co2netStatus {
  CO2NET_STATUS_OK = 0,
  // A pointer argument was null or otherwise unusable.
  CO2NET_STATUS_USAGE = 1,
  // The configuration or an input document failed validation.
  CO2NET_STATUS_VALIDATION = 3,
  // A file could not be read.
  CO2NET_STATUS_IO = 4,
  // The requested model is infeasible.
  CO2NET_STATUS_INFEASIBLE = 5,
  // The solver budget ran out without a usable incumbent.
  CO2NET_STATUS_SOLVER_LIMIT = 6,
  // An internal error; details via `co2net_last_error`.
  CO2NET_STATUS_INTERNAL = 7,
} Co2netStatus;

// An opened run: the parsed configuration plus lazily built state.
typedef struct Co2netRun Co2netRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// ABI revision of this header.
uint32_t co2net_abi_version(void);

// Returns and clears the last error message, or null when none is pending.
// The caller owns the string.
char *co2net_last_error(void);

// Releases a string returned by this library. Null is ignored.
void co2net_string_free(char *s);

// Opens a run from a TOML configuration file. On success `*out` owns the
// handle, to be released with [`co2net_run_close`].
//
// # Safety
// `config_path` must be a valid NUL-terminated string and `out` a valid
// pointer.
enum Co2netStatus co2net_run_open(const char *config_path, struct Co2netRun **out);

// Releases a run handle. Null is ignored.
//
// # Safety
// `run` must have come from [`co2net_run_open`] and not be used afterwards.
void co2net_run_close(struct Co2netRun *run);

// Hex SHA-256 of the loaded configuration bytes.
//
// # Safety
// `run` must be a live handle, `out` a valid pointer.
enum Co2netStatus co2net_config_hash(struct Co2netRun *run, char **out);

// Builds (or returns the cached) candidate graph as a JSON document with
// nodes, per-scenario demands and arcs.
//
// # Safety
// `run` must be a live handle, `out` a valid pointer.
enum Co2netStatus co2net_build_graph(struct Co2netRun *run, char **out);

// The piecewise-linear trend table (pinned or fitted) as JSON.
//
// # Safety
// `run` must be a live handle, `out` a valid pointer.
enum Co2netStatus co2net_fit_trends(struct Co2netRun *run, char **out);

// Solves `model` ("m1", "m2" or "regret") and returns the plan as JSON.
// `scenario` may be null; m1/m2 then use the initial scenario and the
// regret model always spans all scenarios. A solver that stops on its
// budget still writes the incumbent but returns `SOLVER_LIMIT`.
//
// # Safety
// `run` must be a live handle; `model` a valid NUL-terminated string;
// `scenario` null or valid; `out` a valid pointer.
enum Co2netStatus co2net_solve(struct Co2netRun *run,
                               const char *model,
                               const char *scenario,
                               char **out);

// Solves every model and returns the comparison report as JSON:
// per-scenario totals for m1/m2/regret plus potential, regret, benefit and
// the system regret.
//
// # Safety
// `run` must be a live handle, `out` a valid pointer.
enum Co2netStatus co2net_report(struct Co2netRun *run, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CO2NET_H */
