#ifndef PROXYQAS_H
#define PROXYQAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of an API call.
typedef enum QpStatus {
  QP_STATUS_OK = 0,
  QP_STATUS_NULL_POINTER = 1,
  QP_STATUS_INVALID_UTF8 = 2,
  QP_STATUS_INVALID_ARGUMENT = 3,
  QP_STATUS_INVALID_CIRCUIT = 4,
  QP_STATUS_DEVICE = 5,
  QP_STATUS_CONFIG = 6,
  QP_STATUS_NUMERICAL = 7,
  QP_STATUS_DATASET = 8,
  QP_STATUS_IO = 9,
  QP_STATUS_PARSE = 10,
  QP_STATUS_PANIC = 11,
} QpStatus;

// Opaque circuit handle.
typedef struct QpCircuit QpCircuit;

// Opaque device handle.
typedef struct QpDevice QpDevice;

// Structural counts of a circuit.
typedef struct QpCircuitStats {
  uintptr_t n_qubits;
  uintptr_t depth;
  uintptr_t gate_count;
  uintptr_t cnot_count;
  uintptr_t param_count;
} QpCircuitStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next API call on the same thread.
const char *qp_last_error(void);

// Library version as a static NUL-terminated string.
const char *qp_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void qp_string_free(char *s);

// Parses a circuit from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum QpStatus qp_circuit_from_json(const char *json, struct QpCircuit **out);

// Serializes a circuit to JSON. Free the result with [`qp_string_free`].
//
// # Safety
// `circuit` must be a live handle; `out` must be writable.
enum QpStatus qp_circuit_to_json(const struct QpCircuit *circuit, char **out);

// # Safety
// `circuit` must be a live handle or NULL.
void qp_circuit_free(struct QpCircuit *circuit);

// # Safety
// `circuit` must be a live handle; `out` must be writable.
enum QpStatus qp_circuit_stats(const struct QpCircuit *circuit, struct QpCircuitStats *out);

// The bundled default device.
//
// # Safety
// `out` must be writable.
enum QpStatus qp_device_default(struct QpDevice **out);

// Loads a calibration file from `path`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum QpStatus qp_device_load(const char *path, struct QpDevice **out);

// Parses calibration JSON held in memory.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum QpStatus qp_device_from_json(const char *json, struct QpDevice **out);

// # Safety
// `device` must be a live handle or NULL.
void qp_device_free(struct QpDevice *device);

// Calibrated success probability of `circuit` on `device`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum QpStatus qp_hardware_fidelity(const struct QpCircuit *circuit,
                                   const struct QpDevice *device,
                                   double *out);

// Exact fidelity Gram matrix of `m` points with `d` features each (row
// major). `out` receives `m * m` values, row major.
//
// # Safety
// `xs` holds `m * d` values, `theta` holds `n_theta`, `out` has room for
// `m * m`.
enum QpStatus qp_gram(const struct QpCircuit *circuit,
                      const double *xs,
                      uintptr_t m,
                      uintptr_t d,
                      const double *theta,
                      uintptr_t n_theta,
                      double *out);

// Kernel-target alignment of an `m × m` Gram matrix against ±1 labels.
//
// # Safety
// `gram` holds `m * m` values, `labels` holds `m`; `out` must be writable.
enum QpStatus qp_kta(const double *gram, uintptr_t m, const double *labels, double *out);

// Frobenius distance of an `m × m` Gram matrix from the all-ones matrix.
//
// # Safety
// `gram` holds `m * m` values; `out` must be writable.
enum QpStatus qp_concentration(const double *gram, uintptr_t m, double *out);

// Runs a full search from TOML config text and returns the run report as
// JSON. When `out_dir` is not NULL the result files are also written there.
//
// # Safety
// `config_toml` must be a NUL-terminated string, `out_dir` one or NULL, and
// `report_json` writable.
enum QpStatus qp_run_search(const char *config_toml, const char *out_dir, char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXYQAS_H */
