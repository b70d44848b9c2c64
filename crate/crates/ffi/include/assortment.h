#ifndef ASSORTMENT_FFI_H
#define ASSORTMENT_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AsmStatus {
  ASM_STATUS_OK = 0,
  ASM_STATUS_NULL_POINTER = 1,
  ASM_STATUS_INVALID_UTF8 = 2,
  ASM_STATUS_SCHEMA = 3,
  ASM_STATUS_VALIDATION = 4,
  ASM_STATUS_CONFIG = 5,
  ASM_STATUS_ORACLE = 6,
  ASM_STATUS_ASSERTION = 7,
  ASM_STATUS_IO = 8,
  ASM_STATUS_BUFFER_TOO_SMALL = 9,
  ASM_STATUS_PANIC = 10,
} AsmStatus;

typedef enum AsmNoiseMode {
  ASM_NOISE_MODE_NONE = 0,
  ASM_NOISE_MODE_FIXED = 1,
  ASM_NOISE_MODE_SEEDED_UNIFORM = 2,
} AsmNoiseMode;

// Opaque product universe.
typedef struct AsmInstance AsmInstance;

// Opaque solver output.
typedef struct AsmReport AsmReport;

typedef struct AsmSolveOptions {
  uintptr_t seed_size;
  uintptr_t capacity;
  uint32_t exchange_budget;
  enum AsmNoiseMode noise_mode;
  // ε for fixed noise, ε_max for seeded-uniform noise.
  double eps;
  uint64_t noise_seed;
  bool trace;
  // Brute-force the optimum and include gap and bounds in the report.
  bool exact;
} AsmSolveOptions;

// Revenue callback: writes the revenue of the `len` product ids at `ids`
// (ascending) to `out_revenue` and returns 0, or returns nonzero on failure.
// Calls are serialized; the callback is never entered concurrently.
typedef int (*AsmRevenueFn)(void *ctx, const uint32_t *ids, uintptr_t len, double *out_revenue);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *asm_last_error_message(void);

void asm_string_free(char *s);

// Parses an instance document (NUL-terminated UTF-8 JSON).
enum AsmStatus asm_instance_from_json(const char *json, struct AsmInstance **out);

// Generates an instance with the default weight and price ranges.
// `capacity == 0` stores no capacity.
enum AsmStatus asm_instance_generate(uintptr_t n,
                                     uint64_t seed,
                                     uintptr_t capacity,
                                     struct AsmInstance **out);

void asm_instance_free(struct AsmInstance *instance);

// Number of products, or 0 for NULL.
uintptr_t asm_instance_len(const struct AsmInstance *instance);

// Canonical JSON for the instance; free with `asm_string_free`.
char *asm_instance_to_json(const struct AsmInstance *instance);

// Exact MNL revenue of the `len` ids at `ids`.
enum AsmStatus asm_mnl_revenue(const struct AsmInstance *instance,
                               const uint32_t *ids,
                               uintptr_t len,
                               double *out_revenue);

// Runs the greedy optimizer with the built-in MNL oracle (optionally noisy)
// and produces a full run report.
enum AsmStatus asm_solve(const struct AsmInstance *instance,
                         const struct AsmSolveOptions *options,
                         struct AsmReport **out);

// Runs the greedy optimizer over products `1..=universe_size` against a
// caller-supplied revenue function.
enum AsmStatus asm_solve_with_oracle(uintptr_t universe_size,
                                     uintptr_t seed_size,
                                     uintptr_t capacity,
                                     uint32_t exchange_budget,
                                     AsmRevenueFn callback,
                                     void *ctx,
                                     struct AsmReport **out);

// Oracle revenue of the best assortment, or NaN for NULL.
double asm_report_revenue(const struct AsmReport *report);

uint64_t asm_report_oracle_calls(const struct AsmReport *report);

// 1 if the report's checks all passed, 0 if not, -1 for NULL. Reports from
// `asm_solve_with_oracle` carry no checks and always return 1.
int asm_report_passed(const struct AsmReport *report);

// Copies the best assortment's ids into `out_ids`. `*out_len` always
// receives the assortment size; if it exceeds `capacity`, nothing is copied
// and `BufferTooSmall` is returned.
enum AsmStatus asm_report_assortment(const struct AsmReport *report,
                                     uint32_t *out_ids,
                                     uintptr_t capacity,
                                     uintptr_t *out_len);

// Report as JSON (the CLI's run-report schema for `asm_solve` results);
// free with `asm_string_free`.
char *asm_report_to_json(const struct AsmReport *report);

void asm_report_free(struct AsmReport *report);

// Exact optimum over assortments of size at most `capacity`, by enumeration.
enum AsmStatus asm_exact(const struct AsmInstance *instance,
                         uintptr_t capacity,
                         double *out_revenue,
                         uint32_t *out_ids,
                         uintptr_t ids_capacity,
                         uintptr_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASSORTMENT_FFI_H */
