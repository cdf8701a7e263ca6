#ifndef RAMAN_NLI_H
#define RAMAN_NLI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Oracle squaring mode.
typedef enum RnliOracleMode {
  RNLI_ORACLE_MODE_EXACT = 0,
  RNLI_ORACLE_MODE_SPLIT = 1,
} RnliOracleMode;

// Status codes; nonzero means failure. Values match the CLI exit codes
// where one exists.
typedef enum RnliStatus {
  RNLI_STATUS_OK = 0,
  RNLI_STATUS_INVALID_ARGUMENT = 1,
  RNLI_STATUS_CONFIG_ERROR = 2,
  RNLI_STATUS_SOLVER_ERROR = 3,
  RNLI_STATUS_QUADRATURE_ERROR = 4,
  RNLI_STATUS_FIT_ERROR = 5,
  RNLI_STATUS_ENGINE_ERROR = 6,
  RNLI_STATUS_INTERNAL_ERROR = 7,
} RnliStatus;

// Opaque, immutable link handle.
typedef struct RnliLink RnliLink;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never freed.
const char *rnli_version(void);

// Message of the most recent failure on this thread.
const char *rnli_last_error_message(void);

// Parse and validate a TOML link description.
//
// On success writes a heap-allocated handle into `out_link`; release it
// with [`rnli_link_free`].
//
// # Safety
// `config_toml` must point to a NUL-terminated UTF-8 string and
// `out_link` to writable storage for one pointer; both must stay valid
// for the duration of the call.
enum RnliStatus rnli_link_parse(const char *config_toml, struct RnliLink **out_link);

// Release a handle returned by [`rnli_link_parse`]; a null pointer is a
// no-op.
//
// # Safety
// `link` must be null or a pointer previously returned by
// [`rnli_link_parse`] that has not been freed yet.
void rnli_link_free(struct RnliLink *link);

// Number of WDM channels in the link; 0 for a null handle.
//
// # Safety
// `link` must be null or a valid handle.
uintptr_t rnli_link_channel_count(const struct RnliLink *link);

// Channel center frequencies in Hz, ascending.
//
// # Safety
// `link` must be a valid handle and `out` must point to at least `len`
// writable doubles.
enum RnliStatus rnli_link_channel_frequencies(const struct RnliLink *link,
                                              double *out,
                                              uintptr_t len);

// Run solve → fit → closed form and write per-channel NLI power (W) at
// the link end into `out`, ordered like the channel frequencies.
//
// # Safety
// `link` must be a valid handle and `out` must point to at least `len`
// writable doubles.
enum RnliStatus rnli_compute_nli(const struct RnliLink *link, double *out, uintptr_t len);

// Run the numeric GN-integral oracle and write per-channel NLI power (W)
// into `out`.
//
// # Safety
// `link` must be a valid handle and `out` must point to at least `len`
// writable doubles.
enum RnliStatus rnli_compute_oracle(const struct RnliLink *link,
                                    enum RnliOracleMode mode,
                                    double *out,
                                    uintptr_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RAMAN_NLI_H */
