/* C interface for the spectral homogenization solver suite.
 *
 * Conventions:
 *  - Every function returns a HOMSPEC_* status code; results come back
 *    as NUL-terminated JSON strings through out-pointers.
 *  - Strings returned through out-pointers are owned by the library and
 *    must be released with homspec_string_free.
 *  - On failure, homspec_last_error() returns a thread-local message
 *    valid until the next failing call on the same thread.
 *  - Handles are not thread-safe; use one handle per thread or add
 *    external locking.
 */

#ifndef HOMSPEC_H
#define HOMSPEC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Success. */
#define HOMSPEC_OK 0
/* A null pointer was passed where a value was required. */
#define HOMSPEC_ERR_NULL 1
/* Input text was not valid UTF-8 or not a valid configuration. */
#define HOMSPEC_ERR_CONFIG 2
/* The solver rejected the problem (unsupported region, failed
 * coercivity, non-convergence, ...). */
#define HOMSPEC_ERR_SOLVE 3
/* A panic was caught at the boundary; the handle may be unusable. */
#define HOMSPEC_ERR_PANIC 4

/* Opaque problem handle: parsed configuration plus derived inputs. */
typedef struct HomspecProblem HomspecProblem;

/* Most recent error message on this thread, or an empty string. */
const char *homspec_last_error(void);

/* Build a problem handle from TOML configuration text. */
int32_t homspec_problem_new(const char *config_toml, HomspecProblem **out);

/* Release a handle created by homspec_problem_new. Null is a no-op. */
void homspec_problem_free(HomspecProblem *handle);

/* Release a string returned through any json_out parameter. */
void homspec_string_free(char *text);

/* Classify the configured parameter point; the JSON report carries the
 * region label and, when supported, the scaling exponents. */
int32_t homspec_classify(const HomspecProblem *handle, char **json_out);

/* Solve the cell problems and assemble the effective operator with
 * coercivity certificates. */
int32_t homspec_effective(const HomspecProblem *handle, char **json_out);

/* Solve the truncated effective spectral problem for the lowest k
 * eigenvalues. */
int32_t homspec_spectrum(const HomspecProblem *handle, size_t k,
                         char **json_out);

/* Solve the original eps-dependent problem directly for the lowest k
 * eigenvalues at the minimal admissible resolution. */
int32_t homspec_direct(const HomspecProblem *handle, double epsilon, size_t k,
                       char **json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HOMSPEC_H */
