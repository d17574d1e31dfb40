/* C interface of the chance-constrained PDE optimization library.
 *
 * All functions return one of the CCPDE_* status codes below (matching the
 * CLI exit-code contract); ccpde_last_error() describes the most recent
 * failure on the calling thread. Handles are opaque and freed with their
 * matching *_free function.
 */
#ifndef CCPDE_H
#define CCPDE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CCPDE_OK 0
#define CCPDE_ERR_VERIFY 1
#define CCPDE_ERR_CONFIG 2
#define CCPDE_ERR_SOLVER 3

typedef struct ccpde_config ccpde_config;

/* Configuration with reference defaults. Never returns NULL. */
ccpde_config* ccpde_config_create(void);
/* Parses a flat sectioned key=value file; NULL on failure. */
ccpde_config* ccpde_config_load(const char* path);
/* Applies one "section.key" override; CCPDE_ERR_CONFIG on bad key/value. */
int ccpde_config_set(ccpde_config* cfg, const char* dotted_key,
                     const char* value);
void ccpde_config_free(ccpde_config* cfg);

/* Hex hash of the canonical configuration, for provenance checks. Writes at
 * most buf_len bytes including the terminator. */
int ccpde_config_hash(const ccpde_config* cfg, char* buf, size_t buf_len);

/* Continuation optimization run; writes report.json, trace.csv, steps.csv,
 * z_opt.json under out_dir. */
int ccpde_run_optimize(const ccpde_config* cfg, const char* out_dir);

/* Retrieves the optimal design of the last successful ccpde_run_optimize on
 * this thread. Returns the number of wells, or 0 if none available; fills at
 * most cap entries. */
size_t ccpde_last_design(double* out, size_t cap);

/* Verification suite. Prints one line per check into *table_out (malloc'd,
 * free with ccpde_free_string) when table_out is non-NULL. Returns CCPDE_OK
 * or CCPDE_ERR_VERIFY. corrupt_gradient != 0 deliberately breaks the
 * parameter gradient to exercise the failure path. */
int ccpde_run_verify(const ccpde_config* cfg, int corrupt_gradient,
                     char** table_out);

/* Chance-vs-samples comparison table at design z (NULL for the target);
 * writes chance_compare.csv under out_dir. */
int ccpde_run_compare_chance(const ccpde_config* cfg, const double* z,
                             size_t z_len, const char* out_dir);

/* Eigenvalue spectra at the optimum across mesh sizes; writes
 * scaling.csv under out_dir. */
int ccpde_run_scaling(const ccpde_config* cfg, const int* meshes,
                      size_t mesh_count, double threshold,
                      const char* out_dir);

/* Draws `count` random fields; writes field_<k>.csv under out_dir. */
int ccpde_run_sample_field(const ccpde_config* cfg, int count,
                           const char* out_dir);

/* Message for the last failing call on this thread ("" when none). */
const char* ccpde_last_error(void);

void ccpde_free_string(char* s);

const char* ccpde_version(void);

#ifdef __cplusplus
}
#endif

#endif /* CCPDE_H */
