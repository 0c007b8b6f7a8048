#ifndef CORONA_LAB_H
#define CORONA_LAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(CLAB_BUILDING_LIBRARY)
#define CLAB_API __attribute__((visibility("default")))
#else
#define CLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clab_status {
  CLAB_OK = 0,
  CLAB_ERR_PARAMETER = 1,
  CLAB_ERR_RESOLUTION = 2,
  CLAB_ERR_DOMAIN = 3,
  CLAB_ERR_CONTAINMENT = 4,
  CLAB_ERR_DISJOINTNESS = 5,
  CLAB_ERR_DEGENERATE = 6,
  CLAB_ERR_CLASSIFICATION = 7,
  CLAB_ERR_CONVERGENCE = 8,
  CLAB_ERR_ASSERTION = 9,
  CLAB_ERR_CONFIG = 10,
  CLAB_ERR_NULL_ARGUMENT = 11,
  CLAB_ERR_INTERNAL = 12
} clab_status;

typedef struct clab_weight clab_weight;
typedef struct clab_operator clab_operator;
typedef struct clab_lattice_pair clab_lattice_pair;
typedef struct clab_report clab_report;

CLAB_API const char* clab_version(void);
CLAB_API const char* clab_status_name(clab_status status);
/* Message of the last failed call on this thread; empty after a successful call. */
CLAB_API const char* clab_last_error(void);

/* Weight from a JSON spec: {"kind": ..., "dim": ..., "level": ..., "params": {...}}. */
CLAB_API clab_status clab_weight_create(const char* spec_json, clab_weight** out);
CLAB_API void clab_weight_free(clab_weight* w);
CLAB_API clab_status clab_weight_size(const clab_weight* w, int64_t* cells);
/* Copies min(capacity, cells) values into buffer. */
CLAB_API clab_status clab_weight_values(const clab_weight* w, double* buffer, size_t capacity);
/* all_cubes = 0: dyadic family; otherwise every grid-aligned cube. */
CLAB_API clab_status clab_weight_a2(const clab_weight* w, int all_cubes, double* out);
CLAB_API clab_status clab_weight_a1(const clab_weight* w, int all_cubes, double* out);

CLAB_API clab_status clab_operator_create(const char* kernel, int dim, int level, clab_operator** out);
CLAB_API void clab_operator_free(clab_operator* op);
/* Norm of T on L^2(w). */
CLAB_API clab_status clab_operator_strong_norm(const clab_operator* op, const clab_weight* w, double* out);
/* Largest cube testing ratio over the dyadic family, both directions. */
CLAB_API clab_status clab_operator_test_constant(const clab_operator* op, const clab_weight* w, double* out);

CLAB_API clab_status clab_lattice_pair_sample(uint64_t seed, int dim, double epsilon, int r, int grid_level,
                                              clab_lattice_pair** out);
CLAB_API void clab_lattice_pair_free(clab_lattice_pair* pair);
/* which = 0 for the mu lattice, 1 for the nu lattice; shift has room for 3 entries. */
CLAB_API clab_status clab_lattice_pair_shift(const clab_lattice_pair* pair, int which, int64_t* shift);
/* Badness of the cube of lattice `which` at `level` with integer index (3 entries). */
CLAB_API clab_status clab_cube_badness(const clab_lattice_pair* pair, int which, int level, const int64_t* index,
                                       int* bad, int* essentially_bad);

/* Runs a CLI subcommand. On success *out holds the report even if some checks failed. */
CLAB_API clab_status clab_run(const char* command, const char* config_json, clab_report** out);
CLAB_API void clab_report_free(clab_report* report);
CLAB_API const char* clab_report_output(const clab_report* report);
CLAB_API const char* clab_report_format(const clab_report* report);
CLAB_API const char* clab_report_config(const clab_report* report);
CLAB_API size_t clab_report_failed_count(const clab_report* report);
CLAB_API const char* clab_report_failed_name(const clab_report* report, size_t i);

#ifdef __cplusplus
}
#endif

#endif
