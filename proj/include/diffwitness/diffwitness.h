#ifndef DIFFWITNESS_H
#define DIFFWITNESS_H

/* C interface to the diffwitness library. Every call returns a dw_status;
 * on failure dw_last_error() describes the problem (per thread). Strings
 * returned through char** are owned by the caller and released with
 * dw_string_free. */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DW_API __declspec(dllexport)
#else
#define DW_API __attribute__((visibility("default")))
#endif

typedef enum dw_status {
  DW_OK = 0,
  DW_ERR_IO = 1,
  DW_ERR_PARSE = 2,
  DW_ERR_DEGENERATE = 3,
  DW_ERR_INVALID_ARGUMENT = 4,
  DW_ERR_INTERNAL = 5
} dw_status;

typedef struct dw_shape dw_shape;

/* Row-major rotation and translation. */
typedef struct dw_pose {
  double R[9];
  double t[3];
} dw_pose;

typedef struct dw_shape_info {
  int pieces;
  int vertices;
  int triangles;
  double diag;
} dw_shape_info;

typedef struct dw_witness {
  double x1[3];
  double x2[3];
  double normal[3];
  double signed_distance;
  int penetrating;
  int piece1;
  int piece2;
  int converged;
} dw_witness;

typedef struct dw_run_options {
  int workers;       /* <= 0 means 1 */
  int has_seed;      /* nonzero overrides the config seed */
  unsigned long long seed;
} dw_run_options;

DW_API const char* dw_version(void);
DW_API const char* dw_last_error(void);
DW_API const char* dw_status_name(dw_status s);
DW_API void dw_string_free(char* s);

DW_API dw_status dw_shape_load_obj(const char* path, dw_shape** out);
DW_API dw_status dw_shape_load_composite(const char* dir, dw_shape** out);
DW_API dw_status dw_shape_bundled(const char* name, dw_shape** out);
/* Bundled name, OBJ file or composite directory. */
DW_API dw_status dw_shape_load(const char* source, dw_shape** out);
DW_API void dw_shape_free(dw_shape* shape);
DW_API dw_status dw_shape_info_get(const dw_shape* shape, dw_shape_info* out);
/* Comma-separated bundled shape names. */
DW_API dw_status dw_bundled_names(char** out);

DW_API dw_status dw_detect(const dw_shape* s1, const dw_pose* p1, const dw_shape* s2, const dw_pose* p2,
                           dw_witness* out);

/* Runs a benchmark or sweep described by a JSON config. Writes results.csv
 * and summary.json under out_dir (created if missing) when out_dir is not
 * NULL, and returns the summary JSON through summary_json when that is not
 * NULL. */
DW_API dw_status dw_bench_run(const char* config_json, const char* out_dir, const dw_run_options* opts,
                              char** summary_json);

/* Gradient check over random configurations of a shape pair. The report is
 * JSON; *passed is set to 1 or 0. */
DW_API dw_status dw_gradcheck(const char* config_json, const dw_run_options* opts, char** report_json,
                              int* passed);

#ifdef __cplusplus
}
#endif

#endif
