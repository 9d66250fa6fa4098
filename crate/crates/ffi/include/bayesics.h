#ifndef BAYESICS_H
#define BAYESICS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum BayesicsStatus {
  BAYESICS_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  BAYESICS_STATUS_NULL_POINTER = 1,
  /*
   A string argument was not valid UTF-8.
   */
  BAYESICS_STATUS_INVALID_UTF8 = 2,
  /*
   Command-line style arguments could not be parsed.
   */
  BAYESICS_STATUS_USAGE = 3,
  BAYESICS_STATUS_FORMULA = 4,
  BAYESICS_STATUS_DATA = 5,
  BAYESICS_STATUS_DESIGN = 6,
  BAYESICS_STATUS_INVALID_ARGUMENT = 7,
  BAYESICS_STATUS_NUMERICAL = 8,
  BAYESICS_STATUS_CONVERGENCE = 9,
  BAYESICS_STATUS_IO = 10,
  /*
   An internal panic was caught at the boundary.
   */
  BAYESICS_STATUS_PANIC = 11,
} BayesicsStatus;

/*
 A loaded data set.
 */
typedef struct BayesicsDataset BayesicsDataset;

/*
 A finished analysis serialized as a JSON report.
 */
typedef struct BayesicsReport BayesicsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or null if the last
 fallible call succeeded. Valid until the next fallible call on this thread.
 */
const char *bayesics_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *bayesics_version(void);

/*
 Reads a CSV file into a new dataset handle.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BayesicsStatus bayesics_dataset_read_csv(const char *path, struct BayesicsDataset **out);

/*
 Parses CSV text (header row first) into a new dataset handle.

 # Safety
 `csv` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BayesicsStatus bayesics_dataset_parse_csv(const char *csv, struct BayesicsDataset **out);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `dataset` must be null or a live handle.
 */
size_t bayesics_dataset_nrows(const struct BayesicsDataset *dataset);

/*
 Number of columns, or 0 for a null handle.

 # Safety
 `dataset` must be null or a live handle.
 */
size_t bayesics_dataset_ncols(const struct BayesicsDataset *dataset);

/*
 Name of column `index`, owned by the handle; null when out of range.

 # Safety
 `dataset` must be null or a live handle.
 */
const char *bayesics_dataset_column_name(const struct BayesicsDataset *dataset, size_t index);

/*
 Releases a dataset handle. Null is ignored.

 # Safety
 `dataset` must be null or a handle not yet freed.
 */
void bayesics_dataset_free(struct BayesicsDataset *dataset);

/*
 Fits a linear model with the default g-prior to an in-memory dataset.

 # Safety
 `dataset` must be a live handle, `formula` a NUL-terminated string and
 `out` a valid pointer.
 */
enum BayesicsStatus bayesics_lm(const struct BayesicsDataset *dataset,
                                const char *formula,
                                double ci_level,
                                struct BayesicsReport **out);

/*
 Runs one analysis exactly as the command-line tool would, given its
 arguments without the program name. Formatting options are ignored: the
 report is always JSON.

 # Safety
 `argv` must point to `argc` NUL-terminated strings and `out` must be a
 valid pointer.
 */
enum BayesicsStatus bayesics_run(size_t argc, const char *const *argv, struct BayesicsReport **out);

/*
 JSON text of the report, owned by the handle.

 # Safety
 `report` must be null or a live handle.
 */
const char *bayesics_report_json(const struct BayesicsReport *report);

/*
 Name of the command that produced the report, owned by the handle.

 # Safety
 `report` must be null or a live handle.
 */
const char *bayesics_report_command(const struct BayesicsReport *report);

/*
 Releases a report handle. Null is ignored.

 # Safety
 `report` must be null or a handle not yet freed.
 */
void bayesics_report_free(struct BayesicsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAYESICS_H */
