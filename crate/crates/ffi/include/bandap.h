#ifndef BANDAP_H
#define BANDAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BandapStatus {
  BANDAP_STATUS_OK = 0,
  BANDAP_STATUS_NULL_POINTER = 1,
  BANDAP_STATUS_INVALID_UTF8 = 2,
  BANDAP_STATUS_MALFORMED_FILE = 3,
  BANDAP_STATUS_REFERENTIAL_ERROR = 4,
  BANDAP_STATUS_VALUE_ERROR = 5,
  BANDAP_STATUS_IO_ERROR = 6,
  BANDAP_STATUS_UNDEFINED_METRIC = 7,
  BANDAP_STATUS_OUT_OF_RANGE = 8,
  BANDAP_STATUS_PANIC = 9,
} BandapStatus;

typedef enum BandapScaleMode {
  BANDAP_SCALE_MODE_ABSOLUTE = 0,
  BANDAP_SCALE_MODE_RELATIVE = 1,
} BandapScaleMode;

typedef enum BandapApKind {
  /**
   * Mean over all IoU thresholds.
   */
  BANDAP_AP_KIND_MEAN = 0,
  BANDAP_AP_KIND_IOU50 = 1,
  BANDAP_AP_KIND_IOU75 = 2,
} BandapApKind;

/**
 * Ground truth with optional detections.
 */
typedef struct BandapDataset BandapDataset;

typedef struct BandapFilterBank BandapFilterBank;

typedef struct BandapReport BandapReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next bandap call on the same thread.
 */
const char *bandap_last_error(void);

/**
 * Loads a COCO annotation file.
 *
 * # Safety
 * `gt_path` must be a NUL-terminated string; `out` must point to writable storage.
 */
enum BandapStatus bandap_dataset_load(const char *gt_path,
                                      enum BandapScaleMode mode,
                                      double reference_resolution,
                                      struct BandapDataset **out);

/**
 * Parses COCO annotation JSON held in memory.
 *
 * # Safety
 * `gt_json` must be a NUL-terminated string; `out` must point to writable storage.
 */
enum BandapStatus bandap_dataset_from_json(const char *gt_json,
                                           enum BandapScaleMode mode,
                                           double reference_resolution,
                                           struct BandapDataset **out);

/**
 * New dataset sharing `gt`'s ground truth, with detections from a COCO result file.
 *
 * # Safety
 * `gt` must be a live handle; `det_path` NUL-terminated; `out` writable.
 */
enum BandapStatus bandap_dataset_with_detections_file(const struct BandapDataset *gt,
                                                      const char *det_path,
                                                      struct BandapDataset **out);

/**
 * As [`bandap_dataset_with_detections_file`], from in-memory JSON.
 *
 * # Safety
 * `gt` must be a live handle; `det_json` NUL-terminated; `out` writable.
 */
enum BandapStatus bandap_dataset_with_detections_json(const struct BandapDataset *gt,
                                                      const char *det_json,
                                                      struct BandapDataset **out);

/**
 * # Safety
 * `ds` must be a live handle; each out pointer must be writable or NULL.
 */
enum BandapStatus bandap_dataset_counts(const struct BandapDataset *ds,
                                        size_t *n_images,
                                        size_t *n_annotations,
                                        size_t *n_detections);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void bandap_dataset_free(struct BandapDataset *ds);

/**
 * `name` is one of `coco`, `asap`, `bandasap`.
 *
 * # Safety
 * `name` must be NUL-terminated; `out` writable.
 */
enum BandapStatus bandap_bank_preset(const char *name, struct BandapFilterBank **out);

/**
 * Parses a bank configuration (`{"name", "log_base", "filters": [{"label","a","b","c","d"}]}`).
 *
 * # Safety
 * `json` must be NUL-terminated; `out` writable.
 */
enum BandapStatus bandap_bank_from_json(const char *json, struct BandapFilterBank **out);

/**
 * # Safety
 * `bank` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_bank_len(const struct BandapFilterBank *bank, size_t *out);

/**
 * Membership weight of filter `index` at `scale`.
 *
 * # Safety
 * `bank` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_bank_membership(const struct BandapFilterBank *bank,
                                         size_t index,
                                         double scale,
                                         double *out);

/**
 * Bank configuration JSON; free with [`bandap_string_free`].
 *
 * # Safety
 * `bank` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_bank_to_json(const struct BandapFilterBank *bank, char **out);

/**
 * # Safety
 * `bank` must be NULL or a handle not yet freed.
 */
void bandap_bank_free(struct BandapFilterBank *bank);

/**
 * Evaluates `ds` against every band of `bank` at IoU 0.50:0.95.
 * `jobs` = 0 uses all cores; results do not depend on it.
 *
 * # Safety
 * `ds` and `bank` must be live handles; `out` writable.
 */
enum BandapStatus bandap_evaluate(const struct BandapDataset *ds,
                                  const struct BandapFilterBank *bank,
                                  size_t max_dets,
                                  size_t jobs,
                                  struct BandapReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_report_band_count(const struct BandapReport *report, size_t *out);

/**
 * AP of band `index`. `*defined` is false (and `*value` NaN) when the band
 * has no weighted ground truth or the IoU level was not evaluated.
 *
 * # Safety
 * `report` must be a live handle; `value` and `defined` writable.
 */
enum BandapStatus bandap_report_band_ap(const struct BandapReport *report,
                                        size_t index,
                                        enum BandapApKind kind,
                                        double *value,
                                        bool *defined);

/**
 * Band label; free with [`bandap_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_report_band_label(const struct BandapReport *report,
                                           size_t index,
                                           char **out);

/**
 * Report JSON in the same layout the CLI writes; free with [`bandap_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum BandapStatus bandap_report_to_json(const struct BandapReport *report, char **out);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void bandap_report_free(struct BandapReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void bandap_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANDAP_H */
