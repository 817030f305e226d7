#ifndef BQUE_H
#define BQUE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum BqueStatus {
  BQUE_STATUS_OK = 0,
  BQUE_STATUS_NULL_POINTER = 1,
  BQUE_STATUS_INVALID_INPUT = 2,
  BQUE_STATUS_GEOMETRY = 3,
  BQUE_STATUS_NUMERICAL = 4,
  BQUE_STATUS_CONFIG = 5,
  BQUE_STATUS_MISSING_ARTIFACT = 6,
  BQUE_STATUS_FORMAT = 7,
  BQUE_STATUS_IO = 8,
  BQUE_STATUS_BUFFER_TOO_SMALL = 9,
  BQUE_STATUS_PANIC = 10,
  /**
   * A pipeline stage ran but its checks did not pass.
   */
  BQUE_STATUS_CHECKS_FAILED = 11,
} BqueStatus;

/**
 * Pipeline stages for [`bque_run_stage`].
 */
typedef enum BqueStage {
  BQUE_STAGE_CLASSICAL = 0,
  BQUE_STAGE_SOLVE = 1,
  BQUE_STAGE_ELEMENTS = 2,
  BQUE_STAGE_STATS = 3,
  BQUE_STAGE_REPORT = 4,
  BQUE_STAGE_VERIFY = 5,
} BqueStage;

/**
 * Eigenmodes found by a spectrum scan.
 */
typedef struct BqueCatalog BqueCatalog;

/**
 * Billiard domain.
 */
typedef struct BqueDomain BqueDomain;

/**
 * Half-plane test region inside a domain.
 */
typedef struct BqueRegion BqueRegion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bque_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bque_version(void);

/**
 * Desymmetrized Sinai billiard with arc angles `theta1`, `theta2`.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum BqueStatus bque_domain_sinai(double theta1, double theta2, struct BqueDomain **out);

/**
 * Quarter of the unit disk.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum BqueStatus bque_domain_quarter_disk(struct BqueDomain **out);

/**
 * # Safety
 * `domain` must be null or a handle from a domain constructor, freed at most once.
 */
void bque_domain_free(struct BqueDomain *domain);

/**
 * Area, full-billiard perimeter and largest distance from the origin.
 *
 * # Safety
 * `domain` must be a live handle; the output pointers must be valid or null.
 */
enum BqueStatus bque_domain_properties(const struct BqueDomain *domain,
                                       double *area,
                                       double *perimeter_full,
                                       double *r_max);

/**
 * Two-term Weyl level count at energy `e`.
 *
 * # Safety
 * `domain` must be a live handle and `out` valid.
 */
enum BqueStatus bque_weyl_count(const struct BqueDomain *domain, double e, double *out);

/**
 * Region on the origin side of the line with normal `(nx, ny)` holding
 * `fraction` of the domain area.
 *
 * # Safety
 * `domain` must be a live handle and `out` valid.
 */
enum BqueStatus bque_region_new(const struct BqueDomain *domain,
                                double nx,
                                double ny,
                                double fraction,
                                struct BqueRegion **out);

/**
 * # Safety
 * `region` must be null or a handle from [`bque_region_new`], freed at most once.
 */
void bque_region_free(struct BqueRegion *region);

/**
 * Line offset `c` in `nu . r = c` and the area fraction of the region.
 *
 * # Safety
 * `region` must be a live handle; the output pointers must be valid or null.
 */
enum BqueStatus bque_region_properties(const struct BqueRegion *region,
                                       double *offset,
                                       double *area_fraction);

/**
 * Every eigenmode with `k_lo <= k < k_hi`, using default solver settings.
 *
 * # Safety
 * `domain` must be a live handle and `out` valid.
 */
enum BqueStatus bque_scan_spectrum(const struct BqueDomain *domain,
                                   double k_lo,
                                   double k_hi,
                                   struct BqueCatalog **out);

/**
 * # Safety
 * `catalog` must be null or a handle from [`bque_scan_spectrum`], freed at most once.
 */
void bque_catalog_free(struct BqueCatalog *catalog);

/**
 * Number of modes; 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a live handle.
 */
size_t bque_catalog_len(const struct BqueCatalog *catalog);

/**
 * Copies the ascending wavenumbers into `buf`. `written` receives the mode
 * count even when the buffer is too small.
 *
 * # Safety
 * `catalog` must be a live handle, `buf` must hold `len` doubles, `written` valid or null.
 */
enum BqueStatus bque_catalog_wavenumbers(const struct BqueCatalog *catalog,
                                         double *buf,
                                         size_t len,
                                         size_t *written);

/**
 * Rellich boundary norms, in catalog order.
 *
 * # Safety
 * As [`bque_catalog_wavenumbers`].
 */
enum BqueStatus bque_catalog_rellich_norms(const struct BqueCatalog *catalog,
                                           double *buf,
                                           size_t len,
                                           size_t *written);

/**
 * Value of mode `index` at `(x, y)`.
 *
 * # Safety
 * `catalog` must be a live handle and `out` valid.
 */
enum BqueStatus bque_catalog_eval(const struct BqueCatalog *catalog,
                                  size_t index,
                                  double x,
                                  double y,
                                  double *out);

/**
 * Diagonal elements `<phi_n, 1_A phi_n>` for every mode, in catalog order.
 *
 * # Safety
 * Handles must be live, `buf` must hold `len` doubles, `written` valid or null.
 */
enum BqueStatus bque_diagonal_elements(const struct BqueCatalog *catalog,
                                       const struct BqueRegion *region,
                                       double *buf,
                                       size_t len,
                                       size_t *written);

/**
 * Runs one pipeline stage with a TOML configuration (empty for defaults).
 *
 * # Safety
 * `config_toml` must be a valid NUL-terminated string.
 */
enum BqueStatus bque_run_stage(const char *config_toml, enum BqueStage stage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BQUE_H */
