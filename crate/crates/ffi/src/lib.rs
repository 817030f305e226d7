//! C ABI over the `bque` core crate.
//!
//! Objects are opaque handles created by `bque_*_new`/constructor functions
//! and released with the matching `bque_*_free`. Every fallible call returns a
//! [`BqueStatus`]; on failure the message is available from
//! [`bque_last_error`] on the same thread until the next failing call.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bque::elements::diagonal_elements;
use bque::geometry::{build_quarter_disk, build_sinai_domain, build_test_region, BilliardDomain, TestRegion, Vec2};
use bque::pipeline::{parse_config, run, Stage};
use bque::scaling::{scan_spectrum, weyl_count, SolverParams, SpectrumCatalog};
use bque::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqueStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Geometry = 3,
    Numerical = 4,
    Config = 5,
    MissingArtifact = 6,
    Format = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
    /// A pipeline stage ran but its checks did not pass.
    ChecksFailed = 11,
}

/// Pipeline stages for [`bque_run_stage`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqueStage {
    Classical = 0,
    Solve = 1,
    Elements = 2,
    Stats = 3,
    Report = 4,
    Verify = 5,
}

/// Billiard domain.
pub struct BqueDomain(BilliardDomain);

/// Half-plane test region inside a domain.
pub struct BqueRegion(TestRegion);

/// Eigenmodes found by a spectrum scan.
pub struct BqueCatalog(SpectrumCatalog);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BqueStatus {
    match e {
        Error::Geometry(_) => BqueStatus::Geometry,
        Error::InvalidInput(_) => BqueStatus::InvalidInput,
        Error::Numerical(_) => BqueStatus::Numerical,
        Error::Config(_) => BqueStatus::Config,
        Error::MissingArtifact { .. } => BqueStatus::MissingArtifact,
        Error::Format { .. } => BqueStatus::Format,
        Error::Io(_) => BqueStatus::Io,
    }
}

struct Fail(BqueStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BqueStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BqueStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            BqueStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(BqueStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_slice(values: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> Result<(), Fail> {
    if !written.is_null() {
        *written = values.len();
    }
    if values.len() > len {
        return Err(Fail(BqueStatus::BufferTooSmall, format!("need {} entries, buffer holds {len}", values.len())));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bque_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bque_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Desymmetrized Sinai billiard with arc angles `theta1`, `theta2`.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn bque_domain_sinai(theta1: f64, theta2: f64, out: *mut *mut BqueDomain) -> BqueStatus {
    guard(|| emit(out, BqueDomain(build_sinai_domain(theta1, theta2)?)))
}

/// Quarter of the unit disk.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn bque_domain_quarter_disk(out: *mut *mut BqueDomain) -> BqueStatus {
    guard(|| emit(out, BqueDomain(build_quarter_disk())))
}

/// # Safety
/// `domain` must be null or a handle from a domain constructor, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn bque_domain_free(domain: *mut BqueDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Area, full-billiard perimeter and largest distance from the origin.
///
/// # Safety
/// `domain` must be a live handle; the output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn bque_domain_properties(domain: *const BqueDomain, area: *mut f64, perimeter_full: *mut f64, r_max: *mut f64) -> BqueStatus {
    guard(|| {
        let d = &deref(domain, "domain")?.0;
        for (p, v) in [(area, d.area), (perimeter_full, d.perimeter_full), (r_max, d.r_max)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Two-term Weyl level count at energy `e`.
///
/// # Safety
/// `domain` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bque_weyl_count(domain: *const BqueDomain, e: f64, out: *mut f64) -> BqueStatus {
    guard(|| {
        let d = &deref(domain, "domain")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = weyl_count(d, e);
        Ok(())
    })
}

/// Region on the origin side of the line with normal `(nx, ny)` holding
/// `fraction` of the domain area.
///
/// # Safety
/// `domain` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bque_region_new(domain: *const BqueDomain, nx: f64, ny: f64, fraction: f64, out: *mut *mut BqueRegion) -> BqueStatus {
    guard(|| {
        let d = &deref(domain, "domain")?.0;
        let nu = Vec2::new(nx, ny);
        if !(nu.norm() > 0.0) {
            return Err(Fail(BqueStatus::InvalidInput, "normal must be nonzero".into()));
        }
        emit(out, BqueRegion(build_test_region(d, nu.normalize(), fraction)?))
    })
}

/// # Safety
/// `region` must be null or a handle from [`bque_region_new`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn bque_region_free(region: *mut BqueRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}

/// Line offset `c` in `nu . r = c` and the area fraction of the region.
///
/// # Safety
/// `region` must be a live handle; the output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn bque_region_properties(region: *const BqueRegion, offset: *mut f64, area_fraction: *mut f64) -> BqueStatus {
    guard(|| {
        let r = &deref(region, "region")?.0;
        for (p, v) in [(offset, r.offset), (area_fraction, r.area_fraction)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Every eigenmode with `k_lo <= k < k_hi`, using default solver settings.
///
/// # Safety
/// `domain` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bque_scan_spectrum(domain: *const BqueDomain, k_lo: f64, k_hi: f64, out: *mut *mut BqueCatalog) -> BqueStatus {
    guard(|| {
        let d = &deref(domain, "domain")?.0;
        emit(out, BqueCatalog(scan_spectrum(d, k_lo, k_hi, &SolverParams::default())?))
    })
}

/// # Safety
/// `catalog` must be null or a handle from [`bque_scan_spectrum`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn bque_catalog_free(catalog: *mut BqueCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of modes; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bque_catalog_len(catalog: *const BqueCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.0.modes.len())
}

/// Copies the ascending wavenumbers into `buf`. `written` receives the mode
/// count even when the buffer is too small.
///
/// # Safety
/// `catalog` must be a live handle, `buf` must hold `len` doubles, `written` valid or null.
#[no_mangle]
pub unsafe extern "C" fn bque_catalog_wavenumbers(catalog: *const BqueCatalog, buf: *mut f64, len: usize, written: *mut usize) -> BqueStatus {
    guard(|| write_slice(&deref(catalog, "catalog")?.0.wavenumbers(), buf, len, written))
}

/// Rellich boundary norms, in catalog order.
///
/// # Safety
/// As [`bque_catalog_wavenumbers`].
#[no_mangle]
pub unsafe extern "C" fn bque_catalog_rellich_norms(catalog: *const BqueCatalog, buf: *mut f64, len: usize, written: *mut usize) -> BqueStatus {
    guard(|| {
        let norms: Vec<f64> = deref(catalog, "catalog")?.0.modes.iter().map(|m| m.rellich_norm).collect();
        write_slice(&norms, buf, len, written)
    })
}

/// Value of mode `index` at `(x, y)`.
///
/// # Safety
/// `catalog` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bque_catalog_eval(catalog: *const BqueCatalog, index: usize, x: f64, y: f64, out: *mut f64) -> BqueStatus {
    guard(|| {
        let c = &deref(catalog, "catalog")?.0;
        let m = c.modes.get(index).ok_or_else(|| Fail(BqueStatus::InvalidInput, format!("mode {index} out of range")))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.eval(c.basis_of(m), Vec2::new(x, y))?.0;
        Ok(())
    })
}

/// Diagonal elements `<phi_n, 1_A phi_n>` for every mode, in catalog order.
///
/// # Safety
/// Handles must be live, `buf` must hold `len` doubles, `written` valid or null.
#[no_mangle]
pub unsafe extern "C" fn bque_diagonal_elements(
    catalog: *const BqueCatalog,
    region: *const BqueRegion,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> BqueStatus {
    guard(|| {
        let c = &deref(catalog, "catalog")?.0;
        let r = &deref(region, "region")?.0;
        let values: Vec<f64> = diagonal_elements(c, r, SolverParams::default().pts_per_wavelength)?.iter().map(|d| d.value).collect();
        write_slice(&values, buf, len, written)
    })
}

/// Runs one pipeline stage with a TOML configuration (empty for defaults).
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bque_run_stage(config_toml: *const c_char, stage: BqueStage) -> BqueStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        let text = CStr::from_ptr(config_toml).to_str().map_err(|_| Fail(BqueStatus::InvalidInput, "config is not UTF-8".into()))?;
        let cfg = parse_config(text)?;
        let stage = match stage {
            BqueStage::Classical => Stage::Classical,
            BqueStage::Solve => Stage::Solve,
            BqueStage::Elements => Stage::Elements,
            BqueStage::Stats => Stage::Stats,
            BqueStage::Report => Stage::Report,
            BqueStage::Verify => Stage::Verify,
        };
        let out = run(&cfg, stage)?;
        if out.passed {
            Ok(())
        } else {
            Err(Fail(BqueStatus::ChecksFailed, out.summary.join("; ")))
        }
    })
}
