use std::ffi::{CStr, CString};
use std::ptr;

use bque_ffi::*;

fn last_error() -> String {
    let p = bque_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn domain_handles_report_geometry() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(bque_domain_sinai(0.4, 0.7, &mut d), BqueStatus::Ok);
        let (mut area, mut perim, mut r_max) = (0.0, 0.0, 0.0);
        assert_eq!(bque_domain_properties(d, &mut area, &mut perim, &mut r_max), BqueStatus::Ok);
        assert!((area - 0.6140366).abs() < 1e-6);
        assert!((r_max - 2f64.sqrt()).abs() < 1e-12);
        let mut n = 0.0;
        assert_eq!(bque_weyl_count(d, 1e6, &mut n), BqueStatus::Ok);
        assert!((n - 4.9e4).abs() < 1e3);
        bque_domain_free(d);
    }
}

#[test]
fn invalid_geometry_sets_code_and_message() {
    unsafe {
        let mut d = ptr::null_mut();
        let s = bque_domain_sinai(-1.0, 0.7, &mut d);
        assert!(matches!(s, BqueStatus::Geometry | BqueStatus::InvalidInput), "{s:?}");
        assert!(d.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(bque_domain_properties(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), BqueStatus::NullPointer);
        assert!(last_error().contains("domain"));
        bque_domain_free(ptr::null_mut());
    }
}

#[test]
fn quarter_disk_scan_through_the_abi() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(bque_domain_quarter_disk(&mut d), BqueStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(bque_scan_spectrum(d, 10.0, 14.0, &mut c), BqueStatus::Ok);
        let n = bque_catalog_len(c);
        assert!(n > 0);

        let mut written = 0;
        let mut small = vec![0.0; n - 1];
        assert_eq!(bque_catalog_wavenumbers(c, small.as_mut_ptr(), small.len(), &mut written), BqueStatus::BufferTooSmall);
        assert_eq!(written, n);
        let mut ks = vec![0.0; n];
        assert_eq!(bque_catalog_wavenumbers(c, ks.as_mut_ptr(), n, &mut written), BqueStatus::Ok);
        // J_2(k) = 0 has 11.6198 in range
        assert!(ks.iter().any(|k| (k - 11.619841).abs() < 1e-5), "{ks:?}");
        let mut rho = vec![0.0; n];
        assert_eq!(bque_catalog_rellich_norms(c, rho.as_mut_ptr(), n, ptr::null_mut()), BqueStatus::Ok);
        assert!(rho.iter().all(|r| (r - 1.0).abs() < 1e-3));

        let mut v = 1.0;
        assert_eq!(bque_catalog_eval(c, 0, 0.0, 0.5, &mut v), BqueStatus::Ok);
        assert!(v.abs() < 1e-6, "Dirichlet wall: {v}");
        assert_eq!(bque_catalog_eval(c, n, 0.3, 0.3, &mut v), BqueStatus::InvalidInput);

        let mut r = ptr::null_mut();
        assert_eq!(bque_region_new(d, 1.0, 2.0, 0.5, &mut r), BqueStatus::Ok);
        let mut frac = 0.0;
        assert_eq!(bque_region_properties(r, ptr::null_mut(), &mut frac), BqueStatus::Ok);
        assert!((frac - 0.5).abs() < 1e-9);
        let mut diag = vec![0.0; n];
        assert_eq!(bque_diagonal_elements(c, r, diag.as_mut_ptr(), n, ptr::null_mut()), BqueStatus::Ok);
        assert!(diag.iter().all(|x| *x > 0.0 && *x < 1.0));

        bque_region_free(r);
        bque_catalog_free(c);
        bque_domain_free(d);
    }
}

#[test]
fn run_stage_reports_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let toml = CString::new(format!("output_dir = {:?}\n", dir.path().display().to_string())).unwrap();
    unsafe {
        assert_eq!(bque_run_stage(toml.as_ptr(), BqueStage::Report), BqueStatus::MissingArtifact);
        assert!(last_error().contains("missing artifact"));
        let bad = CString::new("nonsense = 1\n").unwrap();
        assert_eq!(bque_run_stage(bad.as_ptr(), BqueStage::Report), BqueStatus::Config);
        assert_eq!(bque_run_stage(ptr::null(), BqueStage::Report), BqueStatus::NullPointer);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(bque_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bque.h")).unwrap();
    for name in [
        "bque_last_error",
        "bque_version",
        "bque_domain_sinai",
        "bque_domain_quarter_disk",
        "bque_domain_free",
        "bque_region_new",
        "bque_scan_spectrum",
        "bque_catalog_wavenumbers",
        "bque_diagonal_elements",
        "bque_run_stage",
        "BQUE_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
