use std::path::{Path, PathBuf};
use std::process::Command;

use bque::geometry::{build_quarter_disk, DomainShape};
use bque::pipeline::*;
use bque::scaling::{scan_spectrum, weyl_count, SolverParams};
use bque::Error;

fn small_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { output_dir: out.to_path_buf(), ..Default::default() };
    cfg.classical.duration = 100.0;
    cfg.classical.realizations = 20;
    cfg.classical.batches = 4;
    cfg.solver.ranges = vec![[100.0, 106.0]];
    cfg.solver.chunk_width = 3.0;
    cfg.elements.blocks = vec![[100.0, 106.0]];
    cfg.stats.window_size = 50;
    cfg.stats.coulomb_samples = 100_000;
    cfg
}

fn run_all(cfg: &PipelineConfig) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for stage in [Stage::Classical, Stage::Solve, Stage::Elements, Stage::Stats, Stage::Report] {
        files.extend(run(cfg, stage).unwrap().artifacts);
    }
    files
}

#[test]
fn staged_run_is_deterministic_and_stamps_every_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ca = small_config(a.path());
    let cb = small_config(b.path());
    let fa = run_all(&ca);
    let fb = run_all(&cb);
    assert_eq!(fa.len(), fb.len());
    // output_dir differs, so the hashes differ; compare everything else
    let (ha, hb) = (ca.hash().unwrap(), cb.hash().unwrap());
    for (x, y) in fa.iter().zip(&fb) {
        let (bx, by) = (std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        if x.extension().is_some_and(|e| e == "csv") {
            let (sx, sy) = (String::from_utf8(bx).unwrap(), String::from_utf8(by).unwrap());
            assert!(sx.starts_with(&format!("# config_hash={ha}\n")), "{}", x.display());
            assert_eq!(sx.replace(&ha, "H"), sy.replace(&hb, "H"), "{}", x.display());
        } else {
            assert_eq!(bx, by, "{}", x.display());
        }
    }
}

#[test]
fn small_solve_gives_a_variance_point_sized_by_weyl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_all(&cfg);
    let text = std::fs::read_to_string(dir.path().join("stats/variance_series.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 1);
    let m: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    let domain = cfg.build_domain().unwrap();
    let weyl = weyl_count(&domain, 106f64.powi(2)) - weyl_count(&domain, 100f64.powi(2));
    // one window of 50 from about 58 levels
    assert_eq!(m, 50.0);
    assert!((weyl - 58.0).abs() < 5.0, "{weyl}");
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("a_rw") && report.contains("a_fp"));
}

#[test]
fn stages_name_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for stage in [Stage::Elements, Stage::Stats, Stage::Report] {
        match run(&cfg, stage) {
            Err(e @ Error::MissingArtifact { .. }) => assert_eq!(e.exit_code(), 1),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn uncovered_blocks_and_partial_windows_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.solver.ranges = vec![[100.0, 101.0]];
    cfg.elements.blocks = vec![[100.0, 106.0]];
    run(&cfg, Stage::Classical).unwrap();
    run(&cfg, Stage::Solve).unwrap();
    assert!(matches!(run(&cfg, Stage::Elements), Err(Error::MissingArtifact { .. })));
    cfg.elements.blocks = vec![];
    run(&cfg, Stage::Elements).unwrap();
    // about 9 levels: no complete window
    assert!(run(&cfg, Stage::Stats).is_err());
    cfg.stats.window_edges = vec![[1e4, 1.1e4]];
    assert!(matches!(run(&cfg, Stage::Stats), Err(Error::InvalidInput(_))));
}

#[test]
fn eigenmode_files_round_trip_and_check_the_domain() {
    let domain = build_quarter_disk();
    let catalog = scan_spectrum(&domain, 10.0, 12.0, &SolverParams::default()).unwrap();
    let hash = domain_hash(&DomainShape::QuarterDisk);
    let file = EigenmodeFile::from_catalog(&catalog, hash, 7.0, 2.0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bqem");
    file.write(&p).unwrap();
    let back = EigenmodeFile::read(&p, &hash).unwrap();
    assert_eq!(back, file);
    assert_eq!(std::fs::read(&p).unwrap(), back.to_bytes());
    let loaded = load_catalog(std::slice::from_ref(&p), &hash, 1e-6).unwrap();
    for (a, b) in loaded.modes.iter().zip(&catalog.modes) {
        assert_eq!(a.k, b.k);
        assert_eq!(a.coefficients, b.coefficients);
        assert_eq!(loaded.basis_of(a), catalog.basis_of(b));
    }
    let other = domain_hash(&DomainShape::Sinai { theta1: 0.4, theta2: 0.7 });
    assert!(matches!(EigenmodeFile::read(&p, &other), Err(Error::Format { .. })));
}

fn bque() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bque"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bque().args(["report", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[classical]\nduration = -1.0\n").unwrap();
    let out = bque().args(["classical", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bque().args(["solve", "--kmin", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&cfg, "").unwrap();
    let out = bque().args(["classical", "--print-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let printed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(parse_config(&printed).unwrap(), PipelineConfig::default());
}

#[test]
fn defaults_carry_the_reference_parameters() {
    let c = PipelineConfig::default();
    assert_eq!((c.classical.dt, c.classical.duration, c.classical.realizations, c.classical.omega_sm), (0.02, 1e4, 6000, 0.03));
    assert_eq!(c.solver.kd, 7.0);
    assert_eq!(c.solver.pts_per_wavelength, 10.0);
    let d = c.build_domain().unwrap();
    assert!((c.solver.params().omega_max_for(&d) - 0.2 / d.r_max).abs() < 1e-15);
}
