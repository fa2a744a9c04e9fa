use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use uoan_ffi::*;

fn last_error() -> String {
    let p = uoan_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut UoanConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(uoan_config_default(&mut cfg), UoanStatus::Ok);
        for s in [
            "experiment.trials=3",
            "geometry.node_count=15",
            "experiment.sweep.values=[2, 8]",
        ] {
            let s = CString::new(s).unwrap();
            assert_eq!(uoan_config_set(cfg, s.as_ptr()), UoanStatus::Ok);
        }
    }
    cfg
}

#[test]
fn unknown_key_reports_config_error() {
    let cfg = small_config();
    let bad = CString::new("optical.tx_powr=1").unwrap();
    unsafe {
        assert_eq!(uoan_config_set(cfg, bad.as_ptr()), UoanStatus::Config);
        assert!(last_error().contains("optical.tx_powr"));
        // A later success clears the message.
        let mut n = 0;
        let mut g = ptr::null_mut();
        assert_eq!(uoan_graph_build(cfg, 0, &mut g), UoanStatus::Ok);
        assert!(uoan_last_error().is_null());
        assert_eq!(uoan_graph_node_count(g, &mut n), UoanStatus::Ok);
        assert_eq!(n, 16);
        uoan_graph_free(g);
        uoan_config_free(cfg);
    }
}

#[test]
fn null_and_bad_input_are_rejected() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(
            uoan_config_load(ptr::null(), &mut cfg),
            UoanStatus::NullPointer
        );
        assert!(cfg.is_null());
        let missing = CString::new("/nonexistent/x.toml").unwrap();
        assert_eq!(uoan_config_load(missing.as_ptr(), &mut cfg), UoanStatus::Io);
        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            uoan_config_parse(bad_utf8.as_ptr().cast(), &mut cfg),
            UoanStatus::InvalidUtf8
        );
        let toml = CString::new("[experiment]\ntrials = 0\n").unwrap();
        assert_eq!(
            uoan_config_parse(toml.as_ptr(), &mut cfg),
            UoanStatus::Config
        );
        assert!(last_error().contains("experiment.trials"));
        assert_eq!(
            uoan_sweep_len(ptr::null(), ptr::null_mut()),
            UoanStatus::NullPointer
        );
        uoan_config_free(ptr::null_mut());
        uoan_sweep_free(ptr::null_mut());
        uoan_graph_free(ptr::null_mut());
        uoan_string_free(ptr::null_mut());
    }
}

#[test]
fn shipped_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/e2e_rate.toml");
    let path = CString::new(path.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    let mut toml = ptr::null_mut();
    unsafe {
        assert_eq!(uoan_config_load(path.as_ptr(), &mut cfg), UoanStatus::Ok);
        assert_eq!(uoan_config_to_toml(cfg, &mut toml), UoanStatus::Ok);
        let text = CStr::from_ptr(toml).to_str().unwrap();
        assert!(text.contains("clear_ocean"));
        uoan_string_free(toml);
        uoan_config_free(cfg);
    }
}

#[test]
fn sweep_points_match_csv_and_threads_do_not_matter() {
    let cfg = small_config();
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(uoan_sweep_run(cfg, 1, &mut a), UoanStatus::Ok);
        assert_eq!(uoan_sweep_run(cfg, 3, &mut b), UoanStatus::Ok);

        let (mut csv_a, mut csv_b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(uoan_sweep_to_csv(a, &mut csv_a), UoanStatus::Ok);
        assert_eq!(uoan_sweep_to_csv(b, &mut csv_b), UoanStatus::Ok);
        assert_eq!(CStr::from_ptr(csv_a), CStr::from_ptr(csv_b));
        uoan_string_free(csv_a);
        uoan_string_free(csv_b);

        let mut len = 0;
        assert_eq!(uoan_sweep_len(a, &mut len), UoanStatus::Ok);
        assert_eq!(len, 2);
        let mut p = std::mem::zeroed::<UoanSweepPoint>();
        assert_eq!(uoan_sweep_point(a, 1, &mut p), UoanStatus::Ok);
        assert_eq!((p.n_faces, p.trials), (8, 3));
        assert!((0.0..=1.0).contains(&p.conn_prob));
        assert!(p.mean_e2e_bps >= 0.0);
        assert!(p.hybrid.rmse_all_m.is_finite() && p.hybrid.rmse_all_m >= 0.0);
        assert_eq!(uoan_sweep_point(a, 2, &mut p), UoanStatus::OutOfRange);

        uoan_sweep_free(a);
        uoan_sweep_free(b);
        uoan_config_free(cfg);
    }
}

#[test]
fn sweep_to_file_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let c_path = CString::new(csv.to_str().unwrap()).unwrap();
    let cfg = small_config();
    unsafe {
        assert_eq!(
            uoan_sweep_run_to_file(cfg, c_path.as_ptr(), 0, ptr::null_mut()),
            UoanStatus::Ok
        );
        uoan_config_free(cfg);
    }
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("sweep_param,"));
    assert!(dir.path().join("out.manifest.toml").exists());
}

#[test]
fn graph_queries_agree() {
    let cfg = small_config();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(uoan_graph_build(cfg, 4, &mut g), UoanStatus::Ok);
        let (mut n, mut sink, mut edges) = (0, 0, 0);
        uoan_graph_node_count(g, &mut n);
        uoan_graph_sink(g, &mut sink);
        uoan_graph_edge_count(g, &mut edges);
        assert_eq!(sink, n - 1);

        let mut rates = vec![f64::NAN; n];
        assert_eq!(
            uoan_graph_e2e_rates(g, rates.as_mut_ptr(), n),
            UoanStatus::Ok
        );
        for (src, &r) in rates.iter().enumerate().filter(|(i, _)| *i != sink) {
            let mut w = f64::NAN;
            assert_eq!(uoan_graph_widest_rate(g, src, sink, &mut w), UoanStatus::Ok);
            assert_eq!(w, r, "node {src}");
        }
        assert_eq!(
            uoan_graph_e2e_rates(g, rates.as_mut_ptr(), n - 1),
            UoanStatus::OutOfRange
        );
        let mut w = 0.0;
        assert_eq!(
            uoan_graph_widest_rate(g, n + 5, sink, &mut w),
            UoanStatus::Domain
        );

        let mut json = ptr::null_mut();
        assert_eq!(uoan_graph_to_json(g, &mut json), UoanStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        let back = uoan_core::NetworkGraph::from_json(text).unwrap();
        assert_eq!(back.edges().len(), edges);
        uoan_string_free(json);
        uoan_graph_free(g);
        uoan_config_free(cfg);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(uoan_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"uoan.h\"\nint main(void) { UoanConfig *c = 0; return uoan_config_default(&c) == UOAN_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler found; skipping header check");
            return;
        }
    };
    assert!(status.success());
}
