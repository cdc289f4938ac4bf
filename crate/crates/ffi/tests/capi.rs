use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lscheme_ffi::*;

fn config(json: &str) -> *mut LsConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { ls_config_from_json(text.as_ptr(), &mut cfg) },
        LsStatus::Ok
    );
    cfg
}

fn last_error() -> String {
    let p = ls_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn steps_to_the_end_and_reads_fields() {
    let cfg =
        config(r#"{"problem": "injection3d", "counts": [4, 4, 4], "tau": 0.5, "t_end": 1.5}"#);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { ls_simulator_new(cfg, &mut sim) }, LsStatus::Ok);
    unsafe { ls_config_free(cfg) };

    let (mut cells, mut steps, mut current) = (0, 0, 99);
    assert_eq!(
        unsafe { ls_simulator_info(sim, &mut cells, &mut steps, &mut current) },
        LsStatus::Ok
    );
    assert_eq!((cells, steps, current), (64, 3, 0));

    let mut iters = 0;
    for _ in 0..3 {
        assert_eq!(unsafe { ls_simulator_step(sim, &mut iters) }, LsStatus::Ok);
        assert!(iters > 0);
    }
    assert_eq!(
        unsafe { ls_simulator_step(sim, ptr::null_mut()) },
        LsStatus::Finished
    );

    let mut written = 0;
    assert_eq!(
        unsafe { ls_simulator_last_increments(sim, ptr::null_mut(), 0, &mut written) },
        LsStatus::InvalidArgument
    );
    assert_eq!(written, iters);
    let mut incs = vec![0.0; written];
    assert_eq!(
        unsafe { ls_simulator_last_increments(sim, incs.as_mut_ptr(), incs.len(), &mut written) },
        LsStatus::Ok
    );
    assert!(incs.windows(2).all(|w| w[1] < w[0]));

    let mut sat = vec![0.0; cells];
    assert_eq!(
        unsafe { ls_simulator_get_field(sim, LsField::Saturation as i32, sat.as_mut_ptr(), cells) },
        LsStatus::Ok
    );
    assert!(sat.iter().all(|&s| (0.0..=1.0).contains(&s)));
    assert!(sat.iter().cloned().fold(0.0, f64::max) > 0.25);

    let mut short = vec![0.0; 3];
    assert_eq!(
        unsafe { ls_simulator_get_field(sim, LsField::Pressure as i32, short.as_mut_ptr(), 3) },
        LsStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { ls_simulator_get_field(sim, 7, sat.as_mut_ptr(), cells) },
        LsStatus::InvalidArgument
    );
    assert!(last_error().contains("unknown field"));
    unsafe { ls_simulator_free(sim) };
}

#[test]
fn reports_errors_with_codes_and_messages() {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { ls_config_from_json(ptr::null(), &mut cfg) },
        LsStatus::NullPointer
    );
    let bad = CString::new(r#"{"problem": "nope"}"#).unwrap();
    assert_eq!(
        unsafe { ls_config_from_json(bad.as_ptr(), &mut cfg) },
        LsStatus::InvalidConfig
    );
    assert!(last_error().contains("parse error"));

    let cfg = config(r#"{"problem": "injection3d", "counts": [2, 2, 2], "l": 1.0}"#);
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { ls_simulator_new(cfg, &mut sim) },
        LsStatus::InvalidConfig
    );
    assert!(last_error().contains("L >= L_s"));
    assert!(sim.is_null());
    unsafe { ls_config_free(cfg) };
    unsafe { ls_config_free(ptr::null_mut()) };
    unsafe { ls_simulator_free(ptr::null_mut()) };
}

#[test]
fn tau_check_matches_core() {
    let cfg = config(r#"{"problem": "manufactured2d", "tau": 0.2}"#);
    let mut report = LsTauReport {
        admissible: false,
        tau_max: 0.0,
        c1: 0.0,
        c3: 0.0,
    };
    assert_eq!(unsafe { ls_check_tau(cfg, &mut report) }, LsStatus::Ok);
    assert!(report.admissible);
    assert_eq!(report.c1, 0.0);
    assert!((report.tau_max - 128.0 / 9.0).abs() < 1e-12);
    unsafe { ls_config_free(cfg) };
    let version = unsafe { CStr::from_ptr(ls_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

/// Directory holding the library artifacts of the current profile.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = artifact_dir().join("liblscheme_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let build = match Command::new(&cc)
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
    {
        Ok(o) => o,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(stdout.contains("cells 64 steps 2"), "{stdout}");
}
