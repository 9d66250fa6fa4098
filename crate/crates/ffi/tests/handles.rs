use std::ffi::{c_char, CStr, CString};
use std::ptr;

use bayesics_ffi::*;
use serde_json::Value as Json;

const GBSG2: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/gbsg2.csv");

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn owned(p: *const c_char) -> String {
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_string()
}

unsafe fn last_error() -> Option<String> {
    let p = bayesics_last_error_message();
    (!p.is_null()).then(|| owned(p))
}

#[test]
fn dataset_from_file_reports_shape_and_names() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(bayesics_dataset_read_csv(cstr(GBSG2).as_ptr(), &mut d), BayesicsStatus::Ok);
        assert_eq!(last_error(), None);
        assert_eq!(bayesics_dataset_nrows(d), 686);
        let names: Vec<String> = (0..bayesics_dataset_ncols(d)).map(|i| owned(bayesics_dataset_column_name(d, i))).collect();
        assert!(names.iter().any(|n| n == "horTh"));
        assert!(bayesics_dataset_column_name(d, names.len()).is_null());
        bayesics_dataset_free(d);
    }
}

#[test]
fn lm_report_matches_command_line() {
    unsafe {
        let csv = cstr("x,y\n0,1.2\n1,2.8\n2,5.1\n3,7.2\n4,8.7\n5,11.3\n");
        let mut d = ptr::null_mut();
        assert_eq!(bayesics_dataset_parse_csv(csv.as_ptr(), &mut d), BayesicsStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(bayesics_lm(d, cstr("y ~ x").as_ptr(), 0.9, &mut r), BayesicsStatus::Ok);
        let direct: Json = serde_json::from_str(&owned(bayesics_report_json(r))).unwrap();
        assert_eq!(owned(bayesics_report_command(r)), "lm");
        bayesics_report_free(r);
        bayesics_dataset_free(d);

        let dir = std::env::temp_dir().join(format!("bayesics_ffi_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("line.csv");
        std::fs::write(&path, csv.to_bytes()).unwrap();
        let args: Vec<CString> =
            ["--ci-level", "0.9", "lm", "--data", path.to_str().unwrap(), "--formula", "y ~ x"].map(cstr).into();
        let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
        assert_eq!(bayesics_run(argv.len(), argv.as_ptr(), &mut r), BayesicsStatus::Ok, "{:?}", last_error());
        let via_cli: Json = serde_json::from_str(&owned(bayesics_report_json(r))).unwrap();
        bayesics_report_free(r);
        std::fs::remove_dir_all(dir).unwrap();
        assert_eq!(direct["result"], via_cli["result"]);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(bayesics_dataset_read_csv(ptr::null(), &mut d), BayesicsStatus::NullPointer);
        assert_eq!(bayesics_dataset_read_csv(cstr("/nonexistent.csv").as_ptr(), &mut d), BayesicsStatus::Data);
        assert!(last_error().unwrap().contains("cannot open"));
        assert!(d.is_null());

        let bad = [0xffu8, 0];
        assert_eq!(bayesics_dataset_parse_csv(bad.as_ptr().cast(), &mut d), BayesicsStatus::InvalidUtf8);

        assert_eq!(bayesics_dataset_parse_csv(cstr("x,y\n1,2\n2,3\n3,5\n").as_ptr(), &mut d), BayesicsStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(bayesics_lm(d, cstr("y ~ (x").as_ptr(), 0.95, &mut r), BayesicsStatus::Formula);
        assert_eq!(bayesics_lm(d, cstr("y ~ z").as_ptr(), 0.95, &mut r), BayesicsStatus::Design);
        assert_eq!(bayesics_lm(d, cstr("y ~ x").as_ptr(), 1.5, &mut r), BayesicsStatus::InvalidArgument);
        assert_eq!(bayesics_lm(ptr::null(), cstr("y ~ x").as_ptr(), 0.95, &mut r), BayesicsStatus::NullPointer);
        assert!(r.is_null());
        bayesics_dataset_free(d);

        let args: Vec<CString> = ["--mc-epsilon", "1e-7", "prop", "--successes", "5,9", "--trials", "10,12"].map(cstr).into();
        let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
        assert_eq!(bayesics_run(argv.len(), argv.as_ptr(), &mut r), BayesicsStatus::Numerical);
        let args = [cstr("frobnicate")];
        let argv = [args[0].as_ptr()];
        assert_eq!(bayesics_run(1, argv.as_ptr(), &mut r), BayesicsStatus::Usage);
        assert!(last_error().unwrap().contains("Usage"));
        assert!(r.is_null());
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        assert_eq!(bayesics_dataset_nrows(ptr::null()), 0);
        assert!(bayesics_report_json(ptr::null()).is_null());
        bayesics_dataset_free(ptr::null_mut());
        bayesics_report_free(ptr::null_mut());
        assert!(owned(bayesics_version()).starts_with("0."));
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(bayesics_dataset_read_csv(ptr::null(), &mut d), BayesicsStatus::NullPointer);
        std::thread::spawn(|| assert_eq!(last_error(), None)).join().unwrap();
        assert!(last_error().is_some());
    }
}
