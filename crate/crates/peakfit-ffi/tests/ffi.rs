//! Exercises the C ABI from Rust: handle lifecycle, status codes, error
//! messages, determinism, and the generated header.

use std::ffi::c_char;
use std::ptr;

use peakfit_ffi::*;

fn sample(n: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let status = unsafe { peakfit_sample_tail(1.0, 2.5, n, seed, out.as_mut_ptr()) };
    assert_eq!(status, PeakfitStatus::Ok);
    out
}

fn make_series(values: &[f64]) -> *mut PeakfitSeries {
    let mut handle = ptr::null_mut();
    let status = unsafe { peakfit_series_create(values.as_ptr(), values.len(), &mut handle) };
    assert_eq!(status, PeakfitStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let mut buf = vec![0i8; 256];
    let len = unsafe { peakfit_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&b| b as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn version_is_a_c_string() {
    let ptr = peakfit_version();
    assert!(!ptr.is_null());
    let s = unsafe { std::ffi::CStr::from_ptr(ptr) }.to_str().unwrap();
    assert_eq!(s, env!("CARGO_PKG_VERSION"));
}

#[test]
fn full_fit_lifecycle() {
    let values = sample(500, 3);
    let series = make_series(&values);
    assert_eq!(unsafe { peakfit_series_len(series) }, 500);

    let mut fit = ptr::null_mut();
    assert_eq!(
        unsafe { peakfit_fit(series, 10, &mut fit) },
        PeakfitStatus::Ok
    );
    let (x_min, alpha, w) = unsafe {
        (
            peakfit_fit_x_min(fit),
            peakfit_fit_alpha(fit),
            peakfit_fit_w(fit),
        )
    };
    assert!(x_min >= 1.0);
    assert!(alpha > 1.5 && alpha < 3.5, "alpha = {alpha}");
    assert!(w > 0.0 && w <= 1.0);
    assert_eq!(unsafe { peakfit_fit_n_total(fit) }, 500);
    assert!(unsafe { peakfit_fit_n_tail(fit) } <= 500);
    assert!(unsafe { peakfit_fit_ks_distance(fit) } < 0.2);

    // CCDF equals w at the threshold, errors below it.
    let mut p = 0.0;
    assert_eq!(
        unsafe { peakfit_fit_tail_ccdf(fit, x_min, &mut p) },
        PeakfitStatus::Ok
    );
    assert_eq!(p, w);
    assert_eq!(
        unsafe { peakfit_fit_tail_ccdf(fit, x_min * 0.5, &mut p) },
        PeakfitStatus::BelowTail
    );
    assert!(last_error().contains("empirical CCDF"));

    // The empirical survival covers the sub-threshold range instead.
    let mut s = 0.0;
    assert_eq!(
        unsafe { peakfit_series_survival(series, x_min * 0.5, &mut s) },
        PeakfitStatus::Ok
    );
    assert!(s > 0.0 && s <= 1.0);

    let mut pdf = 0.0;
    assert_eq!(
        unsafe { peakfit_fit_tail_pdf(fit, x_min * 2.0, &mut pdf) },
        PeakfitStatus::Ok
    );
    assert!(pdf > 0.0);

    unsafe {
        peakfit_fit_free(fit);
        peakfit_series_free(series);
    }
}

#[test]
fn gof_and_bootstrap_are_deterministic() {
    let values = sample(300, 8);
    let series = make_series(&values);
    let mut fit = ptr::null_mut();
    assert_eq!(
        unsafe { peakfit_fit(series, 10, &mut fit) },
        PeakfitStatus::Ok
    );

    let mut p1 = 0.0;
    let mut p2 = 0.0;
    let mut reject1 = -1;
    let mut reject2 = -1;
    for (p, reject) in [(&mut p1, &mut reject1), (&mut p2, &mut reject2)] {
        let status = unsafe {
            peakfit_gof(series, fit, 10, 120, 0.10, 77, p, reject)
        };
        assert_eq!(status, PeakfitStatus::Ok);
    }
    assert_eq!(p1, p2);
    assert_eq!(reject1, reject2);
    assert!((0.0..=1.0).contains(&p1));
    assert_eq!(reject1, (p1 < 0.10) as i32);

    let mut intervals = [[0.0; 4]; 2];
    for row in &mut intervals {
        let [a, b, c, d] = row;
        let status = unsafe {
            peakfit_bootstrap_intervals(series, 10, 120, 0.95, 9, a, b, c, d)
        };
        assert_eq!(status, PeakfitStatus::Ok);
    }
    assert_eq!(intervals[0], intervals[1]);
    let [x_lo, x_hi, a_lo, a_hi] = intervals[0];
    assert!(x_lo <= x_hi && a_lo <= a_hi);
    assert!(a_lo > 1.0);

    unsafe {
        peakfit_fit_free(fit);
        peakfit_series_free(series);
    }
}

#[test]
fn sampling_is_deterministic_and_bounded() {
    let a = sample(64, 42);
    let b = sample(64, 42);
    assert_eq!(a, b);
    assert!(a.iter().all(|&v| v >= 1.0));
    assert_ne!(a, sample(64, 43));
}

#[test]
fn null_and_invalid_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { peakfit_series_create(ptr::null(), 3, &mut out) },
        PeakfitStatus::NullPointer
    );
    let bad = [1.0, -2.0];
    assert_eq!(
        unsafe { peakfit_series_create(bad.as_ptr(), 2, &mut out) },
        PeakfitStatus::InvalidArgument
    );
    assert!(last_error().contains("index 1"));

    let values = sample(30, 1);
    let series = make_series(&values);
    let mut fit = ptr::null_mut();
    // min_tail below the supported floor.
    assert_eq!(
        unsafe { peakfit_fit(series, 3, &mut fit) },
        PeakfitStatus::InvalidArgument
    );
    // Series shorter than min_tail.
    assert_eq!(
        unsafe { peakfit_fit(series, 64, &mut fit) },
        PeakfitStatus::InsufficientData
    );
    assert_eq!(unsafe { peakfit_series_len(ptr::null()) }, 0);
    assert!(unsafe { peakfit_fit_alpha(ptr::null()) }.is_nan());
    let mut buf = [0.0f64; 4];
    assert_eq!(
        unsafe { peakfit_sample_tail(1.0, 0.5, 4, 0, buf.as_mut_ptr()) },
        PeakfitStatus::InvalidArgument
    );
    unsafe { peakfit_series_free(series) };
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("peakfit.h");
    let text = std::fs::read_to_string(&header).expect("header generated at build time");
    for symbol in [
        "PEAKFIT_H",
        "PeakfitStatus",
        "PEAKFIT_STATUS_BELOW_TAIL",
        "peakfit_series_create",
        "peakfit_fit",
        "peakfit_fit_tail_ccdf",
        "peakfit_gof",
        "peakfit_bootstrap_intervals",
        "peakfit_sample_tail",
        "peakfit_last_error_message",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile_dir();
    let c_file = dir.join("smoke.c");
    std::fs::write(
        &c_file,
        "#include \"peakfit.h\"\n\
         int main(void) {\n\
           PeakfitSeries *s = 0;\n\
           double xs[3] = {1.0, 2.0, 3.0};\n\
           PeakfitStatus st = peakfit_series_create(xs, 3, &s);\n\
           (void)st;\n\
           peakfit_series_free(s);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&header_dir)
        .arg(&c_file)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C syntax check failed"),
        Err(_) => eprintln!("cc unavailable; skipping C syntax check"),
    }
    std::fs::remove_dir_all(&dir).ok();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("peakfit-ffi-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
