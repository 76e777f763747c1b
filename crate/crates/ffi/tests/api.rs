use std::ffi::{CStr, CString};
use std::ptr;

use sep_eda_ffi::*;

fn two_blobs() -> (Vec<f64>, Vec<usize>) {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for i in 0..80 {
        let c = i / 40;
        let offset = if c == 0 { -5.0 } else { 5.0 };
        let t = i as f64 * 0.37;
        values.push(offset + 0.3 * t.sin());
        values.push(0.3 * (1.7 * t).cos());
        labels.push(c);
    }
    (values, labels)
}

fn last_error() -> String {
    let p = sep_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn cluster_both_methods() {
    let (values, labels) = two_blobs();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(sep_dataset_from_buffer(values.as_ptr(), 80, 2, labels.as_ptr(), &mut ds), SepStatus::Ok);
        assert_eq!((sep_dataset_n(ds), sep_dataset_d(ds)), (80, 2));
        for method in [SepMethod::Sep, SepMethod::Standard] {
            let mut res = ptr::null_mut();
            assert_eq!(sep_cluster(ds, 2, method, ptr::null(), &mut res), SepStatus::Ok);
            let mut len = 0;
            let pred = sep_result_labels(res, &mut len);
            assert_eq!(len, 80);
            let mut acc = 0.0;
            assert_eq!(sep_accuracy(pred, labels.as_ptr(), len, &mut acc), SepStatus::Ok);
            assert_eq!(acc, 1.0);
            let (mut m, mut s) = (0, 0);
            assert_eq!(sep_result_sizes(res, &mut m, &mut s), SepStatus::Ok);
            assert!(s >= 2 && s <= m && m <= 80);
            sep_result_free(res);
        }
        sep_dataset_free(ds);
    }
}

#[test]
fn tsne_embedding() {
    let (values, _) = two_blobs();
    let mut params = sep_params_default();
    params.perplexity = 5.0;
    params.tsne_iters = 200;
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(sep_dataset_from_buffer(values.as_ptr(), 80, 2, ptr::null(), &mut ds), SepStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(sep_tsne_embed(ds, SepMethod::Standard, &params, &mut res), SepStatus::Ok);
        let mut points = 0;
        let coords = sep_result_coords(res, &mut points);
        assert_eq!(points, 80);
        assert!(std::slice::from_raw_parts(coords, 160).iter().all(|v| v.is_finite()));
        sep_result_free(res);
        sep_dataset_free(ds);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let (values, _) = two_blobs();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(sep_dataset_from_buffer(ptr::null(), 1, 1, ptr::null(), &mut ds), SepStatus::NullPointer);
        assert!(last_error().contains("values"));
        let nan = [f64::NAN, 0.0];
        assert_eq!(sep_dataset_from_buffer(nan.as_ptr(), 1, 2, ptr::null(), &mut ds), SepStatus::Data);

        assert_eq!(sep_dataset_from_buffer(values.as_ptr(), 80, 2, ptr::null(), &mut ds), SepStatus::Ok);
        assert!(sep_last_error_message().is_null());
        let mut res = ptr::null_mut();
        assert_eq!(sep_cluster(ds, 1, SepMethod::Sep, ptr::null(), &mut res), SepStatus::Usage);
        let mut wide = sep_params_default();
        wide.kernel_q = 1e-3;
        assert_eq!(sep_cluster(ds, 5, SepMethod::Sep, &wide, &mut res), SepStatus::Numerical);
        assert!(last_error().contains("stable equilibrium"));
        assert!(res.is_null());
        sep_dataset_free(ds);

        let missing = CString::new("/nonexistent/data.csv").unwrap();
        let status = sep_dataset_load_csv(missing.as_ptr(), true, false, SepNormalization::MinMax, &mut ds);
        assert_eq!(status, SepStatus::Data);
        sep_dataset_free(ptr::null_mut());
        sep_result_free(ptr::null_mut());
    }
}

#[test]
fn load_csv_round_trip() {
    let dir = std::env::temp_dir().join(format!("sep-eda-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tiny.csv");
    std::fs::write(&path, "x,y,label\n0,0,3\n1,2,7\n2,4,3\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        let status = sep_dataset_load_csv(c_path.as_ptr(), true, true, SepNormalization::None, &mut ds);
        assert_eq!(status, SepStatus::Ok, "{}", last_error());
        assert_eq!((sep_dataset_n(ds), sep_dataset_d(ds)), (3, 2));
        sep_dataset_free(ds);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
