use std::ffi::CStr;
use std::ptr;

use rolescope_ffi::*;

fn last_error() -> String {
    let p = rs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Three variables sharing one factor with loading 0.8, built exactly:
/// x_i = 0.8 f + 0.6 e_i over a balanced design.
fn one_factor_data() -> (Vec<f64>, usize) {
    let signs = [-1.0, 1.0];
    let mut rows = Vec::new();
    for &f in &signs {
        for &a in &signs {
            for &b in &signs {
                for &c in &signs {
                    rows.extend([0.8 * f + 0.6 * a, 0.8 * f + 0.6 * b, 0.8 * f + 0.6 * c]);
                }
            }
        }
    }
    let n = rows.len() / 3;
    (rows, n)
}

#[test]
fn factor_fit_round_trip() {
    let (data, n) = one_factor_data();
    let mut model = ptr::null_mut();
    let st = unsafe { rs_factor_fit(data.as_ptr(), n, 3, 0.0, 0, &mut model) };
    assert_eq!(st, RsStatus::Ok);
    let (mut k, mut p, mut rows) = (0, 0, 0);
    assert_eq!(
        unsafe { rs_factor_shape(model, &mut k, &mut p, &mut rows) },
        RsStatus::Ok
    );
    assert_eq!((k, p, rows), (1, 3, n));

    let mut loadings = [0.0; 3];
    assert_eq!(
        unsafe { rs_factor_loadings(model, loadings.as_mut_ptr(), 3) },
        RsStatus::Ok
    );
    for l in loadings {
        assert!((l - 0.8).abs() < 0.01, "loading {l}");
    }
    let mut h2 = [0.0; 3];
    assert_eq!(
        unsafe { rs_factor_communalities(model, h2.as_mut_ptr(), 3) },
        RsStatus::Ok
    );
    for h in h2 {
        assert!((h - 0.64).abs() < 0.01, "communality {h}");
    }
    let mut phi = [0.0; 1];
    assert_eq!(
        unsafe { rs_factor_phi(model, phi.as_mut_ptr(), 1) },
        RsStatus::Ok
    );
    assert_eq!(phi[0], 1.0);
    let mut eig = [0.0; 3];
    assert_eq!(
        unsafe { rs_factor_eigenvalues(model, eig.as_mut_ptr(), 3) },
        RsStatus::Ok
    );
    assert!((eig[0] - (1.0 + 2.0 * 0.64)).abs() < 1e-9);

    let mut scores = vec![0.0; n];
    assert_eq!(
        unsafe { rs_factor_scores(model, scores.as_mut_ptr(), n) },
        RsStatus::Ok
    );
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { rs_factor_scores(model, small.as_mut_ptr(), 2) },
        RsStatus::BufferTooSmall
    );
    assert!(last_error().contains("needed"));
    unsafe { rs_factor_free(model) };
}

#[test]
fn factor_fit_errors() {
    let mut model = ptr::null_mut();
    let one = [1.0, 2.0, 3.0];
    assert_eq!(
        unsafe { rs_factor_fit(one.as_ptr(), 1, 3, 0.0, 0, &mut model) },
        RsStatus::NoData
    );
    assert!(model.is_null());
    assert_eq!(
        unsafe { rs_factor_fit(ptr::null(), 4, 3, 0.0, 0, &mut model) },
        RsStatus::NullPointer
    );
    let bad = [1.0, f64::NAN, 2.0, 3.0];
    assert_eq!(
        unsafe { rs_factor_fit(bad.as_ptr(), 2, 2, 0.0, 0, &mut model) },
        RsStatus::InvalidArgument
    );
    assert!(last_error().contains("non-finite"));
    // independent columns leave nothing above the Kaiser threshold
    let indep = [1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
    assert_eq!(
        unsafe { rs_factor_fit(indep.as_ptr(), 4, 2, 0.0, 0, &mut model) },
        RsStatus::NumericalFailure
    );
    assert_eq!(
        unsafe {
            rs_factor_shape(
                ptr::null(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
            )
        },
        RsStatus::NullPointer
    );
    unsafe { rs_factor_free(ptr::null_mut()) };
}

#[test]
fn successful_call_clears_error() {
    let mut model = ptr::null_mut();
    assert_ne!(
        unsafe { rs_factor_fit(ptr::null(), 4, 3, 0.0, 0, &mut model) },
        RsStatus::Ok
    );
    assert!(!rs_last_error_message().is_null());
    let mut tree = ptr::null_mut();
    let pts = [0.0, 1.0];
    assert_eq!(
        unsafe { rs_ward(pts.as_ptr(), 2, 1, &mut tree) },
        RsStatus::Ok
    );
    assert!(rs_last_error_message().is_null());
    unsafe { rs_dendrogram_free(tree) };
}

#[test]
fn ward_and_cut() {
    let pts = [0.0, 1.0, 10.0, 11.0];
    let mut tree = ptr::null_mut();
    assert_eq!(
        unsafe { rs_ward(pts.as_ptr(), 4, 1, &mut tree) },
        RsStatus::Ok
    );
    let mut n = 0;
    assert_eq!(unsafe { rs_dendrogram_leaves(tree, &mut n) }, RsStatus::Ok);
    assert_eq!(n, 4);
    let mut merges = [RsMerge::default(); 3];
    assert_eq!(
        unsafe { rs_dendrogram_merges(tree, merges.as_mut_ptr(), 3) },
        RsStatus::Ok
    );
    assert_eq!(
        (merges[0].left, merges[0].right, merges[0].height),
        (0, 1, 0.5)
    );
    assert_eq!(
        (merges[1].left, merges[1].right, merges[1].height),
        (2, 3, 0.5)
    );
    // centroids 0.5 and 10.5, two points each: 2*2/4 * 100
    assert_eq!(
        (
            merges[2].left,
            merges[2].right,
            merges[2].height,
            merges[2].size
        ),
        (4, 5, 100.0, 4)
    );

    let mut labels = [9usize; 4];
    assert_eq!(
        unsafe { rs_dendrogram_cut(tree, 2, labels.as_mut_ptr(), 4) },
        RsStatus::Ok
    );
    assert_eq!(labels, [0, 0, 1, 1]);
    assert_eq!(
        unsafe { rs_dendrogram_cut(tree, 5, labels.as_mut_ptr(), 4) },
        RsStatus::InvalidArgument
    );

    let mut sil = [0.0; 4];
    let mut mean = 0.0;
    let st = unsafe {
        rs_silhouette(
            pts.as_ptr(),
            4,
            1,
            labels.as_ptr(),
            sil.as_mut_ptr(),
            &mut mean,
        )
    };
    assert_eq!(st, RsStatus::Ok);
    assert!((sil[0] - 0.904762).abs() < 1e-6);
    assert!((mean - sil.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    unsafe { rs_dendrogram_free(tree) };

    let mut empty = ptr::null_mut();
    assert_eq!(
        unsafe { rs_ward(ptr::null(), 0, 2, &mut empty) },
        RsStatus::NoData
    );
    assert_eq!(
        unsafe { rs_ward(pts.as_ptr(), 4, 0, &mut empty) },
        RsStatus::InvalidArgument
    );
}

#[test]
fn silhouette_needs_two_clusters() {
    let pts = [0.0, 1.0, 2.0];
    let labels = [0usize; 3];
    let mut out = [0.0; 3];
    let st = unsafe {
        rs_silhouette(
            pts.as_ptr(),
            3,
            1,
            labels.as_ptr(),
            out.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, RsStatus::InvalidArgument);
}

#[test]
fn rci_values() {
    // role 1 at the origin, role 2 at distance 10, role 3 halfway
    let centroids = [0.0, 0.0, 6.0, 8.0, 3.0, 4.0];
    let run = |seq: &[usize], mode| {
        let (mut v, mut has) = (f64::NAN, false);
        let st = unsafe {
            rs_rci(
                seq.as_ptr(),
                seq.len(),
                centroids.as_ptr(),
                3,
                2,
                mode,
                &mut v,
                &mut has,
            )
        };
        assert_eq!(st, RsStatus::Ok);
        has.then_some(v)
    };
    assert_eq!(run(&[1, 1, 2, 2], RsAbsentMode::Origin), Some(1.0));
    assert_eq!(run(&[1, 3, 2], RsAbsentMode::Origin), Some(1.0));
    assert_eq!(run(&[2, 2, 2], RsAbsentMode::Origin), None);
    assert_eq!(run(&[0, 2, 0], RsAbsentMode::Origin), Some(20f64.log10()));
    assert_eq!(run(&[0, 2, 0], RsAbsentMode::Skip), None);

    let (mut v, mut has) = (0.0, false);
    let seq = [1usize, 4];
    let st = unsafe {
        rs_rci(
            seq.as_ptr(),
            2,
            centroids.as_ptr(),
            3,
            2,
            RsAbsentMode::Origin,
            &mut v,
            &mut has,
        )
    };
    assert_eq!(st, RsStatus::InvalidArgument);
    assert!(last_error().contains('4'));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
