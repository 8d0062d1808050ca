//! C interface to the rolescope numerical core.
//!
//! Every function returns an [`RsStatus`]. On failure a message is kept per
//! thread and can be read with [`rs_last_error_message`]. Objects created by
//! the library are opaque handles released with their `_free` function.
//! Matrices are passed as row-major `double` arrays.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use rolescope::cluster::{silhouette, ward_cluster, ClusterError, Dendrogram, Group, Points};
use rolescope::dynamics::{rci, AbsentMode, DynamicsError, RoleCatalog, RoleTrajectory, Slot};
use rolescope::factor::{
    fit_factor_model, standardize_columns, FactorError, FactorModel, FactorOptions,
};
use rolescope::ingest::ProjectRef;

/// Result of every call; anything but `Ok` leaves a message for
/// [`rs_last_error_message`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NoData = 4,
    NumericalFailure = 5,
    Panic = 6,
}

/// How an absent period is placed when scoring role changes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsAbsentMode {
    /// Absent sits at the origin of factor space.
    Origin = 0,
    /// Steps into or out of absence are not counted.
    Skip = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RsMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Fitted factor model plus the scores of the rows it was fit on.
pub struct RsFactorModel {
    inner: FactorModel,
}

/// Ward merge tree.
pub struct RsDendrogram {
    inner: Dendrogram,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: RsStatus, msg: impl Into<String>) -> RsStatus {
    set_error(msg);
    status
}

fn factor_status(e: &FactorError) -> RsStatus {
    match e {
        FactorError::InsufficientRows(_) => RsStatus::NoData,
        _ => RsStatus::NumericalFailure,
    }
}

fn cluster_status(e: &ClusterError) -> RsStatus {
    match e {
        ClusterError::TooFewPoints(_) => RsStatus::NoData,
        _ => RsStatus::InvalidArgument,
    }
}

fn dynamics_status(e: &DynamicsError) -> RsStatus {
    match e {
        DynamicsError::EmptyPopulation => RsStatus::NoData,
        _ => RsStatus::InvalidArgument,
    }
}

/// Run `f`, turning panics into [`RsStatus::Panic`].
fn guard(f: impl FnOnce() -> RsStatus) -> RsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RsStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn input<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], RsStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(RsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn output<'a, T>(
    data: *mut T,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [T], RsStatus> {
    if len < need {
        return Err(fail(
            RsStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(fail(RsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(data, need))
}

fn cells(rows: usize, cols: usize, what: &str) -> Result<usize, RsStatus> {
    rows.checked_mul(cols)
        .ok_or_else(|| fail(RsStatus::InvalidArgument, format!("{what} size overflows")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standardize an `n_rows` x `n_cols` matrix, extract factors by iterated
/// principal-axis factoring (Kaiser criterion), rotate with quartimin and
/// compute regression scores. Zero tolerances or iteration caps select the
/// defaults. Constant columns are dropped before fitting.
///
/// # Safety
/// `data` must point to `n_rows * n_cols` doubles and `out` to writable
/// handle storage.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_fit(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut RsFactorModel,
) -> RsStatus {
    guard(|| {
        if out.is_null() {
            return fail(RsStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let len = tri!(cells(n_rows, n_cols, "matrix"));
        let values = tri!(input(data, len, "data"));
        if values.iter().any(|v| !v.is_finite()) {
            return fail(
                RsStatus::InvalidArgument,
                "data contains a non-finite value",
            );
        }
        let matrix = DMatrix::from_row_slice(n_rows, n_cols, values);
        let names: Vec<String> = (1..=n_cols).map(|j| format!("v{j}")).collect();
        let z = match standardize_columns(&matrix, &names) {
            Ok(z) => z,
            Err(e) => return fail(factor_status(&e), e.to_string()),
        };
        let mut opts = FactorOptions::default();
        if tol > 0.0 {
            opts.paf.tol = tol;
        }
        if max_iter > 0 {
            opts.paf.max_iter = max_iter;
        }
        match fit_factor_model(&z, opts) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RsFactorModel { inner }));
                RsStatus::Ok
            }
            Err(e) => fail(factor_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from [`rs_factor_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_free(model: *mut RsFactorModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const RsFactorModel) -> Result<&'a FactorModel, RsStatus> {
    model
        .as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| fail(RsStatus::NullPointer, "model is null"))
}

/// Retained factor count, kept variable count and row count.
///
/// # Safety
/// `model` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_shape(
    model: *const RsFactorModel,
    k: *mut usize,
    n_vars: *mut usize,
    n_rows: *mut usize,
) -> RsStatus {
    guard(|| {
        let m = tri!(model_ref(model));
        for (p, v) in [
            (k, m.k()),
            (n_vars, m.loadings.nrows()),
            (n_rows, m.scores.nrows()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        RsStatus::Ok
    })
}

unsafe fn copy_matrix(m: &DMatrix<f64>, out: *mut f64, len: usize, what: &str) -> RsStatus {
    let need = m.nrows() * m.ncols();
    let buf = tri!(output(out, len, need, what));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf[i * m.ncols() + j] = m[(i, j)];
        }
    }
    RsStatus::Ok
}

unsafe fn copy_vec(v: &[f64], out: *mut f64, len: usize, what: &str) -> RsStatus {
    let buf = tri!(output(out, len, v.len(), what));
    buf.copy_from_slice(v);
    RsStatus::Ok
}

/// Pattern loadings, kept variables x factors.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_loadings(
    model: *const RsFactorModel,
    out: *mut f64,
    len: usize,
) -> RsStatus {
    guard(|| copy_matrix(&tri!(model_ref(model)).loadings, out, len, "out"))
}

/// Factor correlation matrix, factors x factors.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_phi(
    model: *const RsFactorModel,
    out: *mut f64,
    len: usize,
) -> RsStatus {
    guard(|| copy_matrix(&tri!(model_ref(model)).phi, out, len, "out"))
}

/// Communality of each kept variable.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_communalities(
    model: *const RsFactorModel,
    out: *mut f64,
    len: usize,
) -> RsStatus {
    guard(|| copy_vec(&tri!(model_ref(model)).communalities, out, len, "out"))
}

/// Eigenvalues of the correlation matrix, descending.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_eigenvalues(
    model: *const RsFactorModel,
    out: *mut f64,
    len: usize,
) -> RsStatus {
    guard(|| copy_vec(&tri!(model_ref(model)).eigenvalues, out, len, "out"))
}

/// Factor scores, rows x factors.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rs_factor_scores(
    model: *const RsFactorModel,
    out: *mut f64,
    len: usize,
) -> RsStatus {
    guard(|| copy_matrix(&tri!(model_ref(model)).scores, out, len, "out"))
}

unsafe fn points(data: *const f64, n: usize, dim: usize) -> Result<Points, RsStatus> {
    if dim == 0 {
        return Err(fail(RsStatus::InvalidArgument, "dim must be positive"));
    }
    let len = cells(n, dim, "points")?;
    let values = input(data, len, "points")?;
    Points::new(values.to_vec(), dim).map_err(|e| fail(cluster_status(&e), e.to_string()))
}

/// Ward clustering of `n` points of dimension `dim`.
///
/// # Safety
/// `data` must hold `n * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_ward(
    data: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut RsDendrogram,
) -> RsStatus {
    guard(|| {
        if out.is_null() {
            return fail(RsStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let p = tri!(points(data, n, dim));
        if p.is_empty() {
            return fail(RsStatus::NoData, "no points");
        }
        *out = Box::into_raw(Box::new(RsDendrogram {
            inner: ward_cluster(&p),
        }));
        RsStatus::Ok
    })
}

/// # Safety
/// `tree` must be null or a handle from [`rs_ward`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_dendrogram_free(tree: *mut RsDendrogram) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

unsafe fn tree_ref<'a>(tree: *const RsDendrogram) -> Result<&'a Dendrogram, RsStatus> {
    tree.as_ref()
        .map(|t| &t.inner)
        .ok_or_else(|| fail(RsStatus::NullPointer, "dendrogram is null"))
}

/// Number of leaves; the tree has one merge fewer.
///
/// # Safety
/// `tree` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_dendrogram_leaves(
    tree: *const RsDendrogram,
    out: *mut usize,
) -> RsStatus {
    guard(|| {
        let t = tri!(tree_ref(tree));
        match out.as_mut() {
            Some(o) => {
                *o = t.n_leaves();
                RsStatus::Ok
            }
            None => fail(RsStatus::NullPointer, "out is null"),
        }
    })
}

/// Copy the merges in order. Leaves are nodes `0..n`, merge `i` creates node
/// `n + i`, and heights are the Ward merge costs.
///
/// # Safety
/// `out` must hold `len` merges.
#[no_mangle]
pub unsafe extern "C" fn rs_dendrogram_merges(
    tree: *const RsDendrogram,
    out: *mut RsMerge,
    len: usize,
) -> RsStatus {
    guard(|| {
        let t = tri!(tree_ref(tree));
        let buf = tri!(output(out, len, t.merges().len(), "out"));
        for (b, m) in buf.iter_mut().zip(t.merges()) {
            *b = RsMerge {
                left: m.left,
                right: m.right,
                height: m.height,
                size: m.size,
            };
        }
        RsStatus::Ok
    })
}

/// Flat labels `0..k` for every leaf after cutting the tree into `k`
/// clusters, numbered by their smallest leaf.
///
/// # Safety
/// `labels` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn rs_dendrogram_cut(
    tree: *const RsDendrogram,
    k: usize,
    labels: *mut usize,
    len: usize,
) -> RsStatus {
    guard(|| {
        let t = tri!(tree_ref(tree));
        let cut = match t.cut(k) {
            Ok(c) => c,
            Err(e) => return fail(cluster_status(&e), e.to_string()),
        };
        let buf = tri!(output(labels, len, cut.len(), "labels"));
        buf.copy_from_slice(&cut);
        RsStatus::Ok
    })
}

/// Per-point silhouette values. `mean` (optional) receives their mean.
/// Fails when fewer than two clusters are present.
///
/// # Safety
/// `data` must hold `n * dim` doubles, `labels` and `out` `n` values.
#[no_mangle]
pub unsafe extern "C" fn rs_silhouette(
    data: *const f64,
    n: usize,
    dim: usize,
    labels: *const usize,
    out: *mut f64,
    mean: *mut f64,
) -> RsStatus {
    guard(|| {
        let p = tri!(points(data, n, dim));
        let labels = tri!(input(labels, n, "labels"));
        let buf = tri!(output(out, n, n, "out"));
        let Some(values) = silhouette(&p, labels) else {
            return fail(
                RsStatus::InvalidArgument,
                "silhouette needs at least two clusters",
            );
        };
        buf.copy_from_slice(&values);
        if let Some(m) = mean.as_mut() {
            *m = values.iter().sum::<f64>() / values.len().max(1) as f64;
        }
        RsStatus::Ok
    })
}

/// Role change intensity of one trajectory.
///
/// `sequence` holds one slot per period: 0 for absent, otherwise a 1-based
/// role id indexing the rows of `centroids` (`n_roles` x `dim`). On success
/// `has_value` tells whether the trajectory changed role at all; `value` is
/// then the log10 of the summed centroid distances.
///
/// # Safety
/// Pointers must cover the stated lengths; `value` and `has_value` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_rci(
    sequence: *const usize,
    len: usize,
    centroids: *const f64,
    n_roles: usize,
    dim: usize,
    mode: RsAbsentMode,
    value: *mut f64,
    has_value: *mut bool,
) -> RsStatus {
    guard(|| {
        if value.is_null() || has_value.is_null() {
            return fail(RsStatus::NullPointer, "value or has_value is null");
        }
        let seq = tri!(input(sequence, len, "sequence"));
        let total = tri!(cells(n_roles, dim, "centroids"));
        let c = tri!(input(centroids, total, "centroids"));
        let catalog = RoleCatalog {
            groups: (1..=n_roles).map(|id| (id, Group::Supporting)).collect(),
            centroids: (1..=n_roles)
                .map(|id| (id, c[(id - 1) * dim..id * dim].to_vec()))
                .collect(),
            labels: BTreeMap::new(),
            rare: None,
        };
        let slots: Vec<Slot> = seq.iter().map(|&s| Slot::from(s)).collect();
        let project: ProjectRef = "ffi/trajectory".parse().expect("static project name");
        let t = RoleTrajectory::new(project, "ffi", slots);
        let mode = match mode {
            RsAbsentMode::Origin => AbsentMode::Origin,
            RsAbsentMode::Skip => AbsentMode::Skip,
        };
        match rci(&t, &catalog, mode) {
            Ok(v) => {
                *has_value = v.is_some();
                *value = v.unwrap_or(0.0);
                RsStatus::Ok
            }
            Err(e) => fail(dynamics_status(&e), e.to_string()),
        }
    })
}
