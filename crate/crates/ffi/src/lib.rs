//! C ABI over `fairscope`.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`FsStatus`]; results go through out
//!   pointers that are written only on success.
//! - On failure, [`fs_last_error`] returns a message for the calling thread,
//!   valid until the next failing call on that thread.
//! - Models and score sets are opaque handles created by `*_load` functions
//!   and released with the matching `*_free` function. Freeing NULL is a
//!   no-op.
//! - Grids are row-major `double` arrays; images are channel-major (CHW)
//!   with values in `[0, 1]`.
//! - Panics never cross the boundary; they are reported as
//!   [`FsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fairscope::cam::{load_model, ScoreCam};
use fairscope::fairness::{fdr_from_rates, PairKind, ScoreEntry};
use fairscope::stats::{compute_spatial_profile, damv_from_grids, Cohort, CohortStatistics};
use fairscope::{ActivationMap, ComparisonScoreSet, Demographics, Error, Grid, ImageTensor, ToyModelSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    /// A threshold could not be calibrated for the requested target.
    Unresolvable = 6,
    /// An output buffer has the wrong length.
    BufferSize = 7,
    Panic = 8,
}

/// Loaded model.
pub struct FsModel(ToyModelSpec);

/// Indexed comparison scores.
pub struct FsScoreSet(ComparisonScoreSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => FsStatus::Io,
            Error::Shape(_) | Error::NonFinite { .. } => FsStatus::Shape,
            Error::UnresolvableTarget { .. } | Error::TiedMaximum { .. } => FsStatus::Unresolvable,
            Error::ModelLayer { .. }
            | Error::ModelFormat(_)
            | Error::LayerMismatch { .. }
            | Error::UnexpectedEof
            | Error::BadMagic
            | Error::UnsupportedVersion(_)
            | Error::Record { .. }
            | Error::Csv { .. }
            | Error::Image { .. }
            | Error::Manifest(_)
            | Error::Json(_) => FsStatus::Format,
            _ => FsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FsStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(FsStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be NULL or valid for `len` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| fail(FsStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn expect_len(actual: usize, expected: usize, name: &str) -> Result<(), Failure> {
    if actual == expected {
        Ok(())
    } else {
        Err(fail(FsStatus::BufferSize, format!("{name} has {actual} elements, expected {expected}")))
    }
}

fn cells(width: usize, height: usize) -> Result<usize, Failure> {
    width
        .checked_mul(height)
        .filter(|&n| n > 0)
        .ok_or_else(|| fail(FsStatus::Shape, format!("invalid grid size {width}x{height}")))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// owned by the library.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// models

/// Parses a model from an in-memory model file.
///
/// # Safety
/// `bytes` must be valid for `len` reads; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_model_load(bytes: *const u8, len: usize, out: *mut *mut FsModel) -> FsStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = load_model(slice(bytes, len, "bytes")?)?;
        *out = Box::into_raw(Box::new(FsModel(model)));
        Ok(())
    })
}

/// Reads and parses a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_model_load_file(path: *const c_char, out: *mut *mut FsModel) -> FsStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = string(path, "path")?;
        let bytes = std::fs::read(Path::new(path)).map_err(|e| fail(FsStatus::Io, format!("reading {path}: {e}")))?;
        *out = Box::into_raw(Box::new(FsModel(load_model(&bytes)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from `fs_model_load*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fs_model_free(model: *mut FsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input shape as channels, height, width.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_model_input_shape(
    model: *const FsModel,
    channels: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> FsStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(channels, "channels")?;
        non_null(height, "height")?;
        non_null(width, "width")?;
        let (c, h, w) = (*model).0.input_shape();
        (*channels, *height, *width) = (c, h, w);
        Ok(())
    })
}

/// Score-CAM map of a CHW image at the input resolution. With `symmetrized`
/// non-zero, the map is averaged with the mirrored map of the flipped image.
///
/// # Safety
/// `model` must be a live handle; `image` valid for `image_len` reads and
/// `out_map` for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn fs_score_cam(
    model: *const FsModel,
    image: *const f64,
    image_len: usize,
    symmetrized: i32,
    out_map: *mut f64,
    out_len: usize,
) -> FsStatus {
    guard(|| {
        non_null(model, "model")?;
        let model = &(*model).0;
        let (c, h, w) = model.input_shape();
        expect_len(image_len, c * h * w, "image")?;
        expect_len(out_len, h * w, "out_map")?;
        let img = ImageTensor::new(c, h, w, slice(image, image_len, "image")?.to_vec())?;
        let engine = ScoreCam::new(model);
        let cam = if symmetrized != 0 { engine.symmetrized(&img)? } else { engine.compute(&img)?.cam };
        slice_mut(out_map, out_len, "out_map")?.copy_from_slice(cam.values());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// cohort statistics

/// Mean (MAM) and spread (AM-V) maps of `count` maps stored back to back.
///
/// # Safety
/// `maps` must be valid for `count * width * height` reads; `out_mam` and
/// `out_amv` for `width * height` writes each.
#[no_mangle]
pub unsafe extern "C" fn fs_cohort_stats(
    maps: *const f64,
    count: usize,
    width: usize,
    height: usize,
    out_mam: *mut f64,
    out_amv: *mut f64,
) -> FsStatus {
    guard(|| {
        let n = cells(width, height)?;
        let total = count.checked_mul(n).ok_or_else(|| fail(FsStatus::Shape, "cohort too large"))?;
        let data = slice(maps, total, "maps")?;
        let maps = data
            .chunks_exact(n)
            .enumerate()
            .map(|(k, v)| ActivationMap::new(k.to_string(), Grid::new(width, height, v.to_vec())?, Demographics::default()))
            .collect::<fairscope::Result<Vec<_>>>()?;
        let stats = CohortStatistics::compute(&Cohort::new("cohort", maps)?)?;
        slice_mut(out_mam, n, "out_mam")?.copy_from_slice(stats.mam.values());
        slice_mut(out_amv, n, "out_amv")?.copy_from_slice(stats.amv.values());
        Ok(())
    })
}

/// Mirror-averaged absolute difference of two AM-V grids (D-AM-V).
///
/// # Safety
/// `a` and `b` must be valid for `width * height` reads and `out` for as many
/// writes.
#[no_mangle]
pub unsafe extern "C" fn fs_damv(a: *const f64, b: *const f64, width: usize, height: usize, out: *mut f64) -> FsStatus {
    guard(|| {
        let n = cells(width, height)?;
        let a = Grid::new(width, height, slice(a, n, "a")?.to_vec())?;
        let b = Grid::new(width, height, slice(b, n, "b")?.to_vec())?;
        slice_mut(out, n, "out")?.copy_from_slice(damv_from_grids(&a, &b)?.values());
        Ok(())
    })
}

/// Column sums (`s_x`, `width` values) and row sums (`s_y`, `height` values)
/// of an AM-V grid.
///
/// # Safety
/// `amv` must be valid for `width * height` reads, `s_x` for `width` and
/// `s_y` for `height` writes.
#[no_mangle]
pub unsafe extern "C" fn fs_spatial_profile(
    amv: *const f64,
    width: usize,
    height: usize,
    s_x: *mut f64,
    s_y: *mut f64,
) -> FsStatus {
    guard(|| {
        let n = cells(width, height)?;
        let g = Grid::new(width, height, slice(amv, n, "amv")?.to_vec())?;
        let p = compute_spatial_profile(&g, "amv");
        slice_mut(s_x, width, "s_x")?.copy_from_slice(&p.s_x);
        slice_mut(s_y, height, "s_y")?.copy_from_slice(&p.s_y);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// scores and fairness

/// Loads a score CSV (`pair_id,group,kind,score`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_scores_load_csv(path: *const c_char, out: *mut *mut FsScoreSet) -> FsStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = string(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| fail(FsStatus::Io, format!("opening {path}: {e}")))?;
        let set = fairscope::io::read_scores_csv(std::io::BufReader::new(file))?;
        *out = Box::into_raw(Box::new(FsScoreSet(set)));
        Ok(())
    })
}

/// Builds a score set from parallel arrays. `genuine[i]` is non-zero for a
/// genuine pair and zero for an imposter pair.
///
/// # Safety
/// `groups` must hold `count` NUL-terminated strings; `genuine` and `scores`
/// must be valid for `count` reads; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_scores_from_arrays(
    groups: *const *const c_char,
    genuine: *const u8,
    scores: *const f64,
    count: usize,
    out: *mut *mut FsScoreSet,
) -> FsStatus {
    guard(|| {
        non_null(out, "out")?;
        let groups = slice(groups, count, "groups")?;
        let genuine = slice(genuine, count, "genuine")?;
        let scores = slice(scores, count, "scores")?;
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            entries.push(ScoreEntry {
                pair_id: i.to_string(),
                group: string(groups[i], "group")?.to_string(),
                kind: if genuine[i] != 0 { PairKind::Genuine } else { PairKind::Imposter },
                score: scores[i],
            });
        }
        *out = Box::into_raw(Box::new(FsScoreSet(ComparisonScoreSet::new(entries)?)));
        Ok(())
    })
}

/// # Safety
/// `set` must be NULL or a handle from `fs_scores_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fs_scores_free(set: *mut FsScoreSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// FMR of `group` (or `"all"`) at `tau`.
///
/// # Safety
/// `set` must be a live handle, `group` a NUL-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_fmr(set: *const FsScoreSet, group: *const c_char, tau: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(out, "out")?;
        *out = (*set).0.fmr(string(group, "group")?, tau)?;
        Ok(())
    })
}

/// FNMR of `group` (or `"all"`) at `tau`.
///
/// # Safety
/// As for [`fs_fmr`].
#[no_mangle]
pub unsafe extern "C" fn fs_fnmr(set: *const FsScoreSet, group: *const c_char, tau: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(out, "out")?;
        *out = (*set).0.fnmr(string(group, "group")?, tau)?;
        Ok(())
    })
}

/// Global threshold for `target_fmr` on the pooled imposter scores, with the
/// FMR it achieves.
///
/// # Safety
/// `set` must be a live handle; `tau` and `achieved_fmr` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fs_calibrate_tau(
    set: *const FsScoreSet,
    target_fmr: f64,
    tau: *mut f64,
    achieved_fmr: *mut f64,
) -> FsStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(tau, "tau")?;
        non_null(achieved_fmr, "achieved_fmr")?;
        let c = (*set).0.calibrate_tau(target_fmr)?;
        (*tau, *achieved_fmr) = (c.tau, c.achieved_fmr);
        Ok(())
    })
}

/// FDR at `tau` across every group of the set.
///
/// # Safety
/// `set` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_fdr_at(set: *const FsScoreSet, tau: f64, alpha: f64, out: *mut f64) -> FsStatus {
    guard(|| {
        non_null(set, "set")?;
        non_null(out, "out")?;
        let set = &(*set).0;
        *out = set.fdr(&set.groups(), tau, alpha)?.fdr;
        Ok(())
    })
}

/// FDR from per-group error rates, e.g. published tables.
///
/// # Safety
/// `fmr` and `fnmr` must be valid for `groups` reads; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_fdr_from_rates(
    fmr: *const f64,
    fnmr: *const f64,
    groups: usize,
    alpha: f64,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        non_null(out, "out")?;
        let fmr = slice(fmr, groups, "fmr")?;
        let fnmr = slice(fnmr, groups, "fnmr")?;
        let names: Vec<String> = (0..groups).map(|i| i.to_string()).collect();
        let rates = names.iter().zip(fmr.iter().zip(fnmr)).map(|(n, (&a, &b))| (n.as_str(), a, b));
        *out = fdr_from_rates(rates, alpha)?.fdr;
        Ok(())
    })
}
