//! C ABI over checkpoint loading, thematic-fit scoring, and rank
//! correlation. Every entry point is panic-safe: failures come back as an
//! `RfStatus` code and a thread-local message readable through
//! `rf_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rolefit::eval::{spearman, thematic_fit_score};
use rolefit::roleset::{RoleSet, Vocabulary};
use rolefit::training::{load_checkpoint, Checkpoint};

/// Result code of every fallible call. `RF_OK` is zero; anything else
/// leaves a message in `rf_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    RfOk = 0,
    RfNullArgument = 1,
    RfInvalidUtf8 = 2,
    RfBadCheckpoint = 3,
    RfDegenerate = 4,
    RfPanic = 5,
}

/// A loaded model snapshot: parameters plus the role inventory and
/// vocabulary they were trained with. Opaque; create with
/// `rf_checkpoint_open`, release with `rf_checkpoint_close`.
pub struct RfCheckpoint {
    ckpt: Checkpoint,
    rs: RoleSet,
    vocab: Vocabulary,
}

/// Shape and provenance summary of an open checkpoint.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfCheckpointInfo {
    /// Embedding width.
    pub dim: usize,
    /// Residual block count.
    pub blocks: usize,
    /// Kept lemma count; the shared out-of-vocabulary slot is one more.
    pub vocab_words: usize,
    /// Role inventory size including the reserved labels.
    pub role_labels: usize,
    /// Training epoch the snapshot was taken at.
    pub epoch: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").expect("empty"));
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL stripped");
    });
}

fn guard<F: FnOnce() -> RfStatus>(body: F) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RfStatus::RfPanic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, RfStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(RfStatus::RfNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        RfStatus::RfInvalidUtf8
    })
}

/// Library version as a static NUL-terminated string. Never freed.
#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a checkpoint file. On success writes a handle to `out`; the caller
/// owns it and must release it with `rf_checkpoint_close`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid location for
/// one pointer; either may be null (reported as an error, not UB).
#[no_mangle]
pub unsafe extern "C" fn rf_checkpoint_open(
    path: *const c_char,
    out: *mut *mut RfCheckpoint,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return RfStatus::RfNullArgument;
        }
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ckpt = match load_checkpoint(Path::new(path)) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return RfStatus::RfBadCheckpoint;
            }
        };
        let rs = match ckpt.roleset() {
            Ok(rs) => rs,
            Err(e) => {
                set_error(&e.to_string());
                return RfStatus::RfBadCheckpoint;
            }
        };
        let vocab = ckpt.vocabulary();
        *out = Box::into_raw(Box::new(RfCheckpoint { ckpt, rs, vocab }));
        RfStatus::RfOk
    })
}

/// Release a handle from `rf_checkpoint_open`. Null is a no-op.
///
/// # Safety
/// `ckpt` must be null or a handle from `rf_checkpoint_open` that has not
/// been closed already.
#[no_mangle]
pub unsafe extern "C" fn rf_checkpoint_close(ckpt: *mut RfCheckpoint) {
    if !ckpt.is_null() {
        drop(Box::from_raw(ckpt));
    }
}

/// Describe an open checkpoint.
///
/// # Safety
/// `ckpt` must be null or an open handle; `out` must be null or a valid
/// location for one `RfCheckpointInfo`.
#[no_mangle]
pub unsafe extern "C" fn rf_checkpoint_info(
    ckpt: *const RfCheckpoint,
    out: *mut RfCheckpointInfo,
) -> RfStatus {
    guard(|| {
        if ckpt.is_null() || out.is_null() {
            set_error("ckpt or out is null");
            return RfStatus::RfNullArgument;
        }
        let handle = &*ckpt;
        let dims = handle.ckpt.meta.dims;
        *out = RfCheckpointInfo {
            dim: dims.dim,
            blocks: dims.blocks,
            vocab_words: dims.vocab_words,
            role_labels: dims.role_labels,
            epoch: handle.ckpt.meta.epoch,
        };
        RfStatus::RfOk
    })
}

/// Word-head probability of `noun` filling `role` of `verb` under the
/// loaded model. Out-of-vocabulary lemmas map to the shared OOV slot and
/// unknown role labels to the UNKNOWN row, so every query yields a score.
///
/// # Safety
/// `ckpt` must be null or an open handle; the three strings must be null or
/// NUL-terminated; `out` must be null or a valid location for one double.
#[no_mangle]
pub unsafe extern "C" fn rf_thematic_fit(
    ckpt: *const RfCheckpoint,
    verb: *const c_char,
    role: *const c_char,
    noun: *const c_char,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        if ckpt.is_null() || out.is_null() {
            set_error("ckpt or out is null");
            return RfStatus::RfNullArgument;
        }
        let (verb, role, noun) = match (
            read_str(verb, "verb"),
            read_str(role, "role"),
            read_str(noun, "noun"),
        ) {
            (Ok(v), Ok(r), Ok(n)) => (v, r, n),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let handle = &*ckpt;
        *out = thematic_fit_score(
            &handle.ckpt.params,
            verb,
            role,
            noun,
            &handle.rs,
            &handle.vocab,
        );
        RfStatus::RfOk
    })
}

/// Tie-aware rank correlation of two equal-length score lists. Fails with
/// `RF_DEGENERATE` when either list is constant, shorter than 2, or
/// contains non-finite values.
///
/// # Safety
/// `xs` and `ys` must each point to `len` readable doubles (or be null,
/// reported as an error); `out` must be null or a valid location for one
/// double.
#[no_mangle]
pub unsafe extern "C" fn rf_spearman(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || out.is_null() {
            set_error("xs, ys, or out is null");
            return RfStatus::RfNullArgument;
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let ys = std::slice::from_raw_parts(ys, len);
        match spearman(xs, ys) {
            Ok(rho) => {
                *out = rho;
                RfStatus::RfOk
            }
            Err(e) => {
                set_error(&e.to_string());
                RfStatus::RfDegenerate
            }
        }
    })
}
