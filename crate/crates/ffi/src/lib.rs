//! C ABI for ompac-core.
//!
//! Every fallible function returns an [`OmpacStatus`]. On failure a
//! human-readable message is available from [`ompac_last_error`] until the
//! next call on the same thread. Objects are handed out as opaque pointers
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ompac_core::harness::{self, RunConfig};
use ompac_core::neuralnet::{Activation, Network};
use ompac_core::ompac::sus_select;
use ompac_core::rng::{stream, StreamTag};
use ompac_core::tetris::{Board, FeatureEncoding, Piece, Placement};
use ompac_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Runtime = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpacActivation {
    Sil = 0,
    Dsil = 1,
}

/// Opaque feed-forward value network.
pub struct OmpacNetwork(Network);

/// Opaque Tetris board.
pub struct OmpacBoard(Board);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: OmpacStatus, msg: impl Into<String>) -> OmpacStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> OmpacStatus {
    let status = match e {
        Error::Config(_) => OmpacStatus::Config,
        Error::InvalidArgument(_) => OmpacStatus::InvalidArgument,
        _ => OmpacStatus::Runtime,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> OmpacStatus) -> OmpacStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        fail(OmpacStatus::Panic, msg)
    })
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(OmpacStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message describing the last failure on this thread, or null.
#[no_mangle]
pub extern "C" fn ompac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ompac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a randomly initialised network. `hidden == 0` gives a linear map.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ompac_network_new(
    inputs: usize,
    hidden: usize,
    outputs: usize,
    activation: OmpacActivation,
    seed: u64,
    out: *mut *mut OmpacNetwork,
) -> OmpacStatus {
    guard(|| {
        non_null!(out);
        if inputs == 0 || outputs == 0 {
            return fail(OmpacStatus::InvalidArgument, "inputs and outputs must be positive");
        }
        let act = match activation {
            OmpacActivation::Sil => Activation::Sil,
            OmpacActivation::Dsil => Activation::Dsil,
        };
        let mut rng = stream(seed, StreamTag::Network, 0, 0);
        let net = Network::random(inputs, hidden, outputs, act, &mut rng);
        *out = Box::into_raw(Box::new(OmpacNetwork(net)));
        OmpacStatus::Ok
    })
}

/// Number of parameters in `net`.
///
/// # Safety
/// `net` must be null or a live handle from [`ompac_network_new`].
#[no_mangle]
pub unsafe extern "C" fn ompac_network_param_count(net: *const OmpacNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.len())
}

/// Copies the parameter vector into `buf` (length `len`).
///
/// # Safety
/// `net` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ompac_network_get_params(
    net: *const OmpacNetwork,
    buf: *mut f64,
    len: usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(net, buf);
        let params = (*net).0.params();
        if len < params.len() {
            return fail(OmpacStatus::BufferTooSmall, format!("need {} doubles", params.len()));
        }
        std::slice::from_raw_parts_mut(buf, params.len()).copy_from_slice(params);
        OmpacStatus::Ok
    })
}

/// Overwrites the parameter vector from `buf` (exactly `len` doubles).
///
/// # Safety
/// `net` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ompac_network_set_params(
    net: *mut OmpacNetwork,
    buf: *const f64,
    len: usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(net, buf);
        let params = (*net).0.params_mut();
        if len != params.len() {
            return fail(
                OmpacStatus::InvalidArgument,
                format!("expected {} parameters, got {len}", params.len()),
            );
        }
        params.copy_from_slice(std::slice::from_raw_parts(buf, len));
        OmpacStatus::Ok
    })
}

/// Evaluates the network on `input` (length `input_len`) and writes all
/// outputs into `output` (length `output_len`).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ompac_network_forward(
    net: *const OmpacNetwork,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(net, input, output);
        let net = &(*net).0;
        if input_len != net.input_dim() {
            return fail(
                OmpacStatus::InvalidArgument,
                format!("expected {} inputs, got {input_len}", net.input_dim()),
            );
        }
        if output_len < net.output_dim() {
            return fail(OmpacStatus::BufferTooSmall, format!("need {} outputs", net.output_dim()));
        }
        let fwd = net.forward(std::slice::from_raw_parts(input, input_len));
        std::slice::from_raw_parts_mut(output, fwd.outputs.len()).copy_from_slice(&fwd.outputs);
        OmpacStatus::Ok
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ompac_network_free(net: *mut OmpacNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Creates an empty board.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_new(width: usize, height: usize, out: *mut *mut OmpacBoard) -> OmpacStatus {
    guard(|| {
        non_null!(out);
        match Board::new(width, height) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(OmpacBoard(b)));
                OmpacStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Number of placements available for `piece` (0..7 in the order
/// S, Z, O, I, J, L, T).
///
/// # Safety
/// `board` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_action_count(board: *const OmpacBoard, piece: u32) -> usize {
    match (board.as_ref(), Piece::ALL.get(piece as usize)) {
        (Some(b), Some(&p)) => b.0.enumerate_actions(p).len(),
        _ => 0,
    }
}

/// Drops `piece` in `rotation` with its leftmost cell in `column`. On a
/// non-terminal drop the board is updated in place and completed rows are
/// cleared; on a terminal drop the board is unchanged.
///
/// # Safety
/// `board` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_drop(
    board: *mut OmpacBoard,
    piece: u32,
    rotation: u32,
    column: u32,
    cleared: *mut u32,
    terminal: *mut bool,
) -> OmpacStatus {
    guard(|| {
        non_null!(board);
        let Some(&piece) = Piece::ALL.get(piece as usize) else {
            return fail(OmpacStatus::InvalidArgument, "piece index out of range");
        };
        let placement = Placement {
            piece,
            rotation: rotation as usize,
            column: column as usize,
        };
        let b = &mut (*board).0;
        if !b.is_legal(&placement) {
            return fail(OmpacStatus::InvalidArgument, format!("illegal placement {placement:?}"));
        }
        let d = b.drop_piece(&placement);
        *b = d.board;
        if !cleared.is_null() {
            *cleared = d.cleared;
        }
        if !terminal.is_null() {
            *terminal = d.terminal;
        }
        OmpacStatus::Ok
    })
}

/// Number of holes (empty cells below a column's top filled cell).
///
/// # Safety
/// `board` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_holes(board: *const OmpacBoard) -> u32 {
    board.as_ref().map_or(0, |b| b.0.holes())
}

/// Height of column `x`, or 0 for an invalid column.
///
/// # Safety
/// `board` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_column_height(board: *const OmpacBoard, x: usize) -> usize {
    match board.as_ref() {
        Some(b) if x < b.0.width() => b.0.column_height(x),
        _ => 0,
    }
}

/// Length of the binary feature vector for the given layout.
#[no_mangle]
pub extern "C" fn ompac_encoding_len(width: usize, max_height: usize, max_diff: usize, max_holes: usize) -> usize {
    if width == 0 {
        return 0;
    }
    FeatureEncoding {
        width,
        max_height,
        max_diff,
        max_holes,
    }
    .len()
}

/// Writes the binary features of `board` into `out`.
///
/// # Safety
/// `board` must be a live handle and `out` valid for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_encode(
    board: *const OmpacBoard,
    max_height: usize,
    max_diff: usize,
    max_holes: usize,
    out: *mut f64,
    out_len: usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(board, out);
        let b = &(*board).0;
        let enc = FeatureEncoding {
            width: b.width(),
            max_height,
            max_diff,
            max_holes,
        };
        if b.height() > max_height {
            return fail(OmpacStatus::InvalidArgument, "board taller than max_height");
        }
        if out_len != enc.len() {
            return fail(OmpacStatus::BufferTooSmall, format!("need exactly {} doubles", enc.len()));
        }
        enc.encode_into(b, std::slice::from_raw_parts_mut(out, out_len));
        OmpacStatus::Ok
    })
}

/// # Safety
/// `board` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ompac_board_free(board: *mut OmpacBoard) {
    if !board.is_null() {
        drop(Box::from_raw(board));
    }
}

/// Stochastic universal sampling: draws `slots` indices into `fitness`
/// (length `n`) with probability proportional to fitness.
///
/// # Safety
/// `fitness` must hold `n` doubles and `out` `slots` indices.
#[no_mangle]
pub unsafe extern "C" fn ompac_sus_select(
    fitness: *const f64,
    n: usize,
    slots: usize,
    seed: u64,
    out: *mut usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(fitness, out);
        let f = std::slice::from_raw_parts(fitness, n);
        if n == 0 || f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return fail(OmpacStatus::InvalidArgument, "fitness must be non-empty, finite and non-negative");
        }
        if f.iter().all(|&v| v == 0.0) {
            return fail(OmpacStatus::InvalidArgument, "fitness is all zero");
        }
        let mut rng = stream(seed, StreamTag::Selection, 0, 0);
        let picks = sus_select(f, slots, &mut rng);
        std::slice::from_raw_parts_mut(out, slots).copy_from_slice(&picks);
        OmpacStatus::Ok
    })
}

/// Runs one experiment described by a JSON run configuration. The artifact
/// directory path is written, NUL-terminated, into `dir_buf` when it fits.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `dir_buf` may be null or
/// valid for `dir_buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ompac_run_experiment(
    config_json: *const c_char,
    dir_buf: *mut c_char,
    dir_buf_len: usize,
) -> OmpacStatus {
    guard(|| {
        non_null!(config_json);
        let Ok(text) = CStr::from_ptr(config_json).to_str() else {
            return fail(OmpacStatus::InvalidArgument, "config is not valid UTF-8");
        };
        let cfg = match RunConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return from_core(e),
        };
        let dir = match harness::run_experiment(&cfg) {
            Ok(d) => d,
            Err(e) => return from_core(e),
        };
        if !dir_buf.is_null() {
            let s = dir.to_string_lossy();
            let bytes = s.as_bytes();
            if bytes.len() + 1 > dir_buf_len {
                return fail(OmpacStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1));
            }
            let dst = std::slice::from_raw_parts_mut(dir_buf.cast::<u8>(), bytes.len() + 1);
            dst[..bytes.len()].copy_from_slice(bytes);
            dst[bytes.len()] = 0;
        }
        OmpacStatus::Ok
    })
}
