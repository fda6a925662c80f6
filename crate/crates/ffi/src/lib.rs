//! C ABI over the `hhsketch` heavy-hitter sketches.
//!
//! Sketches live behind an opaque `HhSketch` handle created by
//! [`hh_sketch_new`] and released with [`hh_sketch_free`]. Every fallible
//! call returns an [`HhStatus`]; results come back through out-pointers.
//! Panics never cross the boundary and are reported as `HH_STATUS_PANIC`.
//!
//! Flow key 0 is reserved and is folded onto `0xFFFFFFFF`, the same mapping
//! applied when traces are loaded from disk.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use hhsketch::bench::AnySketch;
use hhsketch::{
    CmHeap, CountHeap, ElasticHh, ElasticStd, Error, FlowKey, HeavyHitterSketch, HeavyLightRatio,
    Lambda, SketchHeapConfig, SpaceSaving,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MemoryTooSmall = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Sketch kind selected at construction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhAlgorithm {
    ElasticHh = 0,
    Elastic = 1,
    SpaceSaving = 2,
    CmHeap = 3,
    CountHeap = 4,
}

/// Opaque sketch handle.
pub struct HhSketch {
    inner: AnySketch,
}

impl From<&Error> for HhStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::MemoryTooSmall { .. } => HhStatus::MemoryTooSmall,
            _ => HhStatus::InvalidArgument,
        }
    }
}

fn guard(f: impl FnOnce() -> HhStatus) -> HhStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(HhStatus::Panic)
}

fn build(
    algo: HhAlgorithm,
    memory_bytes: usize,
    lambda: Option<Lambda>,
    seed: u64,
) -> hhsketch::Result<AnySketch> {
    const CELLS: usize = hhsketch::elastic_hh::DEFAULT_CELLS_PER_BUCKET;
    Ok(match algo {
        HhAlgorithm::ElasticHh => AnySketch::ElasticHh(ElasticHh::new(
            memory_bytes,
            lambda.unwrap_or(Lambda::ONE),
            CELLS,
            seed,
        )?),
        HhAlgorithm::Elastic => AnySketch::Elastic(ElasticStd::new(
            memory_bytes,
            lambda.unwrap_or(Lambda::EIGHT),
            CELLS,
            HeavyLightRatio::default(),
            seed,
        )?),
        HhAlgorithm::SpaceSaving => AnySketch::SpaceSaving(SpaceSaving::with_memory(memory_bytes)?),
        HhAlgorithm::CmHeap => AnySketch::CmHeap(CmHeap::with_memory(
            memory_bytes,
            SketchHeapConfig::default(),
            seed,
        )?),
        HhAlgorithm::CountHeap => AnySketch::CountHeap(CountHeap::with_memory(
            memory_bytes,
            SketchHeapConfig::default(),
            seed,
        )?),
    })
}

/// Creates a sketch using `memory_bytes` of accounted memory.
///
/// `lambda_num / lambda_den` sets the eviction ratio of the two Elastic
/// variants; pass `0 / 0` for the algorithm default. The other algorithms
/// require `0 / 0`. On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `out` must be null or valid for a pointer-sized write.
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_new(
    algo: HhAlgorithm,
    memory_bytes: usize,
    lambda_num: u32,
    lambda_den: u32,
    seed: u64,
    out: *mut *mut HhSketch,
) -> HhStatus {
    guard(|| {
        if out.is_null() {
            return HhStatus::NullPointer;
        }
        let lambda = match (lambda_num, lambda_den) {
            (0, 0) => None,
            (n, d) => match Lambda::new(n, d) {
                Ok(l) if matches!(algo, HhAlgorithm::ElasticHh | HhAlgorithm::Elastic) => Some(l),
                _ => return HhStatus::InvalidArgument,
            },
        };
        match build(algo, memory_bytes, lambda, seed) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HhSketch { inner }));
                HhStatus::Ok
            }
            Err(e) => HhStatus::from(&e),
        }
    })
}

/// Releases a sketch. Null is ignored.
///
/// # Safety
/// `sketch` must be null or a handle from [`hh_sketch_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_free(sketch: *mut HhSketch) {
    if !sketch.is_null() {
        drop(Box::from_raw(sketch));
    }
}

/// Feeds one packet of flow `key`.
///
/// # Safety
/// `sketch` must be null or a live handle with no concurrent use.
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_insert(sketch: *mut HhSketch, key: u32) -> HhStatus {
    guard(|| match sketch.as_mut() {
        Some(s) => {
            s.inner.insert(FlowKey::from_raw_remapped(key));
            HhStatus::Ok
        }
        None => HhStatus::NullPointer,
    })
}

/// Feeds `len` packets in order.
///
/// # Safety
/// `sketch` must be null or a live handle with no concurrent use, and `keys`
/// must be valid for `len` reads (it may be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_insert_batch(
    sketch: *mut HhSketch,
    keys: *const u32,
    len: usize,
) -> HhStatus {
    guard(|| {
        let Some(s) = sketch.as_mut() else {
            return HhStatus::NullPointer;
        };
        if len == 0 {
            return HhStatus::Ok;
        }
        if keys.is_null() {
            return HhStatus::NullPointer;
        }
        for &k in std::slice::from_raw_parts(keys, len) {
            s.inner.insert(FlowKey::from_raw_remapped(k));
        }
        HhStatus::Ok
    })
}

/// Writes the estimated size of flow `key` to `*out`.
///
/// # Safety
/// `sketch` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_query(
    sketch: *const HhSketch,
    key: u32,
    out: *mut u64,
) -> HhStatus {
    guard(|| match (sketch.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = s.inner.query(FlowKey::from_raw_remapped(key));
            HhStatus::Ok
        }
        _ => HhStatus::NullPointer,
    })
}

/// Reports every flow whose estimate reaches `threshold`.
///
/// `*out_len` always receives the number of reported flows. When that
/// exceeds `capacity` nothing is copied and `HH_STATUS_BUFFER_TOO_SMALL` is
/// returned, so a call with `capacity = 0` sizes the buffers. Flows come
/// out in the sketch's report order.
///
/// # Safety
/// `sketch` must be null or a live handle; `out_len` must be writable;
/// `keys` and `estimates` must each be valid for `capacity` writes (they may
/// be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn hh_sketch_report(
    sketch: *const HhSketch,
    threshold: u64,
    keys: *mut u32,
    estimates: *mut u64,
    capacity: usize,
    out_len: *mut usize,
) -> HhStatus {
    guard(|| {
        let Some(s) = sketch.as_ref() else {
            return HhStatus::NullPointer;
        };
        if out_len.is_null() {
            return HhStatus::NullPointer;
        }
        let report = s.inner.report(threshold);
        *out_len = report.len();
        if report.len() > capacity {
            return HhStatus::BufferTooSmall;
        }
        if report.is_empty() {
            return HhStatus::Ok;
        }
        if keys.is_null() || estimates.is_null() {
            return HhStatus::NullPointer;
        }
        let keys = std::slice::from_raw_parts_mut(keys, report.len());
        let estimates = std::slice::from_raw_parts_mut(estimates, report.len());
        for ((entry, k), e) in report.iter().zip(keys).zip(estimates) {
            *k = entry.key.get();
            *e = entry.estimate;
        }
        HhStatus::Ok
    })
}

/// Static, NUL-terminated description of `status`.
#[no_mangle]
pub extern "C" fn hh_status_message(status: HhStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        HhStatus::Ok => b"ok\0",
        HhStatus::NullPointer => b"null pointer argument\0",
        HhStatus::InvalidArgument => b"invalid argument\0",
        HhStatus::MemoryTooSmall => b"memory budget too small for the sketch\0",
        HhStatus::BufferTooSmall => b"output buffer too small\0",
        HhStatus::Panic => b"internal panic\0",
    };
    msg.as_ptr().cast()
}
