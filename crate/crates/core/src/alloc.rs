//! Heap accounting for memory measurements.
//!
//! Install [`CountingAllocator`] as the `#[global_allocator]` of a binary or
//! test target, then pass it to code that accepts an [`AllocProbe`].

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

pub trait AllocProbe: Sync {
    /// Bytes currently allocated.
    fn current(&self) -> usize;
    /// High-water mark since the last [`AllocProbe::reset_peak`].
    fn peak(&self) -> usize;
    /// Sets the high-water mark to the current level.
    fn reset_peak(&self);
}

/// Runs `f` and returns its result with the peak heap growth above the level
/// at entry. Counts every thread, so concurrent unrelated work inflates it.
pub fn measure_peak<R>(probe: &dyn AllocProbe, f: impl FnOnce() -> R) -> (R, usize) {
    probe.reset_peak();
    let base = probe.current();
    let out = f();
    (out, probe.peak().saturating_sub(base))
}

/// Forwards to [`System`] while tracking live and peak bytes.
pub struct CountingAllocator {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl CountingAllocator {
    pub const fn new() -> Self {
        Self {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }

    fn grow(&self, bytes: usize) {
        let now = self.current.fetch_add(bytes, Ordering::Relaxed) + bytes;
        self.peak.fetch_max(now, Ordering::Relaxed);
    }

    fn shrink(&self, bytes: usize) {
        self.current.fetch_sub(bytes, Ordering::Relaxed);
    }
}

impl Default for CountingAllocator {
    fn default() -> Self {
        Self::new()
    }
}

impl AllocProbe for CountingAllocator {
    fn current(&self) -> usize {
        self.current.load(Ordering::Relaxed)
    }

    fn peak(&self) -> usize {
        self.peak.load(Ordering::Relaxed)
    }

    fn reset_peak(&self) {
        self.peak.store(self.current(), Ordering::Relaxed);
    }
}

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            self.grow(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc_zeroed(layout) };
        if !p.is_null() {
            self.grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        self.shrink(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                self.grow(new_size - layout.size());
            } else {
                self.shrink(layout.size() - new_size);
            }
        }
        p
    }
}
