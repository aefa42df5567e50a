//! Memory instrumentation for the scalability benchmark.
//!
//! Two independent probes, matching the two columns of the scalability
//! report:
//!
//! * [`TrackingAllocator`] wraps the system allocator and keeps global
//!   current/peak byte counters. It only reports when a binary installs it
//!   with `#[global_allocator]`; otherwise the counters stay at zero and the
//!   column reads 0.
//! * [`RssWatcher`] samples `/proc/self/status` VmRSS on a background thread
//!   and reports the peak resident-set delta observed around a call.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

static ALLOC_CURRENT: AtomicUsize = AtomicUsize::new(0);
static ALLOC_PEAK: AtomicUsize = AtomicUsize::new(0);
static ALLOC_INSTALLED: AtomicBool = AtomicBool::new(false);

/// Byte-counting wrapper over the system allocator.
pub struct TrackingAllocator;

impl TrackingAllocator {
    fn record_alloc(size: usize) {
        ALLOC_INSTALLED.store(true, Ordering::Relaxed);
        let current = ALLOC_CURRENT.fetch_add(size, Ordering::Relaxed) + size;
        ALLOC_PEAK.fetch_max(current, Ordering::Relaxed);
    }

    fn record_dealloc(size: usize) {
        ALLOC_CURRENT.fetch_sub(size, Ordering::Relaxed);
    }
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = unsafe { System.alloc(layout) };
        if !ptr.is_null() {
            Self::record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        Self::record_dealloc(layout.size());
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let ptr = unsafe { System.alloc_zeroed(layout) };
        if !ptr.is_null() {
            Self::record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let new_ptr = unsafe { System.realloc(ptr, layout, new_size) };
        if !new_ptr.is_null() {
            if new_size >= layout.size() {
                Self::record_alloc(new_size - layout.size());
            } else {
                Self::record_dealloc(layout.size() - new_size);
            }
        }
        new_ptr
    }
}

/// True when a `TrackingAllocator` is serving allocations in this process.
pub fn allocator_installed() -> bool {
    ALLOC_INSTALLED.load(Ordering::Relaxed)
}

/// Snapshot of the allocator counters at one point in time; used to measure
/// the peak allocation delta across a call.
#[derive(Debug, Clone, Copy)]
pub struct AllocMarker {
    current_at_mark: usize,
}

impl AllocMarker {
    /// Place a marker and reset the peak to the current level.
    pub fn set() -> Self {
        let current = ALLOC_CURRENT.load(Ordering::Relaxed);
        ALLOC_PEAK.store(current, Ordering::Relaxed);
        Self {
            current_at_mark: current,
        }
    }

    /// Peak bytes allocated above the level at the marker. Zero when the
    /// tracking allocator is not installed.
    pub fn peak_delta(&self) -> u64 {
        if !allocator_installed() {
            return 0;
        }
        ALLOC_PEAK
            .load(Ordering::Relaxed)
            .saturating_sub(self.current_at_mark) as u64
    }
}

/// Current resident set size in bytes, from `/proc/self/status`.
/// `None` when the file or the VmRSS field is unavailable.
pub fn rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

/// Background sampler of the resident set size.
pub struct RssWatcher {
    stop: Arc<AtomicBool>,
    peak: Arc<AtomicU64>,
    baseline: u64,
    handle: JoinHandle<()>,
}

impl RssWatcher {
    /// Record the current RSS as the baseline and start sampling.
    pub fn start(interval: Duration) -> Self {
        let baseline = rss_bytes().unwrap_or(0);
        let stop = Arc::new(AtomicBool::new(false));
        let peak = Arc::new(AtomicU64::new(baseline));
        let stop_t = Arc::clone(&stop);
        let peak_t = Arc::clone(&peak);
        let handle = std::thread::spawn(move || {
            while !stop_t.load(Ordering::Relaxed) {
                if let Some(rss) = rss_bytes() {
                    peak_t.fetch_max(rss, Ordering::Relaxed);
                }
                std::thread::sleep(interval);
            }
        });
        Self {
            stop,
            peak,
            baseline,
            handle,
        }
    }

    /// Stop sampling and return the peak RSS delta over the baseline, after
    /// one final synchronous sample.
    pub fn stop(self) -> u64 {
        if let Some(rss) = rss_bytes() {
            self.peak.fetch_max(rss, Ordering::Relaxed);
        }
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.handle.join();
        self.peak
            .load(Ordering::Relaxed)
            .saturating_sub(self.baseline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rss_is_readable_on_linux() {
        if cfg!(target_os = "linux") {
            let rss = rss_bytes().expect("VmRSS should parse");
            assert!(rss > 0);
        }
    }

    #[test]
    fn watcher_reports_growth() {
        let watcher = RssWatcher::start(Duration::from_micros(200));
        // touch enough pages to move RSS
        let block: Vec<u8> = (0..16 * 1024 * 1024).map(|i| (i % 251) as u8).collect();
        std::hint::black_box(&block);
        std::thread::sleep(Duration::from_millis(5));
        let peak = watcher.stop();
        drop(block);
        if cfg!(target_os = "linux") {
            assert!(peak > 4 * 1024 * 1024, "peak delta {peak}");
        }
    }

    // The unit-test binary does not install the tracking allocator, so the
    // marker must degrade to zero rather than report garbage.
    #[test]
    fn marker_without_allocator_reads_zero() {
        let marker = AllocMarker::set();
        let v: Vec<u8> = vec![0; 1 << 20];
        std::hint::black_box(&v);
        if !allocator_installed() {
            assert_eq!(marker.peak_delta(), 0);
        }
    }
}
