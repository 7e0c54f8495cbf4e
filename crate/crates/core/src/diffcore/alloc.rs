use std::sync::Once;

static TUNED: Once = Once::new();

/// Keeps freed tensor buffers inside the process heap.
///
/// Tapes allocate and drop many buffers of a few hundred kilobytes. With
/// glibc defaults those go through `mmap` or get trimmed back to the kernel,
/// so every new tensor pays for fresh page faults. Raising the mmap and trim
/// thresholds once per process removes most of that cost. No-op elsewhere.
pub fn tune_allocator() {
    TUNED.call_once(|| {
        #[cfg(all(target_os = "linux", target_env = "gnu"))]
        // SAFETY: mallopt only adjusts allocator parameters.
        unsafe {
            libc::mallopt(libc::M_MMAP_THRESHOLD, 256 << 20);
            libc::mallopt(libc::M_TRIM_THRESHOLD, 512 << 20);
            libc::mallopt(libc::M_TOP_PAD, 64 << 20);
        }
    });
}
