//! Thread-pool configuration.
//!
//! Row-parallel work is deterministic by construction (each output element
//! is reduced in a fixed per-row order), so the thread count only affects
//! speed. `NI_THREADS` caps the global rayon pool.

use std::sync::OnceLock;

static CONFIGURED: OnceLock<usize> = OnceLock::new();

/// Applies the `NI_THREADS` cap to the global rayon pool, once per process.
/// Returns the effective thread count.
pub fn configure_threads_from_env() -> usize {
    *CONFIGURED.get_or_init(|| {
        let requested = std::env::var("NI_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0);
        if let Some(n) = requested {
            // Ignore the error if a pool was already built by someone else.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        rayon::current_num_threads()
    })
}
