//! Multiplication-op instrumentation.
//!
//! Kernels that multiply call [`record_mults`] with the number of
//! floating-point multiplications they execute. Outside a [`count_mult_ops`]
//! region the call is a no-op. Counting is per thread.

use std::cell::Cell;

thread_local! {
    static MULTS: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Adds `n` to the active trace of the current thread, if any.
#[inline]
pub fn record_mults(n: u64) {
    MULTS.with(|m| {
        if let Some(c) = m.get() {
            m.set(Some(c + n));
        }
    });
}

/// Runs `f` and returns its result with the number of multiplications it
/// executed. Nested regions also contribute to the enclosing one.
pub fn count_mult_ops<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let outer = MULTS.with(|m| m.replace(Some(0)));
    let out = f();
    let inner = MULTS.with(|m| m.replace(outer)).unwrap_or(0);
    if outer.is_some() {
        record_mults(inner);
    }
    (out, inner)
}
