//! Large, randomly indexed tables.

/// `len` copies of `fill`.
///
/// On Linux the buffer is marked for transparent huge pages before it is
/// first touched. Peeling reads and writes these tables at random, and with
/// 4 KiB pages the TLB misses make the per-access cost grow with the table.
pub(crate) fn table<T: Copy>(fill: T, len: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(len);
    advise_huge(&mut v);
    v.resize(len, fill);
    v
}

#[cfg(target_os = "linux")]
fn advise_huge<T>(v: &mut Vec<T>) {
    const HUGE: usize = 2 << 20;
    let start = v.as_mut_ptr() as usize;
    let end = start + v.capacity() * size_of::<T>();
    let (lo, hi) = (start.next_multiple_of(HUGE), end & !(HUGE - 1));
    if hi > lo {
        // SAFETY: [lo, hi) lies inside the vector's allocation and the advice
        // only changes how the kernel backs it; contents are unaffected.
        unsafe {
            libc::madvise(lo as *mut libc::c_void, hi - lo, libc::MADV_HUGEPAGE);
        }
    }
}

#[cfg(not(target_os = "linux"))]
fn advise_huge<T>(_: &mut Vec<T>) {}
