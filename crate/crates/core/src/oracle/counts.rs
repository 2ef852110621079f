//! Closed-form message counts for failure-free runs.

/// Up-correction messages: `f(f+1)⌊(n-1)/(f+1)⌋ + a(a-1)` with
/// `a = ((n-1) mod (f+1)) + 1`.
pub fn expected_upcorrection_messages(n: usize, f: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let full = (n - 1) / (f + 1);
    let a = (n - 1) % (f + 1) + 1;
    f * (f + 1) * full + a * (a - 1)
}

/// Tree messages: one per non-root process.
pub fn expected_tree_messages(n: usize) -> usize {
    n.saturating_sub(1)
}

/// Upper bound on broadcast messages: one tree message per non-root
/// process, plus every down-correction message that could be sent.
///
/// A member of a full group forwards to at most `f` peers. A non-root
/// member of the root's group (size `a` including the root) forwards to at
/// most `a - 2` peers, and the root sends directly to each of its group
/// members that is not one of its `f + 1` children.
pub fn max_broadcast_messages(n: usize, f: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let full = (n - 1) / (f + 1);
    let rem = (n - 1) % (f + 1);
    let mut total = (n - 1) + full * (f + 1) * f;
    if rem != 0 {
        let a = rem + 1;
        total += (a - 1) * (a - 2);
        let first = full * (f + 1) + 1;
        total += (first..n).filter(|&p| p > f + 1).count();
    }
    total
}
