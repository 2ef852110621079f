//! Up-correction groups and the I(f)-tree.
//!
//! Everything here works on *logical* ids, where the root of the operation
//! is process 0. [`Renumbering`] maps between logical and physical ranks.
//!
//! Non-root process `p` belongs to group `(p - 1) / (f + 1)` and to subtree
//! `((p - 1) mod (f + 1)) + 1`. Members of one group therefore sit in
//! pairwise distinct subtrees. The root joins the last group when that group
//! has fewer than `f + 1` members.

use crate::error::{Error, Result};
use crate::types::ProcessId;

/// Processes exchanging inputs during up-correction. `members` is sorted
/// ascending and contains 0 when the root joined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionGroup {
    pub index: usize,
    pub members: Vec<ProcessId>,
}

impl CorrectionGroup {
    pub fn contains(&self, p: ProcessId) -> bool {
        self.members.binary_search(&p).is_ok()
    }

    pub fn contains_root(&self) -> bool {
        self.members.first() == Some(&0)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members other than `p`, ascending.
    pub fn peers(&self, p: ProcessId) -> impl Iterator<Item = ProcessId> + '_ {
        self.members.iter().copied().filter(move |&m| m != p)
    }
}

/// True when the last group is partial and the root therefore joins it.
pub fn root_is_grouped(n: usize, f: usize) -> bool {
    n >= 2 && (n - 1) % (f + 1) != 0
}

/// Group number of a non-root process.
pub fn group_index(p: ProcessId, f: usize) -> usize {
    debug_assert!(p >= 1);
    (p - 1) / (f + 1)
}

fn group_by_index(index: usize, n: usize, f: usize) -> CorrectionGroup {
    let first = index * (f + 1) + 1;
    let last = ((index + 1) * (f + 1)).min(n - 1);
    let mut members: Vec<ProcessId> = (first..=last).collect();
    if members.len() < f + 1 {
        members.insert(0, 0);
    }
    CorrectionGroup { index, members }
}

/// The group containing `p`, or `None` when `p` is the root and the root
/// is not grouped. With `f = 0` every non-root process is a singleton.
pub fn correction_group(p: ProcessId, n: usize, f: usize) -> Result<Option<CorrectionGroup>> {
    if p >= n {
        return Err(Error::invalid(format!("process {p} out of range for n = {n}")));
    }
    if p == 0 {
        if !root_is_grouped(n, f) {
            return Ok(None);
        }
        return Ok(Some(group_by_index((n - 2) / (f + 1), n, f)));
    }
    Ok(Some(group_by_index(group_index(p, f), n, f)))
}

/// Whether `p` shares a correction group with the root.
pub fn grouped_with_root(p: ProcessId, n: usize, f: usize) -> bool {
    p == 0 || (root_is_grouped(n, f) && group_index(p, f) == (n - 2) / (f + 1))
}

/// Subtree number `k` (1-based) of a non-root process.
pub fn subtree_index(p: ProcessId, f: usize) -> Result<usize> {
    if p == 0 {
        return Err(Error::invalid("the root lies in no subtree"));
    }
    Ok((p - 1) % (f + 1) + 1)
}

/// The member of `l`'s group that lives in subtree `k`. May be `l` itself.
pub fn group_partner_in_subtree(l: ProcessId, k: usize, n: usize, f: usize) -> Result<ProcessId> {
    if l == 0 || l >= n {
        return Err(Error::invalid(format!("process {l} has no partner set")));
    }
    if grouped_with_root(l, n, f) {
        return Err(Error::invalid(format!("process {l} is grouped with the root")));
    }
    if k == 0 || k > f + 1 {
        return Err(Error::invalid(format!("subtree {k} out of range for f = {f}")));
    }
    Ok(group_index(l, f) * (f + 1) + k)
}

/// The I(f)-tree over logical ids `0..n`.
///
/// Root children are `1..=min(f+1, n-1)`. Subtree `k` holds every `p` with
/// `(p - 1) mod (f + 1) = k - 1`; inside a subtree, members sorted
/// ascending are linked as a binomial tree over their rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfTree {
    n: usize,
    f: usize,
    parent: Vec<Option<ProcessId>>,
    children: Vec<Vec<ProcessId>>,
}

pub fn build_if_tree(n: usize, f: usize) -> IfTree {
    assert!(n >= 1, "a tree needs at least the root");
    let stride = f + 1;
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];

    for p in 1..n {
        let k = (p - 1) % stride + 1;
        let rank = (p - k) / stride;
        let up = if rank == 0 {
            0
        } else {
            let high = 1usize << (usize::BITS - 1 - rank.leading_zeros());
            k + (rank - high) * stride
        };
        parent[p] = Some(up);
        children[up].push(p);
    }
    // Ascending ids per parent follows from the loop order.
    IfTree { n, f, parent, children }
}

impl IfTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn parent_of(&self, p: ProcessId) -> Option<ProcessId> {
        self.parent[p]
    }

    pub fn children_of(&self, p: ProcessId) -> &[ProcessId] {
        &self.children[p]
    }

    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.children[0].len()];
        for p in 1..self.n {
            sizes[(p - 1) % (self.f + 1)] += 1;
        }
        sizes
    }

    /// Nodes of the subtree rooted at `p`, found by walking `children_of`.
    pub fn descendants(&self, p: ProcessId) -> Vec<ProcessId> {
        let mut out = vec![p];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }
}

/// Swaps the operation's root with process 0 so the topology can assume a
/// root of 0. The mapping is its own inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Renumbering {
    root: ProcessId,
}

impl Renumbering {
    pub fn new(root: ProcessId) -> Self {
        Renumbering { root }
    }

    pub fn root(&self) -> ProcessId {
        self.root
    }

    pub fn to_logical(&self, physical: ProcessId) -> ProcessId {
        self.swap(physical)
    }

    pub fn to_physical(&self, logical: ProcessId) -> ProcessId {
        self.swap(logical)
    }

    fn swap(&self, p: ProcessId) -> ProcessId {
        if p == self.root {
            0
        } else if p == 0 {
            self.root
        } else {
            p
        }
    }
}
