//! Layered blocker-tree local search that inserts one huge job into a valid
//! partial schedule.

mod audit;
mod rules;
mod run;
mod signature;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{JobId, MachineId};

pub use audit::{check_invariants, Violation};
pub use rules::{
    active_jobs, blocked_small_jobs, classify_potential_move, find_valid_move, head_layer,
    select_addition, undesirable_on, Selection, TreeView,
};
pub use run::{
    insert_huge_job, layer_bound, EngineConfig, EngineEvent, EventKind, InsertError, Inserted,
    RunStats, StuckReason, StuckState,
};
pub use signature::{signature_vector, MonitorReport, SignatureMonitor, SignatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockerKind {
    BB,
    BS,
    MS,
    S,
    M,
    MM,
}

impl BlockerKind {
    pub const ALL: [BlockerKind; 6] = [
        BlockerKind::BB,
        BlockerKind::BS,
        BlockerKind::MS,
        BlockerKind::S,
        BlockerKind::M,
        BlockerKind::MM,
    ];

    /// Position within a layer, 1 to 5.
    pub fn sublayer(self) -> usize {
        match self {
            BlockerKind::BB => 1,
            BlockerKind::BS | BlockerKind::MS => 2,
            BlockerKind::S => 3,
            BlockerKind::M => 4,
            BlockerKind::MM => 5,
        }
    }

    /// Higher wins when choosing a potential move.
    pub fn priority(self) -> u8 {
        match self {
            BlockerKind::BB => 5,
            BlockerKind::S => 4,
            BlockerKind::MS | BlockerKind::BS => 3,
            BlockerKind::M => 2,
            BlockerKind::MM => 1,
        }
    }

    /// S, MS and BS blockers make every job undesirable on their machine.
    pub fn blocks_all(self) -> bool {
        matches!(self, BlockerKind::S | BlockerKind::MS | BlockerKind::BS)
    }
}

impl fmt::Display for BlockerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parent {
    Root,
    /// Insertion stamp of the activating blocker.
    Blocker(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocker {
    pub job: JobId,
    pub machine: MachineId,
    pub kind: BlockerKind,
    pub layer: usize,
    pub stamp: u64,
    pub parent: Parent,
}

impl Blocker {
    /// `(layer, sublayer)`, the order in which sublayers are "before" or
    /// "after" each other.
    pub fn position(&self) -> (usize, usize) {
        (self.layer, self.kind.sublayer())
    }
}

impl fmt::Display for Blocker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}) @{}.{} #{}",
            self.job,
            self.machine,
            self.kind,
            self.layer,
            self.kind.sublayer(),
            self.stamp
        )
    }
}

/// Live blockers of one insertion run.
///
/// Adding a blocker first drops every later sublayer, so appending keeps the
/// list sorted by position and by stamp at the same time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockerTree {
    j_new: JobId,
    blockers: Vec<Blocker>,
    next_stamp: u64,
}

impl BlockerTree {
    pub fn new(j_new: JobId) -> Self {
        BlockerTree {
            j_new,
            blockers: Vec::new(),
            next_stamp: 0,
        }
    }

    pub fn j_new(&self) -> JobId {
        self.j_new
    }

    pub fn blockers(&self) -> &[Blocker] {
        &self.blockers
    }

    pub fn is_empty(&self) -> bool {
        self.blockers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blockers.len()
    }

    pub fn get(&self, stamp: u64) -> Option<&Blocker> {
        self.blockers
            .binary_search_by_key(&stamp, |b| b.stamp)
            .ok()
            .map(|k| &self.blockers[k])
    }

    pub fn contains_move(&self, j: JobId, i: MachineId) -> bool {
        self.blockers.iter().any(|b| b.job == j && b.machine == i)
    }

    /// Highest layer holding a blocker, 0 for an empty tree.
    pub fn last_layer(&self) -> usize {
        self.blockers.last().map_or(0, |b| b.layer)
    }

    pub fn in_layer(&self, k: usize) -> impl Iterator<Item = &Blocker> + '_ {
        self.blockers.iter().filter(move |b| b.layer == k)
    }

    /// Blockers in layers `<= k`, or all of them for `None`.
    pub fn prefix(&self, k: Option<usize>) -> impl Iterator<Item = &Blocker> + '_ {
        self.blockers
            .iter()
            .filter(move |b| k.map_or(true, |k| b.layer <= k))
    }

    /// `M(T)` for the given kinds within a layer prefix.
    pub fn machines(&self, kinds: &[BlockerKind], k: Option<usize>) -> BTreeSet<MachineId> {
        self.prefix(k)
            .filter(|b| kinds.contains(&b.kind))
            .map(|b| b.machine)
            .collect()
    }

    /// Machines of S, MS and BS blockers within a prefix.
    pub fn blocking_machines(&self, k: Option<usize>) -> BTreeSet<MachineId> {
        self.prefix(k)
            .filter(|b| b.kind.blocks_all())
            .map(|b| b.machine)
            .collect()
    }

    /// Machines of the given kinds placed exactly in layer `k`.
    pub fn machines_in_layer(&self, kind: BlockerKind, k: usize) -> BTreeSet<MachineId> {
        self.in_layer(k)
            .filter(|b| b.kind == kind)
            .map(|b| b.machine)
            .collect()
    }

    /// Appends a blocker with a fresh stamp. The caller deletes later
    /// sublayers first.
    pub(crate) fn push(
        &mut self,
        job: JobId,
        machine: MachineId,
        kind: BlockerKind,
        layer: usize,
        parent: Parent,
    ) -> u64 {
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        let b = Blocker {
            job,
            machine,
            kind,
            layer,
            stamp,
            parent,
        };
        debug_assert!(self
            .blockers
            .last()
            .map_or(true, |last| last.position() <= b.position()));
        self.blockers.push(b);
        stamp
    }

    /// Drops every blocker strictly after `pos`.
    pub(crate) fn remove_after(&mut self, pos: (usize, usize)) -> Vec<Blocker> {
        let cut = self.blockers.partition_point(|b| b.position() <= pos);
        self.blockers.split_off(cut)
    }

    /// Drops every blocker at or after `pos`.
    pub(crate) fn remove_from(&mut self, pos: (usize, usize)) -> Vec<Blocker> {
        let cut = self.blockers.partition_point(|b| b.position() < pos);
        self.blockers.split_off(cut)
    }

    pub(crate) fn remove_where(&mut self, mut pred: impl FnMut(&Blocker) -> bool) -> Vec<Blocker> {
        let mut removed = Vec::new();
        self.blockers.retain(|b| {
            if pred(b) {
                removed.push(b.clone());
                false
            } else {
                true
            }
        });
        removed
    }

    /// Test hook for building trees by hand.
    #[doc(hidden)]
    pub fn push_unchecked(
        &mut self,
        job: JobId,
        machine: MachineId,
        kind: BlockerKind,
        layer: usize,
        parent: Parent,
    ) -> u64 {
        self.push(job, machine, kind, layer, parent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_constants() {
        use BlockerKind::*;
        let sub: Vec<_> = BlockerKind::ALL.iter().map(|k| k.sublayer()).collect();
        assert_eq!(sub, [1, 2, 2, 3, 4, 5]);
        let pri: Vec<_> = BlockerKind::ALL.iter().map(|k| k.priority()).collect();
        assert_eq!(pri, [5, 3, 3, 4, 2, 1]);
        assert!(S.blocks_all() && MS.blocks_all() && BS.blocks_all());
        assert!(!BB.blocks_all() && !M.blocks_all() && !MM.blocks_all());
    }

    #[test]
    fn removal_by_position() {
        let mut t = BlockerTree::new(JobId(9));
        let j = JobId(0);
        t.push(JobId(9), MachineId(0), BlockerKind::BB, 1, Parent::Root);
        t.push(j, MachineId(1), BlockerKind::BS, 1, Parent::Blocker(0));
        t.push(j, MachineId(2), BlockerKind::S, 1, Parent::Blocker(1));
        t.push(j, MachineId(3), BlockerKind::M, 2, Parent::Blocker(2));
        let gone = t.remove_after((1, 2));
        assert_eq!(gone.len(), 2);
        assert_eq!(t.len(), 2);
        let gone = t.remove_from((1, 2));
        assert_eq!(gone[0].stamp, 1);
        assert_eq!(t.blockers()[0].stamp, 0);
        // Stamps keep counting after deletions.
        assert_eq!(t.push(j, MachineId(1), BlockerKind::S, 1, Parent::Blocker(0)), 4);
        assert!(t.get(4).is_some() && t.get(1).is_none());
    }
}
