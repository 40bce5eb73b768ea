use std::collections::BTreeSet;
use std::fmt;

use super::{BlockerKind, BlockerTree, Parent, TreeView};
use crate::model::{validate_partial_schedule, JobId, MachineId, Schedule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Invariant 1: a BB blocker whose machine no longer fits its job.
    BbOverloaded { stamp: u64 },
    /// Invariant 2: a BS or MS blocker whose machine would fit its job.
    AnyFits { stamp: u64 },
    /// Invariant 3: an M blocker whose job fits next to `S_i ∪ Mmin_i`.
    MFits { stamp: u64 },
    /// Invariant 4: an M blocker machine without medium jobs.
    MEmpty { machine: MachineId },
    /// Invariant 5: an MM blocker machine with fewer than two medium jobs.
    MmTooFew { machine: MachineId },
    NotAMove { stamp: u64 },
    DuplicateMove { job: JobId, machine: MachineId },
    MachineBlockedTwice { machine: MachineId },
    BadParent { stamp: u64 },
    BadLayer { stamp: u64, expected: Option<usize> },
    Unordered { stamp: u64 },
    Schedule(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BbOverloaded { stamp } => write!(f, "invariant 1 fails for blocker #{stamp}"),
            Violation::AnyFits { stamp } => write!(f, "invariant 2 fails for blocker #{stamp}"),
            Violation::MFits { stamp } => write!(f, "invariant 3 fails for blocker #{stamp}"),
            Violation::MEmpty { machine } => write!(f, "invariant 4 fails on {machine}"),
            Violation::MmTooFew { machine } => write!(f, "invariant 5 fails on {machine}"),
            Violation::NotAMove { stamp } => write!(f, "blocker #{stamp} is not a move"),
            Violation::DuplicateMove { job, machine } => {
                write!(f, "move ({job}, {machine}) appears twice")
            }
            Violation::MachineBlockedTwice { machine } => {
                write!(f, "{machine} carries more than one S/MS/BS blocker")
            }
            Violation::BadParent { stamp } => write!(f, "blocker #{stamp} has a stale parent"),
            Violation::BadLayer { stamp, expected } => {
                write!(f, "blocker #{stamp} is in the wrong layer (expected {expected:?})")
            }
            Violation::Unordered { stamp } => write!(f, "blocker #{stamp} is out of order"),
            Violation::Schedule(msg) => write!(f, "schedule: {msg}"),
        }
    }
}

/// The five load invariants plus the structural properties of the tree and
/// the validity of the schedule.
pub fn check_invariants<S: Scalar>(tree: &BlockerTree, s: &Schedule<S>) -> Vec<Violation> {
    let v = TreeView::new(tree, s);
    let inst = s.instance();
    let bound = inst.bound();
    let mut out = Vec::new();

    for b in tree.blockers() {
        let [a, _, c, _] = v.load_terms(b.job, b.machine, b.layer);
        match b.kind {
            BlockerKind::BB if &a > bound => out.push(Violation::BbOverloaded { stamp: b.stamp }),
            BlockerKind::BS | BlockerKind::MS if &a <= bound => {
                out.push(Violation::AnyFits { stamp: b.stamp })
            }
            BlockerKind::M if &c <= bound => out.push(Violation::MFits { stamp: b.stamp }),
            _ => {}
        }
        match b.kind {
            BlockerKind::M if s.medium_on(b.machine).is_empty() => {
                out.push(Violation::MEmpty { machine: b.machine })
            }
            BlockerKind::MM if s.medium_on(b.machine).len() < 2 => {
                out.push(Violation::MmTooFew { machine: b.machine })
            }
            _ => {}
        }
    }

    let mut moves = BTreeSet::new();
    let mut blocked_machines = BTreeSet::new();
    let mut prev: Option<&super::Blocker> = None;
    for b in tree.blockers() {
        if !inst.is_permitted(b.job, b.machine) || s.machine_of(b.job) == Some(b.machine) {
            out.push(Violation::NotAMove { stamp: b.stamp });
        }
        if !moves.insert((b.job, b.machine)) {
            out.push(Violation::DuplicateMove {
                job: b.job,
                machine: b.machine,
            });
        }
        if b.kind.blocks_all() && !blocked_machines.insert(b.machine) {
            out.push(Violation::MachineBlockedTwice { machine: b.machine });
        }
        if let Some(p) = prev {
            if p.stamp >= b.stamp || p.position() > b.position() {
                out.push(Violation::Unordered { stamp: b.stamp });
            }
        }
        prev = Some(b);

        let parent_ok = match b.parent {
            Parent::Root => b.job == tree.j_new(),
            Parent::Blocker(ps) => {
                b.job != tree.j_new()
                    && tree.get(ps).is_some()
                    && v.activator(b.job).map(|a| a.stamp) == Some(ps)
                    && tree.get(ps).map_or(false, |p| p.position() <= b.position())
            }
        };
        if !parent_ok {
            out.push(Violation::BadParent { stamp: b.stamp });
        }
        let expected = v.head_layer(b.job);
        if expected != Some(b.layer) {
            out.push(Violation::BadLayer {
                stamp: b.stamp,
                expected,
            });
        }
    }

    out.extend(
        validate_partial_schedule(s)
            .into_iter()
            .map(|e| Violation::Schedule(e.to_string())),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, ScaledInstance};
    use num_rational::BigRational;
    use std::sync::Arc;

    type Q = BigRational;

    #[test]
    fn corrupted_bb_blocker_is_reported() {
        // j_new = 19/20 huge; m0 holds 1/2 + 1/2 + 1/2 small load 3/2, so a BB
        // move there would need 3/2 + 19/20 <= 23/12, which fails.
        let base = Instance::new(
            2,
            [(1, 2), (1, 2), (1, 2), (19, 20)]
                .iter()
                .enumerate()
                .map(|(k, (n, d))| (format!("j{k}"), Q::from_frac(*n, *d), vec![MachineId(0), MachineId(1)])),
        )
        .unwrap();
        let si = Arc::new(ScaledInstance::new(Arc::new(base), Q::from_int(1), Q::from_frac(1, 24)).unwrap());
        let mut s = Schedule::empty(si);
        for j in 0..3 {
            s.assign(JobId(j), MachineId(0));
        }
        let mut t = BlockerTree::new(JobId(3));
        assert!(check_invariants(&t, &s).is_empty());
        t.push_unchecked(JobId(3), MachineId(0), BlockerKind::BB, 1, Parent::Root);
        let v = check_invariants(&t, &s);
        assert_eq!(v, vec![Violation::BbOverloaded { stamp: 0 }]);
        assert!(v[0].to_string().contains("invariant 1"));
    }
}
