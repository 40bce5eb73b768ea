use std::collections::{BTreeMap, BTreeSet};

use super::{Blocker, BlockerKind, BlockerTree};
use crate::model::{JobClass, JobId, LoadKind, MachineId, ScaledInstance, Schedule};
use crate::scalar::Scalar;

/// Read-only view of a tree together with the schedule it refers to.
pub struct TreeView<'a, S> {
    pub tree: &'a BlockerTree,
    pub schedule: &'a Schedule<S>,
}

/// A potential move chosen for addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub job: JobId,
    pub machine: MachineId,
    pub kind: BlockerKind,
    pub layer: usize,
}

impl<'a, S: Scalar> TreeView<'a, S> {
    pub fn new(tree: &'a BlockerTree, schedule: &'a Schedule<S>) -> Self {
        TreeView { tree, schedule }
    }

    pub fn inst(&self) -> &ScaledInstance<S> {
        self.schedule.instance()
    }

    /// Whether blocker `b` marks `j` undesirable on `b.machine`, where `j` is
    /// either sitting there or being considered for a move there.
    pub fn marks(&self, b: &Blocker, j: JobId) -> bool {
        let class = self.inst().class(j);
        match b.kind {
            BlockerKind::S | BlockerKind::MS | BlockerKind::BS => true,
            BlockerKind::BB => class == JobClass::Huge,
            BlockerKind::MM => class == JobClass::Medium,
            BlockerKind::M => {
                class == JobClass::Medium
                    && self.schedule.min_medium(b.machine).map_or(true, |min| j <= min)
            }
        }
    }

    /// Undesirability of `j` on `i` with respect to the blockers in layers
    /// `<= k` (`None` for the whole tree).
    pub fn undesirable_on(&self, j: JobId, i: MachineId, k: Option<usize>) -> bool {
        self.tree
            .prefix(k)
            .any(|b| b.machine == i && self.marks(b, j))
    }

    /// `S^(<=k)`: small jobs whose every alternative machine is covered by an
    /// S, MS or BS blocker in the prefix.
    pub fn blocked_small_jobs(&self, k: Option<usize>) -> BTreeSet<JobId> {
        let covered = self.tree.blocking_machines(k);
        self.blocked_with(&covered)
    }

    fn blocked_with(&self, covered: &BTreeSet<MachineId>) -> BTreeSet<JobId> {
        let inst = self.inst();
        inst.jobs_of_class(JobClass::Small)
            .filter(|&j| {
                let here = self.schedule.machine_of(j);
                inst.permitted(j)
                    .iter()
                    .all(|i| Some(*i) == here || covered.contains(i))
            })
            .collect()
    }

    /// `S_i^(<=k)`, the blocked small jobs of the prefix that sit on `i`.
    pub fn blocked_on(&self, i: MachineId, k: Option<usize>) -> BTreeSet<JobId> {
        let covered = self.tree.blocking_machines(k);
        self.blocked_on_with(i, &covered)
    }

    fn blocked_on_with(&self, i: MachineId, covered: &BTreeSet<MachineId>) -> BTreeSet<JobId> {
        let inst = self.inst();
        self.schedule
            .jobs_on(i)
            .iter()
            .copied()
            .filter(|&j| inst.class(j) == JobClass::Small)
            .filter(|&j| {
                inst.permitted(j)
                    .iter()
                    .all(|m| *m == i || covered.contains(m))
            })
            .collect()
    }

    /// The blocker that activates `j`: the earliest live blocker for `σ(j)`
    /// that marks `j` undesirable.
    pub fn activator(&self, j: JobId) -> Option<&'a Blocker> {
        let i = self.schedule.machine_of(j)?;
        self.tree
            .blockers()
            .iter()
            .find(|b| b.machine == i && self.marks(b, j))
    }

    pub fn is_active(&self, j: JobId) -> bool {
        j == self.tree.j_new()
            || self.activator(j).is_some()
            || self.blocked_small_jobs(None).contains(&j)
    }

    /// `A`: `j_new`, the blocked small jobs and every job undesirable where it
    /// sits.
    pub fn active_jobs(&self) -> BTreeSet<JobId> {
        let mut out = self.blocked_small_jobs(None);
        out.insert(self.tree.j_new());
        for b in self.tree.blockers() {
            for &j in self.schedule.jobs_on(b.machine) {
                if self.marks(b, j) {
                    out.insert(j);
                }
            }
        }
        out
    }

    /// `A^(<=k)`: the active set computed from the blockers in layers `<= k`.
    pub fn active_jobs_upto(&self, k: usize) -> BTreeSet<JobId> {
        let mut out = self.blocked_small_jobs(Some(k));
        out.insert(self.tree.j_new());
        for b in self.tree.prefix(Some(k)) {
            for &j in self.schedule.jobs_on(b.machine) {
                if self.marks(b, j) {
                    out.insert(j);
                }
            }
        }
        out
    }

    /// `A_i`.
    pub fn active_on(&self, i: MachineId) -> BTreeSet<JobId> {
        let active = self.active_jobs();
        self.schedule
            .jobs_on(i)
            .iter()
            .copied()
            .filter(|j| active.contains(j))
            .collect()
    }

    /// Layer in which blockers for `j` are placed, if `j` has an activator or
    /// is `j_new`.
    pub fn head_layer(&self, j: JobId) -> Option<usize> {
        if j == self.tree.j_new() && !self.schedule.is_assigned(j) {
            return Some(1);
        }
        let p = self.activator(j)?;
        let same = match p.kind {
            BlockerKind::BB => true,
            BlockerKind::BS => self.inst().class(j) == JobClass::Small,
            _ => false,
        };
        Some(if same { p.layer } else { p.layer + 1 })
    }

    /// The load terms `(a, b, c, d)` of a move of `j` to `i` for a
    /// `k`-headed `j`:
    /// `a = p(σ⁻¹(i)\H_i) + p_j`, `b = p(S_i ∪ M_i) + p_j`,
    /// `c = p(S_i ∪ Mmin_i) + p_j`, `d = p(S_i) + p_j`, with `S_i = S_i^(<=k)`.
    pub fn load_terms(&self, j: JobId, i: MachineId, k: usize) -> [S; 4] {
        let covered = self.tree.blocking_machines(Some(k));
        self.load_terms_with(j, i, &covered)
    }

    fn load_terms_with(&self, j: JobId, i: MachineId, covered: &BTreeSet<MachineId>) -> [S; 4] {
        let inst = self.inst();
        let pj = inst.size(j);
        let a = self.schedule.load_without_huge(i) + pj;
        let s_i = self.blocked_on_with(i, covered);
        let d = inst.sum(&s_i) + pj;
        let c = match self.schedule.min_medium(i) {
            Some(m) => d.clone() + inst.size(m),
            None => d.clone(),
        };
        let b = d.clone() + inst.sum(self.schedule.medium_on(i));
        [a, b, c, d]
    }

    /// Type of the potential move `(j, i)` for a `k`-headed `j`, if it is one.
    pub fn classify_potential_move(&self, j: JobId, i: MachineId, k: usize) -> Option<BlockerKind> {
        let covered = self.tree.blocking_machines(Some(k));
        self.classify_with(j, i, k, &covered)
    }

    fn classify_with(
        &self,
        j: JobId,
        i: MachineId,
        k: usize,
        covered: &BTreeSet<MachineId>,
    ) -> Option<BlockerKind> {
        if self.schedule.machine_of(j) == Some(i) || !self.inst().is_permitted(j, i) {
            return None;
        }
        if self.tree.contains_move(j, i) || self.undesirable_on(j, i, Some(k)) {
            return None;
        }
        let bound = self.inst().bound();
        match self.inst().class(j) {
            JobClass::Small => Some(BlockerKind::S),
            JobClass::Medium => {
                let [a, ..] = self.load_terms_with(j, i, covered);
                Some(if &a <= bound { BlockerKind::BB } else { BlockerKind::MS })
            }
            JobClass::Huge => {
                let [a, b, c, d] = self.load_terms_with(j, i, covered);
                if &d > bound {
                    None
                } else if &a <= bound {
                    Some(BlockerKind::BB)
                } else if &b <= bound {
                    Some(BlockerKind::BS)
                } else if &c <= bound {
                    Some(BlockerKind::MM)
                } else {
                    Some(BlockerKind::M)
                }
            }
        }
    }

    /// Every potential move of every headed active job, grouped by head layer.
    pub fn potential_moves(&self) -> BTreeMap<usize, Vec<(JobId, MachineId, BlockerKind)>> {
        let mut by_layer: BTreeMap<usize, Vec<(JobId, MachineId, BlockerKind)>> = BTreeMap::new();
        let mut covered_cache: BTreeMap<usize, BTreeSet<MachineId>> = BTreeMap::new();
        for j in self.active_jobs() {
            let Some(k) = self.head_layer(j) else {
                continue;
            };
            let covered = covered_cache
                .entry(k)
                .or_insert_with(|| self.tree.blocking_machines(Some(k)));
            for &i in self.inst().permitted(j) {
                if let Some(kind) = self.classify_with(j, i, k, covered) {
                    by_layer.entry(k).or_default().push((j, i, kind));
                }
            }
        }
        by_layer
    }

    /// Picks the next blocker: lowest head layer, then highest priority, then
    /// smallest `(job, machine)`. `Err(Some(l))` reports a lowest layer above
    /// `max_layer`, `Err(None)` that there is no potential move at all.
    pub fn select_addition(&self, max_layer: usize) -> Result<Selection, Option<usize>> {
        let moves = self.potential_moves();
        let Some((&layer, cands)) = moves.iter().next() else {
            return Err(None);
        };
        if layer > max_layer {
            return Err(Some(layer));
        }
        let &(job, machine, kind) = cands
            .iter()
            .max_by(|x, y| {
                x.2.priority()
                    .cmp(&y.2.priority())
                    .then((y.0, y.1).cmp(&(x.0, x.1)))
            })
            .expect("nonempty candidate list");
        Ok(Selection {
            job,
            machine,
            kind,
            layer,
        })
    }

    /// Whether the move `(j, i)` can be executed right now.
    pub fn is_valid_move(&self, j: JobId, i: MachineId) -> bool {
        let inst = self.inst();
        self.schedule.machine_of(j) != Some(i)
            && inst.is_permitted(j, i)
            && self.schedule.load(i, LoadKind::Up).clone() + inst.size(j) <= *inst.bound()
            && (inst.class(j) != JobClass::Huge || self.schedule.huge_on(i).is_empty())
    }

    /// The first valid blocker in (layer, sublayer, stamp) order.
    pub fn find_valid_move(&self) -> Option<&'a Blocker> {
        self.tree
            .blockers()
            .iter()
            .find(|b| self.is_valid_move(b.job, b.machine))
    }
}

pub fn blocked_small_jobs<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    k: Option<usize>,
) -> BTreeSet<JobId> {
    TreeView::new(tree, s).blocked_small_jobs(k)
}

pub fn active_jobs<S: Scalar>(tree: &BlockerTree, s: &Schedule<S>) -> BTreeSet<JobId> {
    TreeView::new(tree, s).active_jobs()
}

pub fn undesirable_on<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    j: JobId,
    i: MachineId,
    k: Option<usize>,
) -> bool {
    TreeView::new(tree, s).undesirable_on(j, i, k)
}

pub fn head_layer<S: Scalar>(tree: &BlockerTree, s: &Schedule<S>, j: JobId) -> Option<usize> {
    TreeView::new(tree, s).head_layer(j)
}

pub fn classify_potential_move<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    j: JobId,
    i: MachineId,
    k: usize,
) -> Option<BlockerKind> {
    TreeView::new(tree, s).classify_potential_move(j, i, k)
}

pub fn select_addition<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    max_layer: usize,
) -> Result<Selection, Option<usize>> {
    TreeView::new(tree, s).select_addition(max_layer)
}

pub fn find_valid_move<'a, S: Scalar>(
    tree: &'a BlockerTree,
    s: &'a Schedule<S>,
) -> Option<&'a Blocker> {
    TreeView::new(tree, s).find_valid_move()
}
