use serde::Serialize;
use thiserror::Error;

use super::{
    check_invariants, signature_vector, Blocker, BlockerKind, BlockerTree, MonitorReport, Parent,
    Selection, SignatureMonitor, SignatureVector, TreeView, Violation,
};
use crate::model::{validate_partial_schedule, JobClass, JobId, MachineId, Schedule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Check every invariant at the top of each iteration and abort on the
    /// first violation.
    pub audit: bool,
    /// Keep an event record, with a tree snapshot, for every iteration.
    pub record_events: bool,
    pub watchdog: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            audit: false,
            record_events: false,
            watchdog: 1_000_000,
        }
    }
}

/// `K = ceil(2/ε · ceil(ln m + 1))`.
pub fn layer_bound<S: Scalar>(epsilon: &S, machines: usize) -> usize {
    let c = ((machines.max(1) as f64).ln() + 1.0).ceil() as i64;
    let k = S::from_int(2) / epsilon * S::from_int(c);
    usize::try_from(k.ceil_to_i64()).expect("positive layer bound")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Add,
    Move,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineEvent {
    pub iteration: u64,
    pub event: EventKind,
    pub job: JobId,
    pub machine: MachineId,
    /// `None` for the direct placement of `j_new` into an empty tree.
    pub kind: Option<BlockerKind>,
    pub layer: usize,
    pub sublayer: usize,
    pub stamp: Option<u64>,
    /// Signature after the event, absent once `j_new` is placed.
    pub signature: Option<SignatureVector>,
    /// Blockers removed by this event.
    pub deleted: Vec<u64>,
    pub tree: Vec<Blocker>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub iterations: u64,
    pub adds: u64,
    pub moves: u64,
    pub deleted: u64,
    /// Blockers dropped because their job lost its activator.
    pub orphans: u64,
    pub max_layer: usize,
    pub audited: u64,
    pub monitor: MonitorReport,
}

#[derive(Debug, Clone)]
pub struct Inserted<S> {
    pub schedule: Schedule<S>,
    pub stats: RunStats,
    pub events: Vec<EngineEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StuckReason {
    NoPotentialMove,
    /// The lowest layer with a potential move exceeds `K`.
    LayerOverflow(usize),
}

#[derive(Debug, Clone)]
pub struct StuckState<S> {
    pub tree: BlockerTree,
    pub schedule: Schedule<S>,
    pub j_new: JobId,
    pub k_max: usize,
    pub reason: StuckReason,
    pub stats: RunStats,
    pub events: Vec<EngineEvent>,
}

#[derive(Debug, Error)]
pub enum InsertError<S: Scalar> {
    #[error("no valid move and no potential move up to layer {}", .0.k_max)]
    Stuck(Box<StuckState<S>>),
    #[error("invariant violation at iteration {iteration}: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invariant {
        iteration: u64,
        violations: Vec<Violation>,
    },
    #[error("watchdog: more than {0} iterations")]
    Watchdog(u64),
    #[error("bad input: {0}")]
    BadInput(String),
}

struct Run<S> {
    tree: BlockerTree,
    schedule: Schedule<S>,
    j_new: JobId,
    k_max: usize,
    config: EngineConfig,
    stats: RunStats,
    monitor: SignatureMonitor,
    events: Vec<EngineEvent>,
}

/// Inserts the huge, unassigned job `j_new` into the valid partial schedule
/// `s`. On success every previously assigned job is still assigned.
pub fn insert_huge_job<S: Scalar>(
    s: Schedule<S>,
    j_new: JobId,
    config: EngineConfig,
) -> Result<Inserted<S>, InsertError<S>> {
    let inst = s.instance().clone();
    if inst.class(j_new) != JobClass::Huge {
        return Err(InsertError::BadInput(format!("{j_new} is not huge")));
    }
    if s.is_assigned(j_new) {
        return Err(InsertError::BadInput(format!("{j_new} is already assigned")));
    }
    if let Some(v) = validate_partial_schedule(&s).first() {
        return Err(InsertError::BadInput(v.to_string()));
    }
    let mut run = Run {
        tree: BlockerTree::new(j_new),
        schedule: s,
        j_new,
        k_max: layer_bound(inst.epsilon(), inst.machine_count()),
        config,
        stats: RunStats::default(),
        monitor: SignatureMonitor::new(),
        events: Vec::new(),
    };

    // Empty tree: a direct valid move of j_new is taken at once.
    let direct = inst
        .permitted(j_new)
        .iter()
        .copied()
        .find(|&i| TreeView::new(&run.tree, &run.schedule).is_valid_move(j_new, i));
    if let Some(i) = direct {
        run.stats.iterations = 1;
        run.stats.moves = 1;
        run.schedule.assign(j_new, i);
        run.record(EventKind::Move, j_new, i, None, None, Vec::new());
        return Ok(run.finish());
    }

    loop {
        run.stats.iterations += 1;
        if run.stats.iterations > run.config.watchdog {
            return Err(InsertError::Watchdog(run.config.watchdog));
        }
        if run.config.audit {
            run.stats.audited += 1;
            let violations = check_invariants(&run.tree, &run.schedule);
            if !violations.is_empty() {
                return Err(InsertError::Invariant {
                    iteration: run.stats.iterations,
                    violations,
                });
            }
        }
        let view = TreeView::new(&run.tree, &run.schedule);
        if let Some(b) = view.find_valid_move().cloned() {
            if run.execute(b) {
                return Ok(run.finish());
            }
            continue;
        }
        match view.select_addition(run.k_max) {
            Ok(sel) => run.add(sel),
            Err(overflow) => {
                let sig = signature_vector(&run.tree, &run.schedule);
                run.monitor.end_run(sig);
                run.stats.monitor = run.monitor.report().clone();
                return Err(InsertError::Stuck(Box::new(StuckState {
                    reason: overflow.map_or(StuckReason::NoPotentialMove, StuckReason::LayerOverflow),
                    tree: run.tree,
                    schedule: run.schedule,
                    j_new: run.j_new,
                    k_max: run.k_max,
                    stats: run.stats,
                    events: run.events,
                })));
            }
        }
    }
}

impl<S: Scalar> Run<S> {
    fn finish(mut self) -> Inserted<S> {
        self.stats.monitor = self.monitor.report().clone();
        debug_assert!(validate_partial_schedule(&self.schedule).is_empty());
        Inserted {
            schedule: self.schedule,
            stats: self.stats,
            events: self.events,
        }
    }

    fn record(
        &mut self,
        event: EventKind,
        job: JobId,
        machine: MachineId,
        blocker: Option<&Blocker>,
        signature: Option<SignatureVector>,
        deleted: Vec<u64>,
    ) {
        if !self.config.record_events {
            return;
        }
        self.events.push(EngineEvent {
            iteration: self.stats.iterations,
            event,
            job,
            machine,
            kind: blocker.map(|b| b.kind),
            layer: blocker.map_or(0, |b| b.layer),
            sublayer: blocker.map_or(0, |b| b.kind.sublayer()),
            stamp: blocker.map(|b| b.stamp),
            signature,
            deleted,
            tree: self.tree.blockers().to_vec(),
        });
    }

    fn add(&mut self, sel: Selection) {
        let before = signature_vector(&self.tree, &self.schedule);
        let parent = if sel.job == self.j_new {
            Parent::Root
        } else {
            let view = TreeView::new(&self.tree, &self.schedule);
            Parent::Blocker(view.activator(sel.job).expect("headed job has an activator").stamp)
        };
        let removed = self.tree.remove_after((sel.layer, sel.kind.sublayer()));
        let stamp = self
            .tree
            .push(sel.job, sel.machine, sel.kind, sel.layer, parent);
        if let Parent::Blocker(p) = parent {
            assert!(self.tree.get(p).is_some(), "activator deleted by its own child");
        }
        self.stats.adds += 1;
        self.stats.deleted += removed.len() as u64;
        self.stats.max_layer = self.stats.max_layer.max(sel.layer);
        let after = signature_vector(&self.tree, &self.schedule);
        self.monitor.on_add(before, after.clone());
        let b = self.tree.get(stamp).cloned();
        self.record(
            EventKind::Add,
            sel.job,
            sel.machine,
            b.as_ref(),
            Some(after),
            removed.iter().map(|b| b.stamp).collect(),
        );
    }

    /// Performs the move of `b`; returns true once `j_new` is placed.
    fn execute(&mut self, b: Blocker) -> bool {
        self.schedule.assign(b.job, b.machine);
        self.stats.moves += 1;
        if b.job == self.j_new {
            self.monitor.on_done();
            self.record(EventKind::Move, b.job, b.machine, Some(&b), None, Vec::new());
            return true;
        }
        let Parent::Blocker(ps) = b.parent else {
            unreachable!("only j_new hangs off the root");
        };
        let p = self.tree.get(ps).cloned().expect("parent of a live blocker is live");
        let mut removed = self.tree.remove_after(p.position());
        // A BB child shares its parent's sublayer; the executed move and the
        // job's other blockers are no longer moves from the job's new machine.
        removed.extend(self.tree.remove_where(|x| x.job == b.job));

        let mut starred = Vec::new();
        if !self.starred_conditions_hold(&p) {
            starred = self.tree.remove_from(p.position());
        }
        let orphans = self.drop_orphans();
        self.stats.orphans += orphans.len() as u64;
        removed.extend(orphans);
        self.stats.deleted += (removed.len() + starred.len()) as u64;
        self.monitor.on_move();

        let sig = signature_vector(&self.tree, &self.schedule);
        self.record(
            EventKind::Move,
            b.job,
            b.machine,
            Some(&b),
            Some(sig.clone()),
            removed.iter().map(|x| x.stamp).collect(),
        );
        if !starred.is_empty() {
            self.record(
                EventKind::Delete,
                p.job,
                p.machine,
                Some(&p),
                Some(sig),
                starred.iter().map(|x| x.stamp).collect(),
            );
        }
        false
    }

    /// The starred conditions of the activator `p`, re-evaluated after one of
    /// its jobs left `p.machine`.
    fn starred_conditions_hold(&self, p: &Blocker) -> bool {
        let view = TreeView::new(&self.tree, &self.schedule);
        let bound = self.schedule.instance().bound();
        let [a, b, c, _] = view.load_terms(p.job, p.machine, p.layer);
        match p.kind {
            BlockerKind::BS | BlockerKind::MS => &a > bound,
            BlockerKind::M => &c > bound,
            BlockerKind::MM => &b > bound && &c <= bound,
            BlockerKind::BB | BlockerKind::S => true,
        }
    }

    /// Removes, one at a time, blockers whose job is no longer activated by
    /// the recorded parent.
    fn drop_orphans(&mut self) -> Vec<Blocker> {
        let mut out = Vec::new();
        loop {
            let view = TreeView::new(&self.tree, &self.schedule);
            let orphan = self.tree.blockers().iter().find(|b| match b.parent {
                Parent::Root => false,
                Parent::Blocker(ps) => view.activator(b.job).map(|a| a.stamp) != Some(ps),
            });
            let Some(stamp) = orphan.map(|b| b.stamp) else {
                return out;
            };
            out.extend(self.tree.remove_where(|b| b.stamp == stamp));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, ScaledInstance};
    use num_rational::BigRational;
    use std::sync::Arc;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    fn schedule(m: usize, jobs: &[((i64, i64), &[usize])]) -> Schedule<Q> {
        let base = Instance::new(
            m,
            jobs.iter().enumerate().map(|(k, ((n, d), ms))| {
                (format!("j{k}"), q(*n, *d), ms.iter().map(|x| MachineId(*x)).collect())
            }),
        )
        .unwrap();
        let si = ScaledInstance::new(Arc::new(base), q(1, 1), q(1, 24)).unwrap();
        Schedule::empty(Arc::new(si))
    }

    fn audited() -> EngineConfig {
        EngineConfig {
            audit: true,
            record_events: true,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn layer_bound_values() {
        assert_eq!(layer_bound(&q(1, 24), 10), 192);
        assert_eq!(layer_bound(&q(1, 24), 1), 48);
        assert_eq!(layer_bound(&q(1, 48), 10), 384);
        assert_eq!(layer_bound(&q(1, 13), 2), 52);
    }

    #[test]
    fn direct_placement_on_an_empty_machine() {
        let s = schedule(2, &[((1, 2), &[0]), ((9, 10), &[0, 1])]);
        let mut s = s;
        s.assign(JobId(0), MachineId(0));
        let r = insert_huge_job(s, JobId(1), audited()).unwrap();
        assert_eq!(r.schedule.machine_of(JobId(1)), Some(MachineId(0)));
        assert_eq!(r.stats.iterations, 1);
    }

    #[test]
    fn three_small_jobs_get_stuck() {
        let mut s = schedule(
            1,
            &[((7, 20), &[0]), ((7, 20), &[0]), ((7, 20), &[0]), ((9, 10), &[0])],
        );
        for j in 0..3 {
            s.assign(JobId(j), MachineId(0));
        }
        match insert_huge_job(s, JobId(3), audited()) {
            Err(InsertError::Stuck(st)) => {
                assert_eq!(st.reason, StuckReason::NoPotentialMove);
                assert!(st.tree.is_empty());
                assert_eq!(st.k_max, 48);
            }
            other => panic!("expected Stuck, got {other:?}"),
        }
    }

    #[test]
    fn huge_job_swaps_through_a_bb_chain() {
        // m0 holds huge h = 19/20, m1 is free but only h may go there.
        // j_new = 9/10 only fits m0.
        let mut s = schedule(2, &[((9, 10), &[0]), ((19, 20), &[0, 1])]);
        s.assign(JobId(1), MachineId(0));
        let r = insert_huge_job(s, JobId(0), audited()).unwrap();
        assert_eq!(r.schedule.machine_of(JobId(0)), Some(MachineId(0)));
        assert_eq!(r.schedule.machine_of(JobId(1)), Some(MachineId(1)));
        assert_eq!(r.stats.adds, 2);
        assert_eq!(r.stats.moves, 2);
        assert_eq!(r.stats.monitor.literal_violations, 0);
    }

    #[test]
    fn small_jobs_make_room() {
        // m0 holds three 7/20 small jobs that may also go to m1 or m2.
        let mut s = schedule(
            3,
            &[((7, 20), &[0, 1]), ((7, 20), &[0, 2]), ((7, 20), &[0, 1]), ((9, 10), &[0])],
        );
        for j in 0..3 {
            s.assign(JobId(j), MachineId(0));
        }
        let r = insert_huge_job(s, JobId(3), audited()).unwrap();
        assert_eq!(r.schedule.machine_of(JobId(3)), Some(MachineId(0)));
        assert!(validate_partial_schedule(&r.schedule).is_empty());
        assert_eq!(r.schedule.assigned_count(), 4);
        assert!(r.events.iter().any(|e| e.kind == Some(BlockerKind::BS)));
    }

    #[test]
    fn rejects_non_huge_or_assigned_job() {
        let s = schedule(1, &[((1, 2), &[0]), ((9, 10), &[0])]);
        assert!(matches!(
            insert_huge_job(s.clone(), JobId(0), EngineConfig::default()),
            Err(InsertError::BadInput(_))
        ));
        let mut s2 = s;
        s2.assign(JobId(1), MachineId(0));
        assert!(matches!(
            insert_huge_job(s2, JobId(1), EngineConfig::default()),
            Err(InsertError::BadInput(_))
        ));
    }
}
