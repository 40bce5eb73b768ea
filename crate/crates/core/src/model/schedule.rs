use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::{JobClass, JobId, MachineId, ScaledInstance};
use crate::scalar::Scalar;

/// Which size system a load is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Plain,
    /// Huge jobs counted as 1.
    Up,
    /// Huge jobs counted as 5/6.
    Down,
}

#[derive(Debug, Clone)]
struct MachineState<S> {
    jobs: BTreeSet<JobId>,
    medium: BTreeSet<JobId>,
    huge: BTreeSet<JobId>,
    plain: S,
    up: S,
    down: S,
}

impl<S: Scalar> MachineState<S> {
    fn empty() -> Self {
        MachineState {
            jobs: BTreeSet::new(),
            medium: BTreeSet::new(),
            huge: BTreeSet::new(),
            plain: S::zero(),
            up: S::zero(),
            down: S::zero(),
        }
    }
}

/// A partial assignment of jobs to machines with incremental load
/// bookkeeping. Sizes are the scaled sizes of the attached instance.
#[derive(Debug, Clone)]
pub struct Schedule<S> {
    inst: Arc<ScaledInstance<S>>,
    assignment: Vec<Option<MachineId>>,
    machines: Vec<MachineState<S>>,
}

impl<S: Scalar> Schedule<S> {
    /// The schedule with every job unassigned.
    pub fn empty(inst: Arc<ScaledInstance<S>>) -> Self {
        let machines = (0..inst.machine_count()).map(|_| MachineState::empty()).collect();
        let assignment = vec![None; inst.job_count()];
        Schedule {
            inst,
            assignment,
            machines,
        }
    }

    pub fn instance(&self) -> &Arc<ScaledInstance<S>> {
        &self.inst
    }

    /// Same assignment over another scaling of the same base instance.
    pub fn rescaled(&self, inst: Arc<ScaledInstance<S>>) -> Schedule<S> {
        assert_eq!(inst.job_count(), self.assignment.len());
        let mut out = Schedule::empty(inst);
        for (j, slot) in self.assignment.iter().enumerate() {
            if let Some(i) = slot {
                out.assign(JobId(j), *i);
            }
        }
        out
    }

    pub fn machine_of(&self, j: JobId) -> Option<MachineId> {
        self.assignment[j.0]
    }

    pub fn is_assigned(&self, j: JobId) -> bool {
        self.assignment[j.0].is_some()
    }

    pub fn assignment(&self) -> &[Option<MachineId>] {
        &self.assignment
    }

    /// Puts `j` on `i`, removing it from its previous machine. The permitted
    /// set is not checked here; see [`validate_partial_schedule`].
    pub fn assign(&mut self, j: JobId, i: MachineId) {
        self.unassign(j);
        let class = self.inst.class(j);
        let st = &mut self.machines[i.0];
        st.jobs.insert(j);
        match class {
            JobClass::Medium => {
                st.medium.insert(j);
            }
            JobClass::Huge => {
                st.huge.insert(j);
            }
            JobClass::Small => {}
        }
        st.plain += self.inst.size(j);
        st.up += self.inst.size_up(j);
        st.down += self.inst.size_down(j);
        self.assignment[j.0] = Some(i);
    }

    pub fn unassign(&mut self, j: JobId) {
        if let Some(i) = self.assignment[j.0].take() {
            let st = &mut self.machines[i.0];
            st.jobs.remove(&j);
            st.medium.remove(&j);
            st.huge.remove(&j);
            st.plain -= self.inst.size(j);
            st.up -= self.inst.size_up(j);
            st.down -= self.inst.size_down(j);
        }
    }

    pub fn load(&self, i: MachineId, kind: LoadKind) -> &S {
        let st = &self.machines[i.0];
        match kind {
            LoadKind::Plain => &st.plain,
            LoadKind::Up => &st.up,
            LoadKind::Down => &st.down,
        }
    }

    /// Load recomputed from the job set, ignoring the running totals.
    pub fn load_from_scratch(&self, i: MachineId, kind: LoadKind) -> S {
        let jobs = &self.machines[i.0].jobs;
        match kind {
            LoadKind::Plain => self.inst.sum(jobs),
            LoadKind::Up => jobs
                .iter()
                .fold(S::zero(), |acc, j| acc + self.inst.size_up(*j)),
            LoadKind::Down => self.inst.sum_down(jobs),
        }
    }

    /// `sigma^-1(i)`.
    pub fn jobs_on(&self, i: MachineId) -> &BTreeSet<JobId> {
        &self.machines[i.0].jobs
    }

    /// `M_i`, the medium jobs on `i`.
    pub fn medium_on(&self, i: MachineId) -> &BTreeSet<JobId> {
        &self.machines[i.0].medium
    }

    /// `H_i`, the huge jobs on `i`.
    pub fn huge_on(&self, i: MachineId) -> &BTreeSet<JobId> {
        &self.machines[i.0].huge
    }

    /// `min M_i`, if any.
    pub fn min_medium(&self, i: MachineId) -> Option<JobId> {
        self.machines[i.0].medium.iter().next().copied()
    }

    /// `p(sigma^-1(i) \ H_i)`.
    pub fn load_without_huge(&self, i: MachineId) -> S {
        let st = &self.machines[i.0];
        st.huge
            .iter()
            .fold(st.plain.clone(), |acc, j| acc - self.inst.size(*j))
    }

    pub fn makespan(&self) -> S {
        self.machines
            .iter()
            .map(|m| m.plain.clone())
            .max()
            .unwrap_or_else(S::zero)
    }

    pub fn unassigned(&self) -> impl Iterator<Item = JobId> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(j, _)| JobId(j))
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|s| s.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation<S> {
    /// Clause 1: `sigma(j)` outside `Gamma(j)`.
    NotPermitted { job: JobId, machine: MachineId },
    /// Clause 2: plain load above `1 + R`.
    Overloaded { machine: MachineId, load: S },
    /// Clause 3: more than one huge job.
    SeveralHuge { machine: MachineId, jobs: Vec<JobId> },
}

impl<S: Scalar> fmt::Display for ScheduleViolation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleViolation::NotPermitted { job, machine } => {
                write!(f, "clause 1: {job} placed on {machine} outside its permitted set")
            }
            ScheduleViolation::Overloaded { machine, load } => {
                write!(f, "clause 2: {machine} has load {load} above 1+R")
            }
            ScheduleViolation::SeveralHuge { machine, jobs } => {
                write!(f, "clause 3: {machine} holds {} huge jobs", jobs.len())
            }
        }
    }
}

/// Checks the three clauses of a valid partial schedule. Empty iff valid.
pub fn validate_partial_schedule<S: Scalar>(s: &Schedule<S>) -> Vec<ScheduleViolation<S>> {
    let inst = s.instance();
    let mut out = Vec::new();
    for (j, slot) in s.assignment().iter().enumerate() {
        if let Some(i) = slot {
            if !inst.is_permitted(JobId(j), *i) {
                out.push(ScheduleViolation::NotPermitted {
                    job: JobId(j),
                    machine: *i,
                });
            }
        }
    }
    for i in inst.machine_ids() {
        let load = s.load(i, LoadKind::Plain);
        if load > inst.bound() {
            out.push(ScheduleViolation::Overloaded {
                machine: i,
                load: load.clone(),
            });
        }
        if s.huge_on(i).len() > 1 {
            out.push(ScheduleViolation::SeveralHuge {
                machine: i,
                jobs: s.huge_on(i).iter().copied().collect(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Instance;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_frac(n, d)
    }

    fn scaled(sizes: &[(i64, i64)], machines: usize) -> Arc<ScaledInstance<BigRational>> {
        let jobs = sizes.iter().enumerate().map(|(k, &(n, d))| {
            (format!("j{k}"), q(n, d), (0..machines).map(MachineId).collect())
        });
        let inst = Arc::new(Instance::new(machines, jobs).unwrap());
        Arc::new(ScaledInstance::new(inst, q(1, 1), q(1, 24)).unwrap())
    }

    #[test]
    fn empty_machine_has_zero_loads() {
        let s = Schedule::empty(scaled(&[(1, 2)], 2));
        for kind in [LoadKind::Plain, LoadKind::Up, LoadKind::Down] {
            assert_eq!(s.load(MachineId(1), kind), &q(0, 1));
        }
    }

    #[test]
    fn loads_in_three_systems() {
        let si = scaled(&[(9, 10), (1, 3)], 1);
        let mut s = Schedule::empty(si);
        s.assign(JobId(0), MachineId(0));
        s.assign(JobId(1), MachineId(0));
        assert_eq!(s.load(MachineId(0), LoadKind::Plain), &q(37, 30));
        assert_eq!(s.load(MachineId(0), LoadKind::Up), &q(4, 3));
        assert_eq!(s.load(MachineId(0), LoadKind::Down), &q(7, 6));
        // Moving the 1/3 job away drops every system by exactly 1/3.
        let mut t = s.clone();
        t.unassign(JobId(0));
        assert_eq!(t.load(MachineId(0), LoadKind::Plain), &q(9, 10));
        assert_eq!(t.load(MachineId(0), LoadKind::Up), &q(1, 1));
        assert_eq!(t.load(MachineId(0), LoadKind::Down), &q(5, 6));
        assert_eq!(s.load_without_huge(MachineId(0)), q(1, 3));
    }

    #[test]
    fn all_unassigned_is_valid() {
        let s = Schedule::empty(scaled(&[(9, 10), (19, 20), (1, 2)], 2));
        assert!(validate_partial_schedule(&s).is_empty());
    }

    #[test]
    fn two_huge_on_one_machine() {
        let mut s = Schedule::empty(scaled(&[(9, 10), (19, 20)], 2));
        s.assign(JobId(0), MachineId(0));
        s.assign(JobId(1), MachineId(0));
        let v = validate_partial_schedule(&s);
        assert!(v.iter().any(|x| matches!(x, ScheduleViolation::SeveralHuge { .. })));
    }

    #[test]
    fn load_just_above_bound() {
        // 1 + R = 23/12 at epsilon 1/24; three jobs of 29/45 sum to 23/12 + 1/60.
        let mut s = Schedule::empty(scaled(&[(29, 45), (29, 45), (29, 45)], 1));
        for j in 0..3 {
            s.assign(JobId(j), MachineId(0));
        }
        assert_eq!(s.load(MachineId(0), LoadKind::Plain), &(q(23, 12) + q(1, 60)));
        let v = validate_partial_schedule(&s);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], ScheduleViolation::Overloaded { .. }));
    }

    #[test]
    fn outside_permitted_set() {
        let inst = Arc::new(
            Instance::new(2, vec![("a".to_string(), q(1, 3), vec![MachineId(0)])]).unwrap(),
        );
        let si = Arc::new(ScaledInstance::new(inst, q(1, 1), q(1, 24)).unwrap());
        let mut s = Schedule::empty(si);
        s.assign(JobId(0), MachineId(1));
        assert_eq!(
            validate_partial_schedule(&s),
            vec![ScheduleViolation::NotPermitted {
                job: JobId(0),
                machine: MachineId(1)
            }]
        );
    }

    #[test]
    fn incremental_loads_match_scratch_after_many_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sizes: Vec<(i64, i64)> = (0..25).map(|_| (rng.gen_range(1..=60), 60)).collect();
        let mut s = Schedule::empty(scaled(&sizes, 5));
        for _ in 0..10_000 {
            let j = JobId(rng.gen_range(0..25));
            if rng.gen_bool(0.2) {
                s.unassign(j);
            } else {
                s.assign(j, MachineId(rng.gen_range(0..5)));
            }
        }
        for i in 0..5 {
            for kind in [LoadKind::Plain, LoadKind::Up, LoadKind::Down] {
                assert_eq!(s.load(MachineId(i), kind), &s.load_from_scratch(MachineId(i), kind));
            }
        }
    }

    proptest! {
        #[test]
        fn incremental_matches_scratch(steps in proptest::collection::vec((0usize..6, 0usize..4, any::<bool>()), 0..60)) {
            let mut s = Schedule::empty(scaled(&[(1, 7), (2, 5), (1, 2), (3, 5), (5, 6), (9, 10)], 3));
            for (j, i, drop) in steps {
                if drop || i == 3 { s.unassign(JobId(j)); } else { s.assign(JobId(j), MachineId(i)); }
            }
            for i in 0..3 {
                for kind in [LoadKind::Plain, LoadKind::Up, LoadKind::Down] {
                    prop_assert_eq!(s.load(MachineId(i), kind), &s.load_from_scratch(MachineId(i), kind));
                }
            }
        }
    }
}
