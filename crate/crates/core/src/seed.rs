//! Seed schedule for the small and medium jobs.
//!
//! Solves the assignment LP (`sum_i x[j,i] = 1`, `sum_j p_j x[j,i] <= 1`)
//! exactly, pushes the solution onto a forest support by shifting mass around
//! support cycles, and rounds the forest so that every machine receives at
//! most one fractional job on top of its integral load. The result has
//! makespan at most `1 + max p_j` in scaled units.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{JobClass, JobId, LoadKind, MachineId, ScaledInstance, Schedule};
use crate::scalar::Scalar;

/// The assignment LP has no solution at this guess, so the guess is below the
/// configuration-LP optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("assignment LP infeasible at this guess")]
pub struct Infeasible;

/// Nonzero entries of a fractional assignment of small and medium jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalAssignment<S> {
    entries: BTreeMap<(JobId, MachineId), S>,
}

impl<S: Scalar> FractionalAssignment<S> {
    /// Zero entries are dropped.
    pub fn new(entries: impl IntoIterator<Item = ((JobId, MachineId), S)>) -> Self {
        FractionalAssignment {
            entries: entries.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<(JobId, MachineId), S> {
        &self.entries
    }

    pub fn get(&self, j: JobId, i: MachineId) -> S {
        self.entries.get(&(j, i)).cloned().unwrap_or_else(S::zero)
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn jobs(&self) -> BTreeSet<JobId> {
        self.entries.keys().map(|(j, _)| *j).collect()
    }

    pub fn machines(&self) -> BTreeSet<MachineId> {
        self.entries.keys().map(|(_, i)| *i).collect()
    }

    /// Sum of `p_j x[j,i]` over the entries on machine `i`.
    pub fn machine_load(&self, si: &ScaledInstance<S>, i: MachineId) -> S {
        self.entries
            .iter()
            .filter(|((_, m), _)| *m == i)
            .fold(S::zero(), |acc, ((j, _), v)| acc + si.size(*j).clone() * v)
    }

    /// Both constraint families hold exactly, entries lie in `(0, 1]` and
    /// respect the permitted sets.
    pub fn is_feasible(&self, si: &ScaledInstance<S>) -> bool {
        let mut per_job: BTreeMap<JobId, S> = BTreeMap::new();
        for ((j, i), v) in &self.entries {
            if !v.is_positive() || *v > S::one() || !si.is_permitted(*j, *i) {
                return false;
            }
            *per_job.entry(*j).or_insert_with(S::zero) += v;
        }
        per_job.values().all(|s| s.is_one())
            && si
                .machine_ids()
                .all(|i| self.machine_load(si, i) <= S::one())
    }

    /// Whether the bipartite job–machine support graph is acyclic.
    pub fn is_forest(&self) -> bool {
        find_cycle(self.entries.keys().copied()).is_none()
    }
}

/// Solves the assignment LP over the small and medium jobs of `si`.
pub fn solve_assignment_lp<S: Scalar>(
    si: &ScaledInstance<S>,
) -> Result<FractionalAssignment<S>, Infeasible> {
    let jobs: Vec<JobId> = si
        .job_ids()
        .filter(|&j| si.class(j) != JobClass::Huge)
        .collect();
    let mut vars: Vec<(JobId, MachineId)> = Vec::new();
    for &j in &jobs {
        for &i in si.permitted(j) {
            vars.push((j, i));
        }
    }
    if vars.is_empty() {
        return Ok(FractionalAssignment::new([]));
    }
    let mut lp = LinearProgram::new(vars.len());
    for &j in &jobs {
        let coeffs = vars
            .iter()
            .enumerate()
            .filter(|(_, (jj, _))| *jj == j)
            .map(|(v, _)| (v, S::one()))
            .collect();
        lp.add_constraint(coeffs, Relation::Eq, S::one());
    }
    for i in si.machine_ids() {
        let coeffs: Vec<(usize, S)> = vars
            .iter()
            .enumerate()
            .filter(|(_, (_, ii))| *ii == i)
            .map(|(v, (j, _))| (v, si.size(*j).clone()))
            .collect();
        if !coeffs.is_empty() {
            lp.add_constraint(coeffs, Relation::Le, S::one());
        }
    }
    match lp.solve() {
        LpOutcome::Optimal(sol) => Ok(FractionalAssignment::new(
            vars.into_iter().zip(sol.x),
        )),
        LpOutcome::Infeasible => Err(Infeasible),
        LpOutcome::Unbounded => unreachable!("feasibility LP has a zero objective"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Job(JobId),
    Machine(MachineId),
}

/// Returns the node sequence of some cycle, starting at a job node, or `None`
/// if the edge set is a forest.
fn find_cycle(edges: impl IntoIterator<Item = (JobId, MachineId)>) -> Option<Vec<Node>> {
    let mut adj: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut comp: BTreeMap<Node, usize> = BTreeMap::new();
    let mut comps: Vec<Vec<Node>> = Vec::new();
    for (j, i) in edges {
        let (a, b) = (Node::Job(j), Node::Machine(i));
        for n in [a, b] {
            if let std::collections::btree_map::Entry::Vacant(e) = comp.entry(n) {
                e.insert(comps.len());
                comps.push(vec![n]);
            }
        }
        let (ca, cb) = (comp[&a], comp[&b]);
        if ca == cb {
            // a and b are already connected: path a ~> b plus edge (b, a).
            let path = tree_path(&adj, a, b);
            return Some(path);
        }
        let moved = std::mem::take(&mut comps[cb]);
        for n in &moved {
            comp.insert(*n, ca);
        }
        comps[ca].extend(moved);
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    None
}

fn tree_path(adj: &BTreeMap<Node, Vec<Node>>, from: Node, to: Node) -> Vec<Node> {
    let mut prev: BTreeMap<Node, Node> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            break;
        }
        for &m in adj.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(m) {
                prev.insert(m, n);
                queue.push_back(m);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[&cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Shifts mass around support cycles until the support is a forest. Job sums
/// and machine loads are left exactly unchanged and each step removes at least
/// one support edge. Returns the number of cycles eliminated.
pub fn eliminate_cycles<S: Scalar>(
    fa: &mut FractionalAssignment<S>,
    si: &ScaledInstance<S>,
) -> usize {
    let loads_before: Vec<S> = si.machine_ids().map(|i| fa.machine_load(si, i)).collect();
    let mut rounds = 0;
    while let Some(cycle) = find_cycle(fa.entries.keys().copied()) {
        // cycle = [j1, i1, j2, i2, ..., jL, iL], closing iL - j1. Moving job
        // j_t by +c/p on (j_t, i_t) and -c/p on (j_t, i_{t-1}) keeps every job
        // sum and every machine load fixed.
        let len = cycle.len();
        debug_assert!(len >= 4 && len % 2 == 0);
        let mut dir: Vec<((JobId, MachineId), S)> = Vec::with_capacity(len);
        for t in (0..len).step_by(2) {
            let Node::Job(j) = cycle[t] else { unreachable!() };
            let Node::Machine(next) = cycle[t + 1] else { unreachable!() };
            let Node::Machine(prev) = cycle[(t + len - 1) % len] else { unreachable!() };
            let inv = S::one() / si.size(j);
            dir.push(((j, next), inv.clone()));
            dir.push(((j, prev), -inv));
        }
        let theta = dir
            .iter()
            .filter(|(_, d)| d.is_negative())
            .map(|(e, d)| fa.entries[e].clone() / (-d.clone()))
            .min()
            .expect("every cycle has decreasing edges");
        for (e, d) in dir {
            let v = fa.entries.get_mut(&e).expect("cycle edge in support");
            *v += theta.clone() * d;
            if v.is_zero() {
                fa.entries.remove(&e);
            }
        }
        rounds += 1;
    }
    for (i, before) in si.machine_ids().zip(loads_before) {
        assert_eq!(fa.machine_load(si, i), before, "cycle shift changed a load");
    }
    rounds
}

/// Rounds a forest-supported fractional assignment to an integral schedule of
/// its jobs. Jobs with an entry equal to 1 keep that machine; every other job
/// goes to one neighbouring machine so that no machine gets two of them.
pub fn round_forest<S: Scalar>(
    fa: &FractionalAssignment<S>,
    si: &Arc<ScaledInstance<S>>,
) -> Schedule<S> {
    assert!(fa.is_forest(), "round_forest needs a forest support");
    let mut sched = Schedule::empty(si.clone());
    let mut fractional: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    for (&(j, i), v) in fa.entries() {
        if v.is_one() {
            sched.assign(j, i);
        } else {
            fractional.entry(Node::Job(j)).or_default().push(Node::Machine(i));
            fractional.entry(Node::Machine(i)).or_default().push(Node::Job(j));
        }
    }
    let mut seen: BTreeSet<Node> = BTreeSet::new();
    // Root each tree at its lowest machine; every job then has a parent machine
    // and at least one child machine, and takes the lowest child.
    let roots: Vec<Node> = fractional
        .keys()
        .filter(|n| matches!(n, Node::Machine(_)))
        .copied()
        .collect();
    for root in roots {
        if !seen.insert(root) {
            continue;
        }
        let mut queue = VecDeque::from([root]);
        while let Some(n) = queue.pop_front() {
            let mut children: Vec<Node> = fractional[&n]
                .iter()
                .copied()
                .filter(|m| !seen.contains(m))
                .collect();
            children.sort();
            for &c in &children {
                seen.insert(c);
                queue.push_back(c);
            }
            if let Node::Job(j) = n {
                let Some(Node::Machine(i)) = children.first().copied() else {
                    unreachable!("fractional job {j} has no child machine in its tree");
                };
                sched.assign(j, i);
            }
        }
    }
    sched
}

/// Assigns every small and medium job with plain load at most
/// `1 + max small/medium size` per machine; huge jobs stay unassigned.
pub fn seed_small_medium<S: Scalar>(
    si: &Arc<ScaledInstance<S>>,
) -> Result<Schedule<S>, Infeasible> {
    let mut fa = solve_assignment_lp(si)?;
    eliminate_cycles(&mut fa, si);
    let sched = round_forest(&fa, si);

    let p_max = si
        .job_ids()
        .filter(|&j| si.class(j) != JobClass::Huge)
        .map(|j| si.size(j).clone())
        .max()
        .unwrap_or_else(S::zero);
    let limit = S::one() + p_max;
    for j in si.job_ids() {
        match si.class(j) {
            JobClass::Huge => assert!(!sched.is_assigned(j)),
            _ => {
                let i = sched.machine_of(j).expect("small/medium job assigned");
                assert!(si.is_permitted(j, i));
            }
        }
    }
    for i in si.machine_ids() {
        assert!(
            *sched.load(i, LoadKind::Plain) <= limit,
            "seed load on {i} exceeds 1 + p_max"
        );
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_partial_schedule, Instance};
    use num_rational::BigRational;
    use proptest::prelude::*;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    fn inst(machines: usize, jobs: &[((i64, i64), &[usize])]) -> Arc<ScaledInstance<Q>> {
        let base = Instance::new(
            machines,
            jobs.iter().enumerate().map(|(k, ((n, d), ms))| {
                (format!("j{k}"), q(*n, *d), ms.iter().map(|m| MachineId(*m)).collect())
            }),
        )
        .unwrap();
        Arc::new(ScaledInstance::new(Arc::new(base), q(1, 1), q(1, 24)).unwrap())
    }

    /// Independent feasibility test: the assignment LP is a transportation
    /// problem, feasible iff every job subset fits into the unit capacities of
    /// the machines it can reach.
    fn hall_feasible(si: &ScaledInstance<Q>) -> bool {
        let jobs: Vec<JobId> = si.job_ids().filter(|&j| si.class(j) != JobClass::Huge).collect();
        (0u32..(1 << jobs.len())).all(|mask| {
            let subset: Vec<JobId> = (0..jobs.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| jobs[b])
                .collect();
            let reach: BTreeSet<MachineId> =
                subset.iter().flat_map(|j| si.permitted(*j).iter().copied()).collect();
            si.sum(&subset) <= Q::from_usize(reach.len())
        })
    }

    #[test]
    fn forced_assignment() {
        let si = inst(1, &[((1, 2), &[0])]);
        let fa = solve_assignment_lp(&si).unwrap();
        assert_eq!(fa.get(JobId(0), MachineId(0)), q(1, 1));
    }

    #[test]
    fn two_two_thirds_on_one_machine_is_infeasible() {
        let si = inst(1, &[((2, 3), &[0]), ((2, 3), &[0])]);
        assert_eq!(solve_assignment_lp(&si), Err(Infeasible));
        assert_eq!(seed_small_medium(&si).unwrap_err(), Infeasible);
        assert!(!hall_feasible(&si));
    }

    #[test]
    fn integral_input_rounds_to_itself() {
        let si = inst(2, &[((1, 2), &[0, 1]), ((1, 3), &[0, 1])]);
        let fa = FractionalAssignment::new([
            ((JobId(0), MachineId(1)), q(1, 1)),
            ((JobId(1), MachineId(0)), q(1, 1)),
        ]);
        let s = round_forest(&fa, &si);
        assert_eq!(s.machine_of(JobId(0)), Some(MachineId(1)));
        assert_eq!(s.machine_of(JobId(1)), Some(MachineId(0)));
    }

    #[test]
    fn half_half_split_over_full_machines() {
        // Each machine carries 1/6 integrally plus half of a 5/6 job. Whichever
        // way the split job rounds, the load stays within 1 + 5/6.
        let si2 = inst(2, &[((1, 6), &[0]), ((1, 6), &[1]), ((5, 6), &[0, 1])]);
        let big = JobId(2);
        let fa = FractionalAssignment::new([
            ((JobId(0), MachineId(0)), q(1, 1)),
            ((JobId(1), MachineId(1)), q(1, 1)),
            ((big, MachineId(0)), q(1, 2)),
            ((big, MachineId(1)), q(1, 2)),
        ]);
        assert!(fa.is_feasible(&si2));
        for i in [MachineId(0), MachineId(1)] {
            // Enumerate both outcomes: the bound holds for either target.
            let mut s = Schedule::empty(si2.clone());
            s.assign(JobId(0), MachineId(0));
            s.assign(JobId(1), MachineId(1));
            s.assign(big, i);
            assert!(*s.load(i, LoadKind::Plain) <= q(1, 1) + q(5, 6));
        }
        let s = round_forest(&fa, &si2);
        assert_eq!(s.machine_of(big), Some(MachineId(1)), "lowest child of the root machine");
        assert!(s.makespan() <= q(11, 6));
    }

    #[test]
    fn star_sends_at_most_one_job_to_the_centre() {
        // Centre machine 0, leaves 1..=3; job k splits between 0 and k.
        let si = inst(
            4,
            &[((1, 2), &[0, 1]), ((1, 2), &[0, 2]), ((1, 2), &[0, 3])],
        );
        for centre_share in [(1, 3), (1, 2), (2, 3)] {
            let c = q(centre_share.0, centre_share.1);
            let fa = FractionalAssignment::new((0..3).flat_map(|k| {
                [
                    ((JobId(k), MachineId(0)), c.clone()),
                    ((JobId(k), MachineId(k + 1)), q(1, 1) - &c),
                ]
            }));
            assert!(fa.is_forest());
            let s = round_forest(&fa, &si);
            assert!(s.jobs_on(MachineId(0)).len() <= 1);
            for i in 1..4 {
                assert!(s.jobs_on(MachineId(i)).len() <= 1);
            }
        }
    }

    #[test]
    fn cycle_elimination_reaches_a_forest() {
        // Two jobs, two machines, all four entries 1/2: a 4-cycle.
        let si = inst(2, &[((1, 3), &[0, 1]), ((1, 2), &[0, 1])]);
        let mut fa = FractionalAssignment::new(
            [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(j, i)| ((JobId(j), MachineId(i)), q(1, 2))),
        );
        assert!(!fa.is_forest());
        let before = fa.support_size();
        assert_eq!(eliminate_cycles(&mut fa, &si), 1);
        assert!(fa.support_size() < before);
        assert!(fa.is_forest());
        assert!(fa.is_feasible(&si));
    }

    #[test]
    fn only_huge_jobs_gives_empty_seed() {
        let si = inst(2, &[((9, 10), &[0]), ((19, 20), &[1])]);
        let s = seed_small_medium(&si).unwrap();
        assert_eq!(s.assigned_count(), 0);
        assert!(validate_partial_schedule(&s).is_empty());
    }

    #[test]
    fn single_small_job() {
        let si = inst(3, &[((1, 4), &[1, 2])]);
        let s = seed_small_medium(&si).unwrap();
        assert!(matches!(s.machine_of(JobId(0)), Some(MachineId(1 | 2))));
    }

    fn arb_instance() -> impl Strategy<Value = Vec<((i64, i64), Vec<usize>)>> {
        proptest::collection::vec(
            (1i64..=30, proptest::collection::btree_set(0usize..3, 1..=3)),
            1..=6,
        )
        .prop_map(|jobs| {
            jobs.into_iter()
                .map(|(n, ms)| ((n, 36), ms.into_iter().collect()))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn lp_agrees_with_hall_oracle(jobs in arb_instance()) {
            let base = Instance::new(
                3,
                jobs.iter().enumerate().map(|(k, ((n, d), ms))| {
                    (format!("j{k}"), q(*n, *d), ms.iter().map(|m| MachineId(*m)).collect())
                }),
            ).unwrap();
            let si = Arc::new(ScaledInstance::new(Arc::new(base), q(1, 1), q(1, 24)).unwrap());
            let oracle = hall_feasible(&si);
            match solve_assignment_lp(&si) {
                Ok(mut fa) => {
                    prop_assert!(oracle);
                    prop_assert!(fa.is_feasible(&si));
                    let covered = fa.jobs().len();
                    eliminate_cycles(&mut fa, &si);
                    prop_assert!(fa.is_forest());
                    prop_assert!(fa.is_feasible(&si));
                    prop_assert!(fa.support_size() <= covered + 3);
                    let s = seed_small_medium(&si).unwrap();
                    prop_assert!(validate_partial_schedule(&s).is_empty());
                    prop_assert!(s.makespan() <= q(11, 6));
                }
                Err(Infeasible) => prop_assert!(!oracle),
            }
        }
    }
}
