//! Brute-force ground truth for small instances.
//!
//! Every function refuses inputs above a fixed size cap instead of degrading.

use thiserror::Error;

use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{Instance, JobId, MachineId};
use crate::scalar::Scalar;

pub const KNAPSACK_CAP: usize = 30;
pub const MAKESPAN_CAP: usize = 12;
pub const CONFIG_LP_CAP: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{what}: {got} items exceed the cap of {cap}")]
pub struct CapExceeded {
    pub what: &'static str,
    pub cap: usize,
    pub got: usize,
}

fn check_cap(what: &'static str, cap: usize, got: usize) -> Result<(), CapExceeded> {
    if got > cap {
        Err(CapExceeded { what, cap, got })
    } else {
        Ok(())
    }
}

/// Maximises total value over item subsets of total weight at most
/// `capacity`. Returns the value and the chosen indices in ascending order.
pub fn knapsack_max_value<S: Scalar>(
    items: &[(S, S)],
    capacity: &S,
) -> Result<(S, Vec<usize>), CapExceeded> {
    check_cap("knapsack", KNAPSACK_CAP, items.len())?;
    let mut order: Vec<usize> = (0..items.len())
        .filter(|&k| items[k].1.is_positive() && &items[k].0 <= capacity)
        .collect();
    // Best value density first; ties by index.
    order.sort_by(|&a, &b| {
        let (wa, va) = &items[a];
        let (wb, vb) = &items[b];
        (vb.clone() * wa).cmp(&(va.clone() * wb)).then(a.cmp(&b))
    });

    struct Search<'a, S> {
        items: &'a [(S, S)],
        order: Vec<usize>,
        best: S,
        best_set: Vec<usize>,
        chosen: Vec<usize>,
    }

    impl<S: Scalar> Search<'_, S> {
        fn bound(&self, pos: usize, cap: &S, value: &S) -> S {
            let mut cap = cap.clone();
            let mut v = value.clone();
            for &k in &self.order[pos..] {
                let (w, val) = &self.items[k];
                if w <= &cap {
                    cap -= w;
                    v += val;
                } else {
                    v += val.clone() * &cap / w;
                    break;
                }
            }
            v
        }

        fn go(&mut self, pos: usize, cap: S, value: S) {
            if value > self.best {
                self.best = value.clone();
                self.best_set = self.chosen.clone();
            }
            if pos == self.order.len() || self.bound(pos, &cap, &value) <= self.best {
                return;
            }
            let k = self.order[pos];
            let (w, v) = &self.items[k];
            if w <= &cap {
                self.chosen.push(k);
                self.go(pos + 1, cap.clone() - w, value.clone() + v);
                self.chosen.pop();
            }
            self.go(pos + 1, cap, value);
        }
    }

    let mut s = Search {
        items,
        order,
        best: S::zero(),
        best_set: Vec::new(),
        chosen: Vec::new(),
    };
    s.go(0, capacity.clone(), S::zero());
    let mut set = s.best_set;
    set.sort_unstable();
    Ok((s.best, set))
}

/// Optimal makespan together with one optimal assignment (indexed by job id).
pub fn exact_optimal_schedule<S: Scalar>(
    inst: &Instance<S>,
) -> Result<(S, Vec<MachineId>), CapExceeded> {
    check_cap("exact makespan", MAKESPAN_CAP, inst.job_count())?;
    let mut jobs: Vec<JobId> = inst.job_ids().collect();
    jobs.sort_by(|a, b| inst.size(*b).cmp(inst.size(*a)).then(a.cmp(b)));

    // Greedy incumbent: largest job first onto its least loaded machine.
    let mut loads = vec![S::zero(); inst.machine_count()];
    let mut assign = vec![MachineId(0); inst.job_count()];
    for &j in &jobs {
        let &i = inst
            .permitted(j)
            .iter()
            .min_by(|a, b| loads[a.0].cmp(&loads[b.0]).then(a.cmp(b)))
            .expect("nonempty permitted set");
        loads[i.0] += inst.size(j);
        assign[j.0] = i;
    }
    let best = loads.iter().max().cloned().unwrap_or_else(S::zero);

    struct Search<'a, S> {
        inst: &'a Instance<S>,
        jobs: Vec<JobId>,
        loads: Vec<S>,
        cur: Vec<MachineId>,
        best: S,
        best_assign: Vec<MachineId>,
    }

    impl<S: Scalar> Search<'_, S> {
        fn go(&mut self, k: usize, makespan: S) {
            if k == self.jobs.len() {
                if makespan < self.best {
                    self.best = makespan;
                    self.best_assign = self.cur.clone();
                }
                return;
            }
            let j = self.jobs[k];
            let p = self.inst.size(j).clone();
            let mut seen_empty = false;
            for &i in self.inst.permitted(j) {
                // Empty machines are interchangeable only if Γ says so; skip
                // repeats only among machines that are empty right now and
                // identical in which remaining jobs they accept.
                if self.loads[i.0].is_zero() && seen_empty && self.same_as_earlier_empty(k, i) {
                    continue;
                }
                if self.loads[i.0].is_zero() {
                    seen_empty = true;
                }
                let load = self.loads[i.0].clone() + &p;
                if load >= self.best {
                    continue;
                }
                let next = if load > makespan { load.clone() } else { makespan.clone() };
                self.loads[i.0] = load;
                self.cur[j.0] = i;
                self.go(k + 1, next);
                self.loads[i.0] -= &p;
            }
        }

        /// Whether an earlier empty machine in `Γ(jobs[k])` accepts exactly the
        /// same remaining jobs as `i`.
        fn same_as_earlier_empty(&self, k: usize, i: MachineId) -> bool {
            let j = self.jobs[k];
            self.inst
                .permitted(j)
                .iter()
                .take_while(|m| **m < i)
                .filter(|m| self.loads[m.0].is_zero())
                .any(|m| {
                    self.jobs[k..]
                        .iter()
                        .all(|&r| self.inst.is_permitted(r, *m) == self.inst.is_permitted(r, i))
                })
        }
    }

    let n = inst.job_count();
    let mut s = Search {
        inst,
        jobs,
        loads: vec![S::zero(); inst.machine_count()],
        cur: vec![MachineId(0); n],
        best,
        best_assign: assign,
    };
    s.go(0, S::zero());
    Ok((s.best, s.best_assign))
}

/// Minimum over all Γ-respecting assignments of the maximum machine load.
pub fn exact_optimal_makespan<S: Scalar>(inst: &Instance<S>) -> Result<S, CapExceeded> {
    exact_optimal_schedule(inst).map(|(v, _)| v)
}

/// Inclusion-maximal job sets permitted on `i` with total size at most `t`.
pub fn maximal_configurations<S: Scalar>(inst: &Instance<S>, i: MachineId, t: &S) -> Vec<Vec<JobId>> {
    let cands: Vec<JobId> = inst
        .job_ids()
        .filter(|&j| inst.is_permitted(j, i) && inst.size(j) <= t)
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << cands.len()) {
        let mut sum = S::zero();
        let mut set = Vec::new();
        for (b, &j) in cands.iter().enumerate() {
            if mask & (1 << b) != 0 {
                sum += inst.size(j);
                set.push(j);
            }
        }
        if &sum > t {
            continue;
        }
        let maximal = cands
            .iter()
            .enumerate()
            .all(|(b, &j)| mask & (1 << b) != 0 || sum.clone() + inst.size(j) > *t);
        if maximal {
            out.push(set);
        }
    }
    out
}

/// Whether the configuration LP at makespan `t` has a solution. All maximal
/// configurations are enumerated; the covering system is solved exactly.
pub fn exact_config_lp_feasible<S: Scalar>(inst: &Instance<S>, t: &S) -> Result<bool, CapExceeded> {
    check_cap("configuration LP", CONFIG_LP_CAP, inst.job_count())?;
    if !t.is_positive() || inst.jobs().iter().any(|j| &j.size > t) {
        return Ok(false);
    }
    let mut columns: Vec<(MachineId, Vec<JobId>)> = Vec::new();
    for i in inst.machine_ids() {
        for c in maximal_configurations(inst, i, t) {
            if !c.is_empty() {
                columns.push((i, c));
            }
        }
    }
    let mut lp = LinearProgram::new(columns.len());
    for i in inst.machine_ids() {
        let coeffs: Vec<(usize, S)> = columns
            .iter()
            .enumerate()
            .filter(|(_, (m, _))| *m == i)
            .map(|(v, _)| (v, S::one()))
            .collect();
        if !coeffs.is_empty() {
            lp.add_constraint(coeffs, Relation::Le, S::one());
        }
    }
    for j in inst.job_ids() {
        let coeffs: Vec<(usize, S)> = columns
            .iter()
            .enumerate()
            .filter(|(_, (_, c))| c.contains(&j))
            .map(|(v, _)| (v, S::one()))
            .collect();
        if coeffs.is_empty() {
            return Ok(false);
        }
        lp.add_constraint(coeffs, Relation::Ge, S::one());
    }
    Ok(matches!(lp.solve(), LpOutcome::Optimal(_)))
}
