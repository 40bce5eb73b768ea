use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{Instance, JobId, MachineId};
use crate::oracle::knapsack_max_value;
use crate::scalar::Scalar;

const MAX_ROUNDS: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigLpAnswer {
    Feasible,
    Infeasible,
    /// Pricing hit the knapsack cap or the round limit.
    Unresolved(String),
}

/// `lower <= OPT* <= upper`, where `OPT*` is the least `T` at which the
/// configuration LP is feasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpBound<S> {
    pub lower: S,
    pub upper: S,
    pub resolved: bool,
    pub probes: usize,
}

/// Phase-one column generation: minimise the total slack `u` of the job
/// covering rows. The LP is feasible iff the optimum is zero.
pub fn config_lp_feasible_at<S: Scalar>(inst: &Instance<S>, t: &S) -> ConfigLpAnswer {
    if !t.is_positive() || inst.jobs().iter().any(|j| &j.size > t) {
        return ConfigLpAnswer::Infeasible;
    }
    let n = inst.job_count();
    let mut columns: Vec<(MachineId, Vec<JobId>)> = Vec::new();
    for j in inst.job_ids() {
        for &i in inst.permitted(j) {
            columns.push((i, vec![j]));
        }
    }
    for _ in 0..MAX_ROUNDS {
        let mut lp = LinearProgram::new(n + columns.len());
        for j in 0..n {
            lp.set_objective(j, S::one());
        }
        let mut machine_row = vec![None; inst.machine_count()];
        for i in inst.machine_ids() {
            let coeffs: Vec<(usize, S)> = columns
                .iter()
                .enumerate()
                .filter(|(_, (m, _))| *m == i)
                .map(|(v, _)| (n + v, S::one()))
                .collect();
            if !coeffs.is_empty() {
                machine_row[i.0] = Some(lp.add_constraint(coeffs, Relation::Le, S::one()));
            }
        }
        let mut job_row = Vec::with_capacity(n);
        for j in inst.job_ids() {
            let mut coeffs = vec![(j.0, S::one())];
            coeffs.extend(
                columns
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, c))| c.contains(&j))
                    .map(|(v, _)| (n + v, S::one())),
            );
            job_row.push(lp.add_constraint(coeffs, Relation::Ge, S::one()));
        }
        let sol = match lp.solve() {
            LpOutcome::Optimal(sol) => sol,
            other => unreachable!("phase-one master is feasible and bounded: {other:?}"),
        };
        if sol.objective.is_zero() {
            return ConfigLpAnswer::Feasible;
        }
        let pi: Vec<&S> = job_row.iter().map(|&r| &sol.duals[r]).collect();
        let mut added = false;
        for i in inst.machine_ids() {
            let mu = machine_row[i.0].map_or(S::zero(), |r| sol.duals[r].clone());
            let jobs: Vec<JobId> = inst
                .job_ids()
                .filter(|&j| inst.is_permitted(j, i) && pi[j.0].is_positive())
                .collect();
            let items: Vec<(S, S)> = jobs
                .iter()
                .map(|j| (inst.size(*j).clone(), pi[j.0].clone()))
                .collect();
            let (best, set) = match knapsack_max_value(&items, t) {
                Ok(r) => r,
                Err(e) => return ConfigLpAnswer::Unresolved(e.to_string()),
            };
            if best > -mu {
                let col: Vec<JobId> = set.into_iter().map(|k| jobs[k]).collect();
                if !columns.iter().any(|(m, c)| *m == i && *c == col) {
                    columns.push((i, col));
                    added = true;
                }
            }
        }
        if !added {
            // No column prices out, so the positive phase-one optimum stands.
            return ConfigLpAnswer::Infeasible;
        }
    }
    ConfigLpAnswer::Unresolved(format!("no convergence after {MAX_ROUNDS} pricing rounds"))
}

/// Brackets `OPT*` to within a factor `1 + tol`, starting from
/// `max(p_max, Σp/m)` and bisecting towards `Σp`.
pub fn config_lp_lower_bound<S: Scalar>(inst: &Instance<S>, tol: &S) -> LpBound<S> {
    let total = inst.total_size();
    let avg = total.clone() / S::from_usize(inst.machine_count());
    let lb = inst.max_size().max(avg);
    let mut probes = 1;
    match config_lp_feasible_at(inst, &lb) {
        ConfigLpAnswer::Feasible => {
            return LpBound {
                lower: lb.clone(),
                upper: lb,
                resolved: true,
                probes,
            }
        }
        ConfigLpAnswer::Infeasible => {}
        ConfigLpAnswer::Unresolved(_) => {
            return LpBound {
                lower: lb,
                upper: total,
                resolved: false,
                probes,
            }
        }
    }
    let (mut lo, mut hi) = (lb, total);
    let target = S::one() + tol;
    let two = S::from_int(2);
    while hi.clone() > lo.clone() * &target {
        let mid = (lo.clone() + &hi) / &two;
        probes += 1;
        match config_lp_feasible_at(inst, &mid) {
            ConfigLpAnswer::Feasible => hi = mid,
            ConfigLpAnswer::Infeasible => lo = mid,
            ConfigLpAnswer::Unresolved(_) => {
                return LpBound {
                    lower: lo,
                    upper: hi,
                    resolved: false,
                    probes,
                }
            }
        }
    }
    LpBound {
        lower: lo,
        upper: hi,
        resolved: true,
        probes,
    }
}
