use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use super::{classify_job, rounded_sizes, JobClass, JobId, MachineId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("instance has no machines")]
    NoMachines,
    #[error("job `{0}` has an empty permitted set")]
    EmptyPermittedSet(String),
    #[error("job `{0}` has a nonpositive size")]
    NonPositiveSize(String),
    #[error("job `{job}` names machine {machine}, but there are only {machines} machines")]
    MachineOutOfRange {
        job: String,
        machine: usize,
        machines: usize,
    },
    #[error("duplicate job name `{0}`")]
    DuplicateJob(String),
    #[error("epsilon must lie strictly between 0 and 1/12")]
    EpsilonOutOfRange,
    #[error("guess must be positive")]
    NonPositiveGuess,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job<S> {
    /// Name as written in the instance file.
    pub name: String,
    /// Position of the job in the file, used to restore the original order.
    pub original_index: usize,
    pub size: S,
    /// Permitted machines, sorted and free of duplicates.
    pub permitted: Vec<MachineId>,
}

/// A Restricted Assignment instance. Jobs are stored sorted by
/// `(size, original_index)`, so `JobId(0)` is the smallest job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance<S> {
    machines: usize,
    jobs: Vec<Job<S>>,
}

impl<S: Scalar> Instance<S> {
    /// Builds an instance from `(name, size, permitted machines)` triples given
    /// in file order. Machine ids are 0-based here.
    pub fn new(
        machines: usize,
        jobs: impl IntoIterator<Item = (String, S, Vec<MachineId>)>,
    ) -> Result<Self, ModelError> {
        if machines == 0 {
            return Err(ModelError::NoMachines);
        }
        let mut names = BTreeSet::new();
        let mut out = Vec::new();
        for (idx, (name, size, permitted)) in jobs.into_iter().enumerate() {
            if !names.insert(name.clone()) {
                return Err(ModelError::DuplicateJob(name));
            }
            if !size.is_positive() {
                return Err(ModelError::NonPositiveSize(name));
            }
            if permitted.is_empty() {
                return Err(ModelError::EmptyPermittedSet(name));
            }
            if let Some(bad) = permitted.iter().find(|m| m.0 >= machines) {
                return Err(ModelError::MachineOutOfRange {
                    job: name,
                    machine: bad.number(),
                    machines,
                });
            }
            let permitted: Vec<MachineId> = permitted
                .into_iter()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            out.push(Job {
                name,
                original_index: idx,
                size,
                permitted,
            });
        }
        out.sort_by(|a, b| {
            a.size
                .cmp(&b.size)
                .then(a.original_index.cmp(&b.original_index))
        });
        Ok(Instance { machines, jobs: out })
    }

    pub fn machine_count(&self) -> usize {
        self.machines
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn machine_ids(&self) -> impl Iterator<Item = MachineId> + '_ {
        (0..self.machines).map(MachineId)
    }

    pub fn job_ids(&self) -> impl Iterator<Item = JobId> + '_ {
        (0..self.jobs.len()).map(JobId)
    }

    pub fn job(&self, j: JobId) -> &Job<S> {
        &self.jobs[j.0]
    }

    pub fn jobs(&self) -> &[Job<S>] {
        &self.jobs
    }

    pub fn size(&self, j: JobId) -> &S {
        &self.jobs[j.0].size
    }

    pub fn permitted(&self, j: JobId) -> &[MachineId] {
        &self.jobs[j.0].permitted
    }

    pub fn is_permitted(&self, j: JobId, i: MachineId) -> bool {
        self.jobs[j.0].permitted.binary_search(&i).is_ok()
    }

    /// Jobs in file order.
    pub fn original_order(&self) -> Vec<JobId> {
        let mut ids: Vec<JobId> = self.job_ids().collect();
        ids.sort_by_key(|j| self.jobs[j.0].original_index);
        ids
    }

    pub fn job_by_name(&self, name: &str) -> Option<JobId> {
        self.jobs.iter().position(|j| j.name == name).map(JobId)
    }

    pub fn total_size(&self) -> S {
        self.jobs.iter().fold(S::zero(), |acc, j| acc + &j.size)
    }

    pub fn max_size(&self) -> S {
        self.jobs
            .last()
            .map(|j| j.size.clone())
            .unwrap_or_else(S::zero)
    }
}

/// An instance viewed at makespan guess `T`: every size divided by `T`, plus
/// the derived classes, rounded sizes and the load bound `1 + R`.
#[derive(Debug, Clone)]
pub struct ScaledInstance<S> {
    base: Arc<Instance<S>>,
    guess: S,
    epsilon: S,
    r: S,
    bound: S,
    sizes: Vec<S>,
    up: Vec<S>,
    down: Vec<S>,
    classes: Vec<JobClass>,
}

impl<S: Scalar> ScaledInstance<S> {
    pub fn new(base: Arc<Instance<S>>, guess: S, epsilon: S) -> Result<Self, ModelError> {
        if !guess.is_positive() {
            return Err(ModelError::NonPositiveGuess);
        }
        if !epsilon.is_positive() || epsilon >= S::from_frac(1, 12) {
            return Err(ModelError::EpsilonOutOfRange);
        }
        let sizes: Vec<S> = base.jobs.iter().map(|j| j.size.clone() / &guess).collect();
        let (up, down): (Vec<S>, Vec<S>) = sizes.iter().map(rounded_sizes).unzip();
        let classes = sizes.iter().map(classify_job).collect();
        let r = S::from_frac(5, 6) + epsilon.clone() * S::from_int(2);
        let bound = S::one() + &r;
        Ok(ScaledInstance {
            base,
            guess,
            epsilon,
            r,
            bound,
            sizes,
            up,
            down,
            classes,
        })
    }

    pub fn base(&self) -> &Arc<Instance<S>> {
        &self.base
    }

    pub fn guess(&self) -> &S {
        &self.guess
    }

    pub fn epsilon(&self) -> &S {
        &self.epsilon
    }

    /// `R = 5/6 + 2 epsilon`.
    pub fn r(&self) -> &S {
        &self.r
    }

    /// `1 + R`, the per-machine load limit of a valid partial schedule.
    pub fn bound(&self) -> &S {
        &self.bound
    }

    pub fn machine_count(&self) -> usize {
        self.base.machine_count()
    }

    pub fn job_count(&self) -> usize {
        self.base.job_count()
    }

    pub fn machine_ids(&self) -> impl Iterator<Item = MachineId> + '_ {
        self.base.machine_ids()
    }

    pub fn job_ids(&self) -> impl Iterator<Item = JobId> + '_ {
        self.base.job_ids()
    }

    pub fn size(&self, j: JobId) -> &S {
        &self.sizes[j.0]
    }

    pub fn size_up(&self, j: JobId) -> &S {
        &self.up[j.0]
    }

    pub fn size_down(&self, j: JobId) -> &S {
        &self.down[j.0]
    }

    pub fn class(&self, j: JobId) -> JobClass {
        self.classes[j.0]
    }

    pub fn permitted(&self, j: JobId) -> &[MachineId] {
        self.base.permitted(j)
    }

    pub fn is_permitted(&self, j: JobId, i: MachineId) -> bool {
        self.base.is_permitted(j, i)
    }

    pub fn jobs_of_class(&self, class: JobClass) -> impl Iterator<Item = JobId> + '_ {
        self.job_ids().filter(move |&j| self.classes[j.0] == class)
    }

    /// Sum of plain scaled sizes over a set of jobs.
    pub fn sum<'a>(&self, jobs: impl IntoIterator<Item = &'a JobId>) -> S {
        jobs.into_iter()
            .fold(S::zero(), |acc, j| acc + &self.sizes[j.0])
    }

    pub fn sum_down<'a>(&self, jobs: impl IntoIterator<Item = &'a JobId>) -> S {
        jobs.into_iter().fold(S::zero(), |acc, j| acc + &self.down[j.0])
    }
}
