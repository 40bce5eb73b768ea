use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{BlockerKind, BlockerTree};
use crate::model::Schedule;
use crate::scalar::Scalar;

/// Per-layer 5-tuples, one component per sublayer, compared lexicographically
/// with missing trailing entries read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureVector(pub Vec<[u64; 5]>);

impl SignatureVector {
    pub fn layers(&self) -> &[[u64; 5]] {
        &self.0
    }

    fn flat(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().flatten().copied()
    }
}

impl Ord for SignatureVector {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut a, mut b) = (self.flat(), other.flat());
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (x, y) => match x.unwrap_or(0).cmp(&y.unwrap_or(0)) {
                    Ordering::Equal => continue,
                    o => return o,
                },
            }
        }
    }
}

impl PartialOrd for SignatureVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `s_k = (Σ_BB |J|-|H_i|, Σ_MS∪BS |J|-|σ⁻¹(i)|, Σ_S |J|-|σ⁻¹(i)|,
/// Σ_M min M_i, Σ_MM |J|-|M_i|)` over the blockers of layer `k`, for
/// `k = 1..=last layer`. `min M_i` is the 1-based job number, 0 if `M_i` is
/// empty.
pub fn signature_vector<S: Scalar>(tree: &BlockerTree, s: &Schedule<S>) -> SignatureVector {
    let n = s.instance().job_count() as u64;
    let mut out = vec![[0u64; 5]; tree.last_layer()];
    for b in tree.blockers() {
        let i = b.machine;
        let (slot, value) = match b.kind {
            BlockerKind::BB => (0, n - s.huge_on(i).len() as u64),
            BlockerKind::BS | BlockerKind::MS => (1, n - s.jobs_on(i).len() as u64),
            BlockerKind::S => (2, n - s.jobs_on(i).len() as u64),
            BlockerKind::M => (3, s.min_medium(i).map_or(0, |j| j.number() as u64)),
            BlockerKind::MM => (4, n - s.medium_on(i).len() as u64),
        };
        out[b.layer - 1][slot] += value;
    }
    SignatureVector(out)
}

/// Checks that the signature strictly increases between checkpoints: after
/// every added blocker and at the end of every maximal run of moves.
///
/// Two counts are kept. `literal_violations` compares every checkpoint with
/// the one before it. `deferred_violations` only looks at runs of moves that
/// did not raise the signature themselves, and counts one if the blocker added
/// right after the run does not exceed the signature from before the run.
#[derive(Debug, Clone)]
pub struct SignatureMonitor {
    last: SignatureVector,
    before_run: Option<SignatureVector>,
    in_run: bool,
    pending: bool,
    report: MonitorReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub checkpoints: u64,
    pub literal_violations: u64,
    pub deferred_violations: u64,
    /// Checkpoint numbers (1-based) of the literal violations, capped at 32.
    pub literal_at: Vec<u64>,
}

impl Default for SignatureMonitor {
    fn default() -> Self {
        SignatureMonitor {
            last: SignatureVector::default(),
            before_run: None,
            in_run: false,
            pending: false,
            report: MonitorReport::default(),
        }
    }
}

impl SignatureMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    fn checkpoint(&mut self, sig: SignatureVector) {
        self.report.checkpoints += 1;
        if sig <= self.last {
            self.report.literal_violations += 1;
            if self.report.literal_at.len() < 32 {
                self.report.literal_at.push(self.report.checkpoints);
            }
        }
        self.last = sig;
    }

    /// A move was executed and `j_new` is still unassigned.
    pub fn on_move(&mut self) {
        if !self.in_run {
            self.in_run = true;
            self.before_run = Some(self.last.clone());
        }
    }

    /// Closes the current run of moves, if any, at the state `sig`.
    pub fn end_run(&mut self, sig: SignatureVector) {
        if !self.in_run {
            return;
        }
        self.in_run = false;
        self.pending = sig <= self.last;
        self.checkpoint(sig);
    }

    /// A blocker was added; `before` is the state prior to the addition and
    /// `after` the state following it.
    pub fn on_add(&mut self, before: SignatureVector, after: SignatureVector) {
        self.end_run(before);
        if self.pending {
            self.pending = false;
            let base = self.before_run.take().unwrap_or_default();
            if after <= base {
                self.report.deferred_violations += 1;
            }
        }
        self.checkpoint(after);
    }

    /// `j_new` was placed; the run in progress ends without a checkpoint.
    pub fn on_done(&mut self) {
        self.in_run = false;
    }

    pub fn report(&self) -> &MonitorReport {
        &self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Parent;
    use crate::model::{Instance, JobId, MachineId, ScaledInstance};
    use num_rational::BigRational;
    use std::sync::Arc;

    type Q = BigRational;

    fn sv(v: &[[u64; 5]]) -> SignatureVector {
        SignatureVector(v.to_vec())
    }

    #[test]
    fn lexicographic_with_zero_padding() {
        assert!(sv(&[[1, 0, 0, 0, 0]]) > sv(&[]));
        assert_eq!(sv(&[[1, 0, 0, 0, 0], [0; 5]]).cmp(&sv(&[[1, 0, 0, 0, 0]])), Ordering::Equal);
        assert!(sv(&[[0, 2, 0, 0, 0]]) < sv(&[[1, 0, 0, 0, 0]]));
        assert!(sv(&[[1, 0, 0, 0, 0], [0, 0, 0, 0, 1]]) > sv(&[[1, 0, 0, 0, 0]]));
        assert!(sv(&[[1, 0, 0, 0, 0], [3, 0, 0, 0, 0]]) < sv(&[[1, 0, 0, 1, 0]]));
    }

    fn schedule(sizes: &[(i64, i64)], m: usize) -> Schedule<Q> {
        let base = Instance::new(
            m,
            sizes.iter().enumerate().map(|(k, (n, d))| {
                (format!("j{k}"), Q::from_frac(*n, *d), (0..m).map(MachineId).collect())
            }),
        )
        .unwrap();
        Schedule::empty(Arc::new(
            ScaledInstance::new(Arc::new(base), Q::from_int(1), Q::from_frac(1, 24)).unwrap(),
        ))
    }

    #[test]
    fn empty_tree_has_empty_signature() {
        let s = schedule(&[(9, 10)], 1);
        assert_eq!(signature_vector(&BlockerTree::new(JobId(0)), &s), sv(&[]));
    }

    #[test]
    fn one_bb_blocker() {
        // Five jobs, one huge job h on m0, j_new another huge job.
        let mut s = schedule(&[(1, 10), (1, 10), (1, 10), (9, 10), (19, 20)], 2);
        s.assign(JobId(3), MachineId(0));
        let mut t = BlockerTree::new(JobId(4));
        t.push_unchecked(JobId(4), MachineId(0), BlockerKind::BB, 1, Parent::Root);
        assert_eq!(signature_vector(&t, &s), sv(&[[4, 0, 0, 0, 0]]));
    }

    #[test]
    fn m_blocker_uses_min_medium_number() {
        // Mediums are jobs 3 and 8 (1-based) on m0.
        let mut s = schedule(
            &[(1, 10), (1, 10), (3, 5), (1, 5), (1, 5), (1, 5), (1, 5), (2, 3), (9, 10)],
            2,
        );
        // Sorted: 1/10 x2 (j1, j2), 1/5 x4 (j3..j6), 3/5 (j7), 2/3 (j8), 9/10 (j9).
        s.assign(JobId(6), MachineId(0));
        s.assign(JobId(7), MachineId(0));
        let mut t = BlockerTree::new(JobId(8));
        t.push_unchecked(JobId(8), MachineId(0), BlockerKind::M, 1, Parent::Root);
        assert_eq!(signature_vector(&t, &s).layers()[0][3], 7);
    }

    #[test]
    fn monitor_counts_both_forms() {
        let mut m = SignatureMonitor::new();
        m.on_add(sv(&[]), sv(&[[5, 0, 0, 0, 0]]));
        m.on_move();
        // The run drops the signature: a literal violation.
        m.on_add(sv(&[[1, 0, 0, 0, 0]]), sv(&[[6, 0, 0, 0, 0]]));
        assert_eq!(m.report().literal_violations, 1);
        assert_eq!(m.report().deferred_violations, 0);
        m.on_move();
        m.on_add(sv(&[[2, 0, 0, 0, 0]]), sv(&[[3, 0, 0, 0, 0]]));
        assert_eq!(m.report().literal_violations, 2);
        assert_eq!(m.report().deferred_violations, 1);
        assert_eq!(m.report().checkpoints, 5);
    }
}
