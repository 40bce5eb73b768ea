//! Dual solutions of the configuration LP that witness `OPT* > T` when an
//! insertion run gets stuck, plus configuration-LP bounds by column
//! generation.

mod config_lp;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BlockerKind, BlockerTree, StuckState, TreeView};
use crate::model::{Instance, JobClass, JobId, MachineId, ScaledInstance, Schedule};
use crate::oracle::{knapsack_max_value, CapExceeded};
use crate::scalar::{parse_scalar, Scalar};

pub use config_lp::{config_lp_feasible_at, config_lp_lower_bound, ConfigLpAnswer, LpBound};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

/// `(z, y)` in scaled units (sizes divided by `guess`), together with the
/// per-machine offsets `w` and the layer that fixed each `z_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualCertificate<S> {
    pub guess: S,
    pub epsilon: S,
    pub delta: S,
    pub k_max: usize,
    pub j_new: JobId,
    pub z: Vec<S>,
    pub z_layer: Vec<Option<usize>>,
    pub w: Vec<S>,
    pub y: Vec<S>,
    pub transcript: Vec<Record>,
}

fn power<S: Scalar>(base: &S, k: usize) -> S {
    (0..k).fold(S::one(), |acc, _| acc * base)
}

/// Builds the certificate from a stuck state.
pub fn build_dual_certificate<S: Scalar>(stuck: &StuckState<S>) -> DualCertificate<S> {
    build_from_parts(&stuck.tree, &stuck.schedule, stuck.k_max)
}

/// `z_j = δ^k p⁻_j` for active `j`, where `k` is the least layer in which `j`
/// is headed or blocked (1 for jobs blocked by the empty tree); `w_i` is
/// `z(A_i)` shifted by `+δ^k/6` on BS machines and `-δ^k/6` on S machines of
/// layer `k`; `y_i = δ^K + w_i`.
pub fn build_from_parts<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    k_max: usize,
) -> DualCertificate<S> {
    let si = s.instance();
    let view = TreeView::new(tree, s);
    let delta = S::one() - si.epsilon();
    let n = si.job_count();
    let top = tree.last_layer().max(1);
    let blocked_by_layer: Vec<BTreeSet<JobId>> =
        (1..=top).map(|k| view.blocked_small_jobs(Some(k))).collect();

    let mut z = vec![S::zero(); n];
    let mut z_layer = vec![None; n];
    for j in view.active_jobs() {
        let blocked = blocked_by_layer.iter().position(|b| b.contains(&j)).map(|p| p + 1);
        let k = match (view.head_layer(j), blocked) {
            (Some(a), Some(b)) => a.min(b),
            (a, b) => a.or(b).expect("active job is headed or blocked"),
        };
        z[j.0] = power(&delta, k) * si.size_down(j);
        z_layer[j.0] = Some(k);
    }

    let sixth = S::from_frac(1, 6);
    let mut w = Vec::with_capacity(si.machine_count());
    for i in si.machine_ids() {
        let mut wi = s
            .jobs_on(i)
            .iter()
            .fold(S::zero(), |acc, j| acc + &z[j.0]);
        for b in tree.blockers().iter().filter(|b| b.machine == i) {
            match b.kind {
                BlockerKind::BS => wi += power(&delta, b.layer) * &sixth,
                BlockerKind::S => wi -= power(&delta, b.layer) * &sixth,
                _ => {}
            }
        }
        w.push(wi);
    }
    let dk = power(&delta, k_max);
    let y = w.iter().map(|wi| dk.clone() + wi).collect();

    DualCertificate {
        guess: si.guess().clone(),
        epsilon: si.epsilon().clone(),
        delta,
        k_max,
        j_new: tree.j_new(),
        z,
        z_layer,
        w,
        y,
        transcript: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveCheck<S> {
    pub passed: bool,
    pub z_total: S,
    pub y_total: S,
}

/// `Σ z_j > Σ y_i`, exactly.
pub fn verify_objective_negative<S: Scalar>(c: &DualCertificate<S>) -> ObjectiveCheck<S> {
    let z_total = c.z.iter().fold(S::zero(), |a, v| a + v);
    let y_total = c.y.iter().fold(S::zero(), |a, v| a + v);
    ObjectiveCheck {
        passed: z_total > y_total,
        z_total,
        y_total,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineWitness<S> {
    pub machine: MachineId,
    /// `max z(C)` over configurations of `machine`.
    pub best: S,
    pub y: S,
    pub configuration: Vec<JobId>,
}

impl<S: Scalar> MachineWitness<S> {
    pub fn holds(&self) -> bool {
        self.best <= self.y
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityCheck<S> {
    pub passed: bool,
    pub machines: Vec<MachineWitness<S>>,
}

impl<S: Scalar> FeasibilityCheck<S> {
    pub fn violations(&self) -> impl Iterator<Item = &MachineWitness<S>> {
        self.machines.iter().filter(|w| !w.holds())
    }
}

/// For every machine, the heaviest configuration under `z` (capacity 1 in
/// scaled sizes) must not exceed `y_i`.
pub fn verify_dual_feasibility<S: Scalar>(
    c: &DualCertificate<S>,
    si: &ScaledInstance<S>,
) -> Result<FeasibilityCheck<S>, CapExceeded> {
    let machines: Vec<MachineWitness<S>> = si
        .machine_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let jobs: Vec<JobId> = si
                .job_ids()
                .filter(|&j| si.is_permitted(j, i) && c.z[j.0].is_positive())
                .collect();
            let items: Vec<(S, S)> = jobs
                .iter()
                .map(|j| (si.size(*j).clone(), c.z[j.0].clone()))
                .collect();
            let (best, set) = knapsack_max_value(&items, &S::one())?;
            Ok(MachineWitness {
                machine: i,
                best,
                y: c.y[i.0].clone(),
                configuration: set.into_iter().map(|k| jobs[k]).collect(),
            })
        })
        .collect::<Result<_, CapExceeded>>()?;
    Ok(FeasibilityCheck {
        passed: machines.iter().all(|w| w.holds()),
        machines,
    })
}

/// Per layer `k`: `(k, |M(BS^k)|, |M(S^k)|)`.
pub fn claim1_counts(tree: &BlockerTree) -> Vec<(usize, usize, usize)> {
    (1..=tree.last_layer())
        .map(|k| {
            (
                k,
                tree.machines_in_layer(BlockerKind::BS, k).len(),
                tree.machines_in_layer(BlockerKind::S, k).len(),
            )
        })
        .collect()
}

/// `|M(BS^k)| <= |M(S^k)|` for every layer.
pub fn check_claim1_ratio(tree: &BlockerTree) -> bool {
    claim1_counts(tree).iter().all(|(_, bs, s)| bs <= s)
}

/// Direct checks of the two per-machine inequalities the feasibility proof
/// relies on. Returns one message per failure.
///
/// Big `k`-headed `j` and `i ∈ Γ(j)` outside `M(S ∪ MS ∪ BS)^(<=k)`, `i ≠ σ(j)`:
/// `z_j <= z(A_i^(<=k) \ C)` for every configuration `C ∋ j` of `i`.
///
/// `i` on an S, MS or BS blocker of layer `k`:
/// `w_i >= z(A_i) + δ^k (1 - δ p⁻(A_i))`.
pub fn audit_claims<S: Scalar>(
    tree: &BlockerTree,
    s: &Schedule<S>,
    c: &DualCertificate<S>,
) -> Result<Vec<String>, CapExceeded> {
    let si = s.instance();
    let view = TreeView::new(tree, s);
    let mut out = Vec::new();
    let active = view.active_jobs();
    for k in 1..=tree.last_layer().min(c.k_max) {
        let covered = tree.blocking_machines(Some(k));
        let active_k = view.active_jobs_upto(k);
        for &j in &active {
            if si.class(j) == JobClass::Small || view.head_layer(j) != Some(k) {
                continue;
            }
            let cap = S::one() - si.size(j);
            if cap.is_negative() {
                continue;
            }
            for &i in si.permitted(j) {
                if Some(i) == s.machine_of(j) || covered.contains(&i) {
                    continue;
                }
                let a_i: Vec<JobId> = s
                    .jobs_on(i)
                    .iter()
                    .copied()
                    .filter(|x| active_k.contains(x))
                    .collect();
                let total = a_i.iter().fold(S::zero(), |a, x| a + &c.z[x.0]);
                let items: Vec<(S, S)> = a_i
                    .iter()
                    .map(|x| (si.size(*x).clone(), c.z[x.0].clone()))
                    .collect();
                let (inside, _) = knapsack_max_value(&items, &cap)?;
                if c.z[j.0] > total.clone() - &inside {
                    out.push(format!(
                        "claim 2: z({j}) = {} > z(A_{i} \\ C) = {} at layer {k}",
                        c.z[j.0],
                        total - inside
                    ));
                }
            }
        }
    }
    for k in 1..=tree.last_layer() {
        let dk = power(&c.delta, k);
        let machines: BTreeSet<MachineId> = tree
            .in_layer(k)
            .filter(|b| b.kind.blocks_all())
            .map(|b| b.machine)
            .collect();
        for i in machines {
            let a_i: Vec<JobId> = s
                .jobs_on(i)
                .iter()
                .copied()
                .filter(|x| active.contains(x))
                .collect();
            let z_a = a_i.iter().fold(S::zero(), |a, x| a + &c.z[x.0]);
            let down = si.sum_down(&a_i);
            let rhs = z_a + dk.clone() * (S::one() - c.delta.clone() * down);
            if c.w[i.0] < rhs {
                out.push(format!("claim 3: w({i}) = {} < {} at layer {k}", c.w[i.0], rhs));
            }
        }
    }
    Ok(out)
}

impl<S: Scalar> DualCertificate<S> {
    /// `(α z, α y)` with `w` scaled alike.
    pub fn scaled(&self, alpha: &S) -> Self {
        let mul = |v: &Vec<S>| v.iter().map(|x| x.clone() * alpha).collect();
        DualCertificate {
            z: mul(&self.z),
            w: mul(&self.w),
            y: mul(&self.y),
            transcript: Vec::new(),
            ..self.clone()
        }
    }

    /// Runs both checks, appends them to the transcript and returns whether
    /// both passed.
    pub fn verify(&mut self, si: &ScaledInstance<S>) -> Result<bool, CapExceeded> {
        let obj = verify_objective_negative(self);
        self.transcript.push(Record {
            check: "objective".into(),
            passed: obj.passed,
            detail: format!(
                "sum z = {} vs sum y = {}",
                obj.z_total.to_frac_string(),
                obj.y_total.to_frac_string()
            ),
        });
        let feas = verify_dual_feasibility(self, si)?;
        for w in &feas.machines {
            let names: Vec<String> = w.configuration.iter().map(|j| si.base().job(*j).name.clone()).collect();
            self.transcript.push(Record {
                check: format!("feasibility m{}", w.machine.number()),
                passed: w.holds(),
                detail: format!(
                    "max z(C) = {} with C = {{{}}}, y = {}",
                    w.best.to_frac_string(),
                    names.join(", "),
                    w.y.to_frac_string()
                ),
            });
        }
        Ok(obj.passed && feas.passed)
    }

    pub fn to_doc(&self, inst: &Instance<S>) -> CertificateDoc {
        CertificateDoc {
            guess: self.guess.to_frac_string(),
            epsilon: self.epsilon.to_frac_string(),
            delta: self.delta.to_frac_string(),
            k_max: self.k_max,
            j_new: inst.job(self.j_new).name.clone(),
            z: inst
                .job_ids()
                .map(|j| JobValue {
                    job: inst.job(j).name.clone(),
                    layer: self.z_layer[j.0],
                    value: self.z[j.0].to_frac_string(),
                })
                .collect(),
            w: machine_values(&self.w),
            y: machine_values(&self.y),
            transcript: self.transcript.clone(),
        }
    }

    pub fn to_json(&self, inst: &Instance<S>) -> String {
        serde_json::to_string_pretty(&self.to_doc(inst)).expect("certificate serializes")
    }

    pub fn from_doc(doc: &CertificateDoc, inst: &Instance<S>) -> Result<Self, CertificateError> {
        let num = |field: &str, text: &str| -> Result<S, CertificateError> {
            parse_scalar(text).ok_or_else(|| CertificateError::BadNumber(field.into(), text.into()))
        };
        let job = |name: &str| {
            inst.job_by_name(name)
                .ok_or_else(|| CertificateError::UnknownJob(name.into()))
        };
        let n = inst.job_count();
        let m = inst.machine_count();
        let mut z = vec![S::zero(); n];
        let mut z_layer = vec![None; n];
        for e in &doc.z {
            let j = job(&e.job)?;
            z[j.0] = num("z", &e.value)?;
            z_layer[j.0] = e.layer;
        }
        let per_machine = |field: &str, entries: &[MachineValue]| -> Result<Vec<S>, CertificateError> {
            if entries.len() != m {
                return Err(CertificateError::Shape(field.into()));
            }
            let mut out = vec![S::zero(); m];
            for e in entries {
                if e.machine == 0 || e.machine > m {
                    return Err(CertificateError::Shape(field.into()));
                }
                out[e.machine - 1] = num(field, &e.value)?;
            }
            Ok(out)
        };
        Ok(DualCertificate {
            guess: num("guess", &doc.guess)?,
            epsilon: num("epsilon", &doc.epsilon)?,
            delta: num("delta", &doc.delta)?,
            k_max: doc.k_max,
            j_new: job(&doc.j_new)?,
            z,
            z_layer,
            w: per_machine("w", &doc.w)?,
            y: per_machine("y", &doc.y)?,
            transcript: doc.transcript.clone(),
        })
    }

    pub fn from_json(text: &str, inst: &Instance<S>) -> Result<Self, CertificateError> {
        let doc: CertificateDoc = serde_json::from_str(text).map_err(|e| CertificateError::Json(e.to_string()))?;
        Self::from_doc(&doc, inst)
    }
}

fn machine_values<S: Scalar>(v: &[S]) -> Vec<MachineValue> {
    v.iter()
        .enumerate()
        .map(|(k, x)| MachineValue {
            machine: k + 1,
            value: x.to_frac_string(),
        })
        .collect()
}

/// Serialized certificate. Rationals are `num/den` strings; jobs are named,
/// machines numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub guess: String,
    pub epsilon: String,
    pub delta: String,
    pub k_max: usize,
    pub j_new: String,
    pub z: Vec<JobValue>,
    pub w: Vec<MachineValue>,
    pub y: Vec<MachineValue>,
    pub transcript: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobValue {
    pub job: String,
    pub layer: Option<usize>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineValue {
    pub machine: usize,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Json(String),
    #[error("field `{0}`: bad rational `{1}`")]
    BadNumber(String, String),
    #[error("certificate names unknown job `{0}`")]
    UnknownJob(String),
    #[error("field `{0}` does not match the instance's machines")]
    Shape(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{insert_huge_job, EngineConfig, InsertError, Parent};
    use num_rational::BigRational;
    use std::sync::Arc;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    fn stuck_fixture() -> StuckState<Q> {
        let base = Instance::new(
            1,
            (0..3)
                .map(|k| (format!("s{k}"), q(7, 20), vec![MachineId(0)]))
                .chain([("h".to_string(), q(9, 10), vec![MachineId(0)])]),
        )
        .unwrap();
        let si = Arc::new(ScaledInstance::new(Arc::new(base), q(1, 1), q(1, 24)).unwrap());
        let mut s = Schedule::empty(si);
        for j in 0..3 {
            s.assign(JobId(j), MachineId(0));
        }
        match insert_huge_job(s, JobId(3), EngineConfig::default()) {
            Err(InsertError::Stuck(st)) => *st,
            other => panic!("fixture must get stuck: {other:?}"),
        }
    }

    #[test]
    fn three_small_jobs_certificate() {
        let st = stuck_fixture();
        let mut c = build_dual_certificate(&st);
        let d = q(23, 24);
        // Jobs blocked under the empty tree get layer 1; j_new is 1-headed.
        assert_eq!(c.z[3], d.clone() * q(5, 6));
        assert_eq!(c.z[0], d.clone() * q(7, 20));
        assert_eq!(c.z_layer, vec![Some(1); 4]);
        assert_eq!(c.w[0], d.clone() * q(21, 20));
        assert_eq!(c.y[0], power(&d, 48) + &c.w[0]);
        let obj = verify_objective_negative(&c);
        assert!(obj.passed);
        let si = st.schedule.instance().clone();
        let feas = verify_dual_feasibility(&c, &si).unwrap();
        assert!(feas.passed, "{feas:?}");
        assert!(c.verify(&si).unwrap());
        assert_eq!(c.transcript.len(), 2);
        assert!(check_claim1_ratio(&st.tree));
        assert!(audit_claims(&st.tree, &st.schedule, &c).unwrap().is_empty());
    }

    #[test]
    fn scaling_keeps_both_verdicts() {
        let st = stuck_fixture();
        let c = build_dual_certificate(&st);
        let si = st.schedule.instance().clone();
        for alpha in [q(1, 1000), q(3, 7), q(5, 1)] {
            let sc = c.scaled(&alpha);
            assert!(verify_objective_negative(&sc).passed);
            assert!(verify_dual_feasibility(&sc, &si).unwrap().passed);
        }
    }

    #[test]
    fn doubled_z_is_caught_with_a_witness() {
        let st = stuck_fixture();
        let mut c = build_dual_certificate(&st);
        c.z[3] = c.z[3].clone() * q(2, 1);
        let si = st.schedule.instance().clone();
        let feas = verify_dual_feasibility(&c, &si).unwrap();
        assert!(!feas.passed);
        let bad: Vec<_> = feas.violations().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].configuration, vec![JobId(3)]);
    }

    #[test]
    fn json_round_trip() {
        let st = stuck_fixture();
        let mut c = build_dual_certificate(&st);
        let si = st.schedule.instance().clone();
        c.verify(&si).unwrap();
        let text = c.to_json(si.base());
        assert!(text.contains("\"delta\": \"23/24\""));
        let back = DualCertificate::from_json(&text, si.base()).unwrap();
        assert_eq!(back, c);
        assert!(DualCertificate::<Q>::from_json("{}", si.base()).is_err());
    }

    #[test]
    fn claim1_counts_per_layer() {
        let mut t = BlockerTree::new(JobId(0));
        assert!(check_claim1_ratio(&t));
        t.push_unchecked(JobId(0), MachineId(0), BlockerKind::BS, 1, Parent::Root);
        assert!(!check_claim1_ratio(&t));
        t.push_unchecked(JobId(1), MachineId(1), BlockerKind::S, 1, Parent::Blocker(0));
        assert_eq!(claim1_counts(&t), vec![(1, 1, 1)]);
        assert!(check_claim1_ratio(&t));
    }
}
