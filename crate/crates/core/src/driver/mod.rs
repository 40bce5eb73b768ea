//! End-to-end pipeline: bisection over the guess `T`, seeding of small and
//! medium jobs, insertion of the huge jobs, and the report.

mod bench;
mod generate;
mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::certificate::{
    audit_claims, build_dual_certificate, check_claim1_ratio, config_lp_lower_bound,
    CertificateDoc, DualCertificate, LpBound,
};
use crate::engine::{insert_huge_job, EngineConfig, InsertError, MonitorReport, RunStats, StuckState};
use crate::model::{validate_partial_schedule, Instance, JobClass, JobId, ScaledInstance, Schedule};
use crate::oracle::exact_optimal_makespan;
use crate::scalar::Scalar;
use crate::seed::seed_small_medium;

pub use bench::{bench, bench_table, BenchRow};
pub use generate::{generate_instance, GenError, GenSpec, Preset};
pub use trace::{emit_trace, TraceFormat, TraceRun};

#[derive(Debug, Clone)]
pub struct SolveOptions<S> {
    pub epsilon: S,
    pub tolerance: S,
    pub audit: bool,
    pub record_events: bool,
    pub lp_bound: bool,
    pub oracle: bool,
}

impl<S: Scalar> Default for SolveOptions<S> {
    fn default() -> Self {
        SolveOptions {
            epsilon: S::from_frac(1, 24),
            tolerance: S::from_frac(1, 100),
            audit: false,
            record_events: false,
            lp_bound: false,
            oracle: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Success,
    SeedInfeasible,
    /// Insertion of this huge job got stuck; see the certificate.
    Stuck(JobId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe<S> {
    pub guess: S,
    pub outcome: ProbeOutcome,
    pub iterations: u64,
    /// For stuck probes: index into `SolveReport::certificates`.
    pub certificate: Option<usize>,
    pub claim1: Option<bool>,
    /// Claim 2 and 3 failures found in audit mode.
    pub claim_failures: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// `max(p_max, Σp / m)`.
    Trivial,
    /// The assignment LP of small and medium jobs is infeasible at the value.
    SeedLp,
    /// A verified dual certificate from a stuck insertion.
    Certificate,
    ConfigLp,
    /// Integral optimum from the exact oracle; bounds `OPT`, not `OPT*`.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct SolveReport<S> {
    pub epsilon: S,
    pub tolerance: S,
    pub schedule: Schedule<S>,
    pub makespan: S,
    pub guess_final: S,
    pub lower_bound: S,
    pub lower_bound_source: BoundSource,
    pub ratio_bound: S,
    pub probes: Vec<Probe<S>>,
    pub iterations: BTreeMap<&'static str, u64>,
    pub monitor: MonitorReport,
    pub max_layer: usize,
    pub certificates: Vec<DualCertificate<S>>,
    pub lp_bound: Option<LpBound<S>>,
    pub oracle_optimum: Option<S>,
    /// Insertion runs of every probe, in probe order; empty unless events
    /// were recorded.
    pub runs: Vec<TraceRun>,
}

/// Everything one guess produced.
#[derive(Debug)]
pub struct ProbeRun<S: Scalar> {
    pub outcome: ProbeOutcome,
    /// Summed over the insertion runs of this guess.
    pub stats: RunStats,
    pub schedule: Option<Schedule<S>>,
    pub stuck: Option<Box<StuckState<S>>>,
    /// Verified certificate of a stuck probe.
    pub certificate: Option<DualCertificate<S>>,
    pub claim1: Option<bool>,
    pub claim_failures: Vec<String>,
    pub runs: Vec<TraceRun>,
}

fn absorb(t: &mut RunStats, s: &RunStats) {
    t.iterations += s.iterations;
    t.adds += s.adds;
    t.moves += s.moves;
    t.deleted += s.deleted;
    t.orphans += s.orphans;
    t.max_layer = t.max_layer.max(s.max_layer);
    t.audited += s.audited;
    t.monitor.checkpoints += s.monitor.checkpoints;
    t.monitor.literal_violations += s.monitor.literal_violations;
    t.monitor.deferred_violations += s.monitor.deferred_violations;
    let room = 32usize.saturating_sub(t.monitor.literal_at.len());
    t.monitor.literal_at.extend(s.monitor.literal_at.iter().take(room));
}

fn huge_in_order<S: Scalar>(si: &ScaledInstance<S>) -> Vec<JobId> {
    let mut huge: Vec<JobId> = si.jobs_of_class(JobClass::Huge).collect();
    huge.sort_by(|a, b| si.size(*b).cmp(si.size(*a)).then(a.cmp(b)));
    huge
}

/// Runs the algorithm at one guess: seed, then insert the huge jobs in
/// decreasing size. A stuck insertion yields a certificate, which must verify.
pub fn probe_guess<S: Scalar>(
    base: &Arc<Instance<S>>,
    guess: &S,
    opts: &SolveOptions<S>,
) -> Result<ProbeRun<S>, SolveError> {
    let si = Arc::new(
        ScaledInstance::new(base.clone(), guess.clone(), opts.epsilon.clone())
            .map_err(|e| SolveError::Input(e.to_string()))?,
    );
    let mut out = ProbeRun {
        outcome: ProbeOutcome::SeedInfeasible,
        stats: RunStats::default(),
        schedule: None,
        stuck: None,
        certificate: None,
        claim1: None,
        claim_failures: Vec::new(),
        runs: Vec::new(),
    };
    let Ok(mut s) = seed_small_medium(&si) else {
        return Ok(out);
    };
    let config = EngineConfig {
        audit: opts.audit,
        record_events: opts.record_events,
        ..EngineConfig::default()
    };
    for j in huge_in_order(&si) {
        match insert_huge_job(s, j, config.clone()) {
            Ok(done) => {
                absorb(&mut out.stats, &done.stats);
                if opts.record_events {
                    out.runs.push(TraceRun {
                        guess: guess.to_frac_string(),
                        j_new: j,
                        events: done.events,
                    });
                }
                s = done.schedule;
            }
            Err(InsertError::Stuck(st)) => {
                absorb(&mut out.stats, &st.stats);
                if opts.record_events {
                    out.runs.push(TraceRun {
                        guess: guess.to_frac_string(),
                        j_new: j,
                        events: st.events.clone(),
                    });
                }
                let mut cert = build_dual_certificate(&st);
                let ok = cert
                    .verify(&si)
                    .map_err(|e| SolveError::Internal(format!("certificate check at T = {guess}: {e}")))?;
                if !ok {
                    return Err(SolveError::Internal(format!(
                        "dual certificate at T = {guess} for {} does not verify",
                        base.job(j).name
                    )));
                }
                out.claim1 = Some(check_claim1_ratio(&st.tree));
                if opts.audit {
                    out.claim_failures =
                        audit_claims(&st.tree, &st.schedule, &cert).unwrap_or_else(|e| vec![e.to_string()]);
                }
                out.outcome = ProbeOutcome::Stuck(j);
                out.certificate = Some(cert);
                out.stuck = Some(st);
                return Ok(out);
            }
            Err(e) => return Err(SolveError::Internal(e.to_string())),
        }
    }
    let bad = validate_partial_schedule(&s);
    if !bad.is_empty() || s.assigned_count() != si.job_count() {
        return Err(SolveError::Internal(format!(
            "final schedule at T = {guess} is not complete and valid: {bad:?}"
        )));
    }
    out.outcome = ProbeOutcome::Success;
    out.schedule = Some(s);
    Ok(out)
}

fn unscaled_makespan<S: Scalar>(s: &Schedule<S>) -> S {
    let base = s.instance().base();
    base.machine_ids()
        .map(|i| s.jobs_on(i).iter().fold(S::zero(), |a, j| a + base.size(*j)))
        .max()
        .unwrap_or_else(S::zero)
}

/// Bisects `T` between `max(p_max, Σp/m)` and `Σp` until `high/low <= 1 + τ`.
/// Every failed probe carries its evidence: an infeasible assignment LP or a
/// verified dual certificate.
pub fn solve<S: Scalar>(inst: &Instance<S>, opts: &SolveOptions<S>) -> Result<SolveReport<S>, SolveError> {
    let eps = &opts.epsilon;
    if !eps.is_positive() || eps >= &S::from_frac(1, 12) {
        return Err(SolveError::Input(format!("epsilon must lie in (0, 1/12), got {eps}")));
    }
    if !opts.tolerance.is_positive() {
        return Err(SolveError::Input("tolerance must be positive".into()));
    }
    if inst.job_count() == 0 {
        return Err(SolveError::Input("instance has no jobs".into()));
    }
    let base = Arc::new(inst.clone());
    let total = inst.total_size();
    let trivial = inst
        .max_size()
        .max(total.clone() / S::from_usize(inst.machine_count()));

    let mut totals = RunStats::default();
    let mut probes = Vec::new();
    let mut certificates = Vec::new();
    let mut best: Option<(S, Schedule<S>)> = None;
    let mut runs = Vec::new();
    // Largest guess with certified `OPT* > guess`.
    let mut certified: Option<(S, BoundSource)> = None;

    let mut run_probe = |t: S,
                         probes: &mut Vec<Probe<S>>,
                         certificates: &mut Vec<DualCertificate<S>>,
                         totals: &mut RunStats|
     -> Result<bool, SolveError> {
        let run = probe_guess(&base, &t, opts)?;
        absorb(totals, &run.stats);
        runs.extend(run.runs);
        let certificate = run.certificate.map(|c| {
            certificates.push(c);
            certificates.len() - 1
        });
        probes.push(Probe {
            guess: t.clone(),
            outcome: run.outcome,
            iterations: run.stats.iterations,
            certificate,
            claim1: run.claim1,
            claim_failures: run.claim_failures,
        });
        match run.outcome {
            ProbeOutcome::Success => {
                best = Some((t, run.schedule.expect("successful probe has a schedule")));
                Ok(true)
            }
            outcome => {
                let source = if matches!(outcome, ProbeOutcome::Stuck(_)) {
                    BoundSource::Certificate
                } else {
                    BoundSource::SeedLp
                };
                if certified.as_ref().map_or(true, |(v, _)| &t > v) {
                    certified = Some((t, source));
                }
                Ok(false)
            }
        }
    };

    if !run_probe(total.clone(), &mut probes, &mut certificates, &mut totals)? {
        return Err(SolveError::Internal(format!(
            "probe at T = sum of sizes = {total} failed"
        )));
    }
    let (mut lo, mut hi) = (trivial.clone(), total);
    if lo < hi && run_probe(lo.clone(), &mut probes, &mut certificates, &mut totals)? {
        hi = lo.clone();
    }
    let target = S::one() + &opts.tolerance;
    let two = S::from_int(2);
    while hi > lo.clone() * &target {
        let mid = (lo.clone() + &hi) / &two;
        if run_probe(mid.clone(), &mut probes, &mut certificates, &mut totals)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let (guess_final, schedule) = best.expect("the probe at the sum of sizes succeeded");
    let makespan = unscaled_makespan(&schedule);
    let r = schedule.instance().r().clone();
    if makespan > (S::one() + r) * &guess_final {
        return Err(SolveError::Internal(format!(
            "makespan {makespan} exceeds (1 + R) * {guess_final}"
        )));
    }

    let mut lower_bound = trivial;
    let mut lower_bound_source = BoundSource::Trivial;
    let mut raise = |v: &S, src: BoundSource| {
        if v > &lower_bound {
            lower_bound = v.clone();
            lower_bound_source = src;
        }
    };
    if let Some((v, src)) = &certified {
        raise(v, *src);
    }
    let lp_bound = opts.lp_bound.then(|| config_lp_lower_bound(inst, &opts.tolerance));
    if let Some(b) = &lp_bound {
        raise(&b.lower, BoundSource::ConfigLp);
    }
    let oracle_optimum = if opts.oracle {
        exact_optimal_makespan(inst).ok()
    } else {
        None
    };
    if let Some(opt) = &oracle_optimum {
        raise(opt, BoundSource::Oracle);
    }
    let ratio_bound = makespan.clone() / &lower_bound;

    let st = &totals;
    let mut iterations = BTreeMap::new();
    iterations.insert("probes", probes.len() as u64);
    iterations.insert("engine", st.iterations);
    iterations.insert("adds", st.adds);
    iterations.insert("moves", st.moves);
    iterations.insert("deleted", st.deleted);
    iterations.insert("orphans", st.orphans);
    iterations.insert("audited", st.audited);

    Ok(SolveReport {
        epsilon: opts.epsilon.clone(),
        tolerance: opts.tolerance.clone(),
        makespan,
        guess_final,
        lower_bound,
        lower_bound_source,
        ratio_bound,
        iterations,
        monitor: st.monitor.clone(),
        max_layer: st.max_layer,
        probes,
        certificates,
        lp_bound,
        oracle_optimum,
        runs,
        schedule,
    })
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    epsilon: String,
    tolerance: String,
    makespan: String,
    guess_final: String,
    lower_bound: String,
    lower_bound_source: BoundSource,
    ratio_bound: String,
    bracket_note: &'static str,
    assignment: Vec<AssignmentDoc>,
    probes: Vec<ProbeDoc>,
    iterations: &'a BTreeMap<&'static str, u64>,
    max_layer: usize,
    signature_monitor: &'a MonitorReport,
    lp_bound: Option<LpBoundDoc>,
    oracle_optimum: Option<String>,
    certificates: Vec<CertificateDoc>,
}

#[derive(Serialize)]
struct AssignmentDoc {
    job: String,
    machine: usize,
}

#[derive(Serialize)]
struct ProbeDoc {
    guess: String,
    outcome: &'static str,
    job: Option<String>,
    iterations: u64,
    certificate: Option<usize>,
    claim1: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    claim_failures: Vec<String>,
}

#[derive(Serialize)]
struct LpBoundDoc {
    lower: String,
    upper: String,
    resolved: bool,
    probes: usize,
}

impl<S: Scalar> SolveReport<S> {
    /// Deterministic JSON rendering; equal inputs give equal bytes.
    pub fn to_json(&self) -> String {
        let inst = self.schedule.instance().base();
        let doc = ReportDoc {
            epsilon: self.epsilon.to_frac_string(),
            tolerance: self.tolerance.to_frac_string(),
            makespan: self.makespan.to_frac_string(),
            guess_final: self.guess_final.to_frac_string(),
            lower_bound: self.lower_bound.to_frac_string(),
            lower_bound_source: self.lower_bound_source,
            ratio_bound: self.ratio_bound.to_frac_string(),
            bracket_note: "the guess is located only up to a factor 1 + tolerance",
            assignment: inst
                .original_order()
                .into_iter()
                .map(|j| AssignmentDoc {
                    job: inst.job(j).name.clone(),
                    machine: self.schedule.machine_of(j).expect("total schedule").number(),
                })
                .collect(),
            probes: self
                .probes
                .iter()
                .map(|p| ProbeDoc {
                    guess: p.guess.to_frac_string(),
                    outcome: match p.outcome {
                        ProbeOutcome::Success => "success",
                        ProbeOutcome::SeedInfeasible => "seed_infeasible",
                        ProbeOutcome::Stuck(_) => "stuck",
                    },
                    job: match p.outcome {
                        ProbeOutcome::Stuck(j) => Some(inst.job(j).name.clone()),
                        _ => None,
                    },
                    iterations: p.iterations,
                    certificate: p.certificate,
                    claim1: p.claim1,
                    claim_failures: p.claim_failures.clone(),
                })
                .collect(),
            iterations: &self.iterations,
            max_layer: self.max_layer,
            signature_monitor: &self.monitor,
            lp_bound: self.lp_bound.as_ref().map(|b| LpBoundDoc {
                lower: b.lower.to_frac_string(),
                upper: b.upper.to_frac_string(),
                resolved: b.resolved,
                probes: b.probes,
            }),
            oracle_optimum: self.oracle_optimum.as_ref().map(|v| v.to_frac_string()),
            certificates: self.certificates.iter().map(|c| c.to_doc(inst)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MachineId;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_frac(n, d)
    }

    #[test]
    fn single_huge_job_single_machine() {
        let inst = Instance::new(1, [("a".to_string(), q(3, 2), vec![MachineId(0)])]).unwrap();
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.makespan, q(3, 2));
        assert_eq!(r.ratio_bound, q(1, 1));
        assert_eq!(r.probes.len(), 1);
    }

    #[test]
    fn no_huge_jobs_reduces_to_seeding() {
        let all = vec![MachineId(0), MachineId(1)];
        let inst = Instance::new(
            2,
            (0..5).map(|k| (format!("s{k}"), q(1, 3), all.clone())),
        )
        .unwrap();
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.iterations["engine"], 0);
        assert!(r.certificates.is_empty());
        assert!(r.makespan <= q(11, 6) * &r.lower_bound);
    }

    #[test]
    fn pinned_jobs_hit_the_optimum() {
        // Three 7/20 jobs and a 9/10 job, all pinned to m1: OPT = 39/20.
        let m0 = vec![MachineId(0)];
        let inst = Instance::new(
            2,
            (0..3)
                .map(|k| (format!("s{k}"), q(7, 20), m0.clone()))
                .chain([("h".to_string(), q(9, 10), m0.clone())]),
        )
        .unwrap();
        let opts = SolveOptions {
            lp_bound: true,
            oracle: true,
            ..SolveOptions::default()
        };
        let r = solve(&inst, &opts).unwrap();
        assert_eq!(r.makespan, q(39, 20));
        assert_eq!(r.oracle_optimum, Some(q(39, 20)));
        assert_eq!(r.ratio_bound, q(1, 1));
        assert!(r.probes.iter().skip(1).all(|p| p.outcome == ProbeOutcome::SeedInfeasible));
    }

    #[test]
    fn stuck_probes_carry_verified_certificates() {
        let opts = SolveOptions {
            audit: true,
            ..SolveOptions::default()
        };
        let mut stuck = 0;
        for seed in 0..20 {
            let inst: Arc<Instance<Q>> =
                Arc::new(generate_instance(&GenSpec::new(3, 8, Preset::HugeHeavy, 0.3, seed)).unwrap());
            let opt = exact_optimal_makespan(&inst).unwrap();
            let lb = inst.max_size();
            for k in 16..=32 {
                let t = lb.clone() * q(k, 16);
                let run = probe_guess(&inst, &t, &opts).unwrap();
                if let ProbeOutcome::Stuck(_) = run.outcome {
                    stuck += 1;
                    assert!(t < opt);
                    assert_eq!(run.claim1, Some(true));
                    assert!(run.claim_failures.is_empty(), "{:?}", run.claim_failures);
                    assert!(run.certificate.is_some() && run.stuck.is_some());
                }
            }
        }
        assert!(stuck > 0);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let inst = Instance::new(1, [("a".to_string(), q(1, 2), vec![MachineId(0)])]).unwrap();
        let opts = SolveOptions {
            epsilon: q(1, 12),
            ..SolveOptions::default()
        };
        assert!(matches!(solve(&inst, &opts), Err(SolveError::Input(_))));
    }
}
