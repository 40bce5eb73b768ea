use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::{EngineEvent, Parent};
use crate::model::JobId;

/// The event log of one insertion run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRun {
    pub guess: String,
    pub j_new: JobId,
    pub events: Vec<EngineEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Jsonl,
    Dot,
}

#[derive(Serialize)]
struct Line<'a> {
    run: usize,
    guess: &'a str,
    j_new: JobId,
    #[serde(flatten)]
    event: &'a EngineEvent,
}

/// `Jsonl`: one record per event. `Dot`: a comment header, then one digraph
/// per event with the tree after it; edges go from parent to child.
pub fn emit_trace(runs: &[TraceRun], format: TraceFormat) -> Vec<u8> {
    let mut out = String::new();
    match format {
        TraceFormat::Jsonl => {
            for (r, run) in runs.iter().enumerate() {
                for e in &run.events {
                    let line = Line {
                        run: r,
                        guess: &run.guess,
                        j_new: run.j_new,
                        event: e,
                    };
                    out.push_str(&serde_json::to_string(&line).expect("event serializes"));
                    out.push('\n');
                }
            }
        }
        TraceFormat::Dot => {
            out.push_str("// blocker tree snapshots, one digraph per engine event\n");
            for (r, run) in runs.iter().enumerate() {
                for e in &run.events {
                    let _ = writeln!(out, "digraph run{r}_it{}_{:?} {{", e.iteration, e.event);
                    let _ = writeln!(
                        out,
                        "  label=\"T = {} | {:?} ({}, {})\";",
                        run.guess, e.event, e.job, e.machine
                    );
                    out.push_str("  node [shape=box];\n");
                    out.push_str("  root [label=\"root\", shape=point];\n");
                    for b in &e.tree {
                        let _ = writeln!(
                            out,
                            "  b{} [label=\"({}, {}) {} {}.{}\"];",
                            b.stamp,
                            b.job,
                            b.machine,
                            b.kind,
                            b.layer,
                            b.kind.sublayer()
                        );
                    }
                    for b in &e.tree {
                        match b.parent {
                            Parent::Root => {
                                let _ = writeln!(out, "  root -> b{};", b.stamp);
                            }
                            Parent::Blocker(p) => {
                                let _ = writeln!(out, "  b{p} -> b{};", b.stamp);
                            }
                        }
                    }
                    out.push_str("}\n");
                }
            }
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{insert_huge_job, EngineConfig};
    use crate::model::{Instance, MachineId, ScaledInstance, Schedule};
    use crate::scalar::Scalar;
    use num_rational::BigRational;
    use std::sync::Arc;

    type Q = BigRational;

    /// `a` (9/10) sits on m1; `b` (7/8) may only go to m1, `a` may also use m2.
    fn swap_run() -> TraceRun {
        let base = Instance::new(
            2,
            [
                ("a".to_string(), Q::from_frac(9, 10), vec![MachineId(0), MachineId(1)]),
                ("b".to_string(), Q::from_frac(7, 8), vec![MachineId(0)]),
            ],
        )
        .unwrap();
        let si = Arc::new(ScaledInstance::new(Arc::new(base), Q::from_int(1), Q::from_frac(1, 24)).unwrap());
        let mut s = Schedule::empty(si);
        s.assign(JobId(1), MachineId(0));
        let config = EngineConfig {
            record_events: true,
            ..EngineConfig::default()
        };
        let done = insert_huge_job(s, JobId(0), config).unwrap();
        TraceRun {
            guess: "1/1".into(),
            j_new: JobId(0),
            events: done.events,
        }
    }

    #[test]
    fn jsonl_signatures_increase() {
        let text = String::from_utf8(emit_trace(&[swap_run()], TraceFormat::Jsonl)).unwrap();
        let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let kinds: Vec<&str> = recs.iter().map(|r| r["event"].as_str().unwrap()).collect();
        assert_eq!(kinds, ["add", "add", "move", "move"]);
        let sigs: Vec<Vec<[u64; 5]>> = recs[..3]
            .iter()
            .map(|r| serde_json::from_value(r["signature"].clone()).unwrap())
            .collect();
        // Adds raise the signature. The move drops its own executed blocker,
        // so it lands between the two adds.
        assert_eq!(sigs, [vec![[1, 0, 0, 0, 0]], vec![[3, 0, 0, 0, 0]], vec![[2, 0, 0, 0, 0]]]);
        assert!(recs[3]["signature"].is_null());
    }

    #[test]
    fn dot_has_one_graph_per_event() {
        let text = String::from_utf8(emit_trace(&[swap_run()], TraceFormat::Dot)).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("digraph ")).count(), 4);
        assert!(text.contains("root -> b0;"));
        assert!(text.contains("label=\"(j1, m1) BB 1.1\""));
    }

    #[test]
    fn empty_run() {
        assert!(emit_trace(&[], TraceFormat::Jsonl).is_empty());
        let dot = String::from_utf8(emit_trace(&[], TraceFormat::Dot)).unwrap();
        assert_eq!(dot.lines().count(), 1);
        assert!(dot.starts_with("//"));
    }
}
