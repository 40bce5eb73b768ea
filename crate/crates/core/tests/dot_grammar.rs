use std::sync::Arc;

use graphviz_rust::dot_structures::{Graph, Stmt};
use ra_core::driver::{emit_trace, generate_instance, probe_guess, GenSpec, Preset, SolveOptions, TraceFormat, TraceRun};
use ra_core::scalar::Scalar;
use ra_core::{Instance, Rational};

fn collect_runs() -> Vec<TraceRun> {
    let opts = SolveOptions {
        record_events: true,
        ..SolveOptions::default()
    };
    let mut runs = Vec::new();
    for seed in 0..10 {
        let inst: Arc<Instance> =
            Arc::new(generate_instance(&GenSpec::new(3, 8, Preset::HugeHeavy, 0.4, seed)).unwrap());
        for k in 16..=24 {
            let t = inst.max_size() * Rational::from_frac(k, 16);
            runs.extend(probe_guess(&inst, &t, &opts).unwrap().runs);
        }
    }
    runs
}

fn graphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines().filter(|l| !l.starts_with("//")) {
        cur.push_str(line);
        cur.push('\n');
        if line == "}" {
            out.push(std::mem::take(&mut cur));
        }
    }
    assert!(cur.is_empty(), "trailing text after the last graph");
    out
}

#[test]
fn every_snapshot_parses_as_a_digraph() {
    let runs = collect_runs();
    let events: Vec<_> = runs.iter().flat_map(|r| r.events.iter()).collect();
    assert!(events.iter().any(|e| e.tree.len() >= 2), "campaign should grow some trees");
    let text = String::from_utf8(emit_trace(&runs, TraceFormat::Dot)).unwrap();
    let chunks = graphs(&text);
    assert_eq!(chunks.len(), events.len());
    for (chunk, e) in chunks.iter().zip(&events) {
        let g = graphviz_rust::parse(chunk).unwrap_or_else(|err| panic!("{err}\n{chunk}"));
        let Graph::DiGraph { stmts, .. } = g else {
            panic!("expected a digraph");
        };
        let nodes = stmts.iter().filter(|s| matches!(s, Stmt::Node(_))).count();
        let edges = stmts.iter().filter(|s| matches!(s, Stmt::Edge(_))).count();
        assert_eq!(nodes, e.tree.len() + 1);
        assert_eq!(edges, e.tree.len());
    }
}

#[test]
fn header_only_for_no_events() {
    let text = String::from_utf8(emit_trace(&[], TraceFormat::Dot)).unwrap();
    assert!(graphs(&text).is_empty());
}
