use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{solve, SolveOptions};
use crate::certificate::config_lp_lower_bound;
use crate::engine::layer_bound;
use crate::model::{parse_instance, Instance};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub epsilon: String,
    pub k_max: usize,
    pub iterations: u64,
    /// Whether every repetition reported the same iteration count.
    pub repeatable: bool,
    pub wall_ms: f64,
    pub max_layer: usize,
    pub makespan: String,
    pub lp_lower: Option<String>,
    pub ratio_vs_lp: Option<f64>,
    pub error: Option<String>,
}

fn load<S: Scalar>(path: &Path) -> Option<Instance<S>> {
    let bytes = std::fs::read(path)
        .map_err(|e| log::warn!("skipping {}: {e}", path.display()))
        .ok()?;
    parse_instance(&bytes)
        .map_err(|e| log::warn!("skipping {}: {e}", path.display()))
        .ok()
}

/// Solves every instance file in `dir` (sorted by name) under each epsilon,
/// `repetitions` times, in parallel. Unreadable entries are skipped.
pub fn bench<S: Scalar>(dir: &Path, epsilons: &[S], repetitions: usize, tolerance: &S) -> std::io::Result<Vec<BenchRow>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let corpus: Vec<(String, Instance<S>)> = paths
        .iter()
        .filter_map(|p| {
            let name = p.file_name()?.to_string_lossy().into_owned();
            load(p).map(|i| (name, i))
        })
        .collect();
    let jobs: Vec<(usize, &S)> = (0..corpus.len())
        .flat_map(|k| epsilons.iter().map(move |e| (k, e)))
        .collect();
    let reps = repetitions.max(1);
    Ok(jobs
        .into_par_iter()
        .map(|(k, eps)| {
            let (name, inst) = &corpus[k];
            let opts = SolveOptions {
                epsilon: eps.clone(),
                tolerance: tolerance.clone(),
                ..SolveOptions::default()
            };
            let mut row = BenchRow {
                instance: name.clone(),
                epsilon: eps.to_frac_string(),
                k_max: layer_bound(eps, inst.machine_count()),
                iterations: 0,
                repeatable: true,
                wall_ms: 0.0,
                max_layer: 0,
                makespan: String::new(),
                lp_lower: None,
                ratio_vs_lp: None,
                error: None,
            };
            let mut counts = Vec::with_capacity(reps);
            let start = Instant::now();
            for _ in 0..reps {
                match solve(inst, &opts) {
                    Ok(r) => {
                        counts.push(r.iterations["engine"]);
                        row.max_layer = r.max_layer;
                        row.makespan = r.makespan.to_frac_string();
                        if row.lp_lower.is_none() {
                            let lp = config_lp_lower_bound(inst, tolerance);
                            row.ratio_vs_lp = Some(r.makespan.to_f64() / lp.lower.to_f64());
                            row.lp_lower = Some(lp.lower.to_frac_string());
                        }
                    }
                    Err(e) => {
                        row.error = Some(e.to_string());
                        break;
                    }
                }
            }
            row.wall_ms = start.elapsed().as_secs_f64() * 1000.0 / reps as f64;
            row.iterations = counts.first().copied().unwrap_or(0);
            row.repeatable = counts.windows(2).all(|w| w[0] == w[1]);
            row
        })
        .collect())
}

/// Aligned text rendering of bench rows.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>8} {:>5} {:>10} {:>6} {:>10} {:>9} {:>8}",
        "instance", "epsilon", "K", "iterations", "layer", "wall ms", "ratio/LP", "repeat"
    );
    for r in rows {
        let ratio = r.ratio_vs_lp.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>5} {:>10} {:>6} {:>10.2} {:>9} {:>8}{}",
            r.instance,
            r.epsilon,
            r.k_max,
            r.iterations,
            r.max_layer,
            r.wall_ms,
            ratio,
            r.repeatable,
            r.error.as_ref().map_or(String::new(), |e| format!("  error: {e}"))
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn empty_corpus() {
        let dir = std::env::temp_dir().join(format!("ra-bench-empty-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let rows = bench::<Q>(&dir, &[Q::from_frac(1, 24)], 2, &Q::from_frac(1, 100)).unwrap();
        assert!(rows.is_empty());
        assert_eq!(bench_table(&rows).lines().count(), 1);
        std::fs::remove_dir(&dir).unwrap();
    }

    #[test]
    fn halving_epsilon_doubles_k() {
        for m in [1, 2, 4, 10, 50] {
            let a = layer_bound(&Q::from_frac(1, 24), m);
            let b = layer_bound(&Q::from_frac(1, 48), m);
            assert_eq!(b, 2 * a);
        }
    }
}
