use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ra_core::certificate::{CertificateDoc, DualCertificate};
use ra_core::driver::{
    bench, bench_table, emit_trace, generate_instance, solve, GenSpec, Preset, SolveError,
    SolveOptions, TraceFormat,
};
use ra_core::model::{parse_instance, serialize_instance, Instance, ScaledInstance};
use ra_core::scalar::parse_scalar;
use ra_core::Rational;

#[derive(Parser)]
#[command(name = "ra", version, about = "Restricted Assignment makespan scheduling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct Tuning {
    /// Accuracy parameter, in (0, 1/12).
    #[arg(long, default_value = "1/24", value_parser = rational)]
    epsilon: Rational,
    /// Bisection stops once high/low <= 1 + tol.
    #[arg(long, default_value = "1/100", value_parser = rational)]
    tol: Rational,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance and print the JSON report.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// Check the invariants at every engine iteration.
        #[arg(long)]
        audit: bool,
        /// Write the engine events of every probe as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the blocker-tree snapshots of every probe as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Also bracket the configuration-LP optimum by column generation.
        #[arg(long)]
        lp_bound: bool,
        /// Compare against the exact optimum (small instances only).
        #[arg(long)]
        oracle: bool,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long, short)]
        machines: usize,
        #[arg(long, short = 'n')]
        jobs: usize,
        #[arg(long, value_enum, default_value = "mixed")]
        preset: PresetArg,
        /// Probability that a machine is permitted for a job.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 24)]
        denominator: i64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve every instance file in a directory and tabulate.
    Bench {
        dir: PathBuf,
        /// May be repeated.
        #[arg(long = "epsilon", value_parser = rational, default_values = ["1/24"])]
        epsilons: Vec<Rational>,
        #[arg(long, default_value = "1/100", value_parser = rational)]
        tol: Rational,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Print JSON rows instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Solve and emit the engine trace of every probe.
    Trace {
        instance: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Re-verify certificates, given standalone or inside a solve report.
    Check { instance: PathBuf, certificate: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Uniform,
    HugeHeavy,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Dot,
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_scalar(s).ok_or_else(|| format!("`{s}` is not a rational like 1/24"))
}

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Input(_) => Failure::Input(e.into()),
            SolveError::Internal(_) => Failure::Internal(e.into()),
        }
    }
}

fn read_instance(path: &Path) -> anyhow::Result<Instance<Rational>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn options(t: &Tuning) -> SolveOptions<Rational> {
    SolveOptions {
        epsilon: t.epsilon.clone(),
        tolerance: t.tol.clone(),
        ..SolveOptions::default()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Solve {
            instance,
            tuning,
            audit,
            trace,
            dot,
            lp_bound,
            oracle,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let opts = SolveOptions {
                audit,
                lp_bound,
                oracle,
                record_events: trace.is_some() || dot.is_some(),
                ..options(&tuning)
            };
            let report = solve(&inst, &opts)?;
            if let Some(p) = &trace {
                write_out(Some(p), &emit_trace(&report.runs, TraceFormat::Jsonl))?;
            }
            if let Some(p) = &dot {
                write_out(Some(p), &emit_trace(&report.runs, TraceFormat::Dot))?;
            }
            let mut text = report.to_json();
            text.push('\n');
            write_out(out.as_deref(), text.as_bytes())?;
        }
        Cmd::Gen {
            machines,
            jobs,
            preset,
            density,
            seed,
            denominator,
            out,
        } => {
            let preset = match preset {
                PresetArg::Uniform => Preset::Uniform,
                PresetArg::HugeHeavy => Preset::HugeHeavy,
                PresetArg::Mixed => Preset::Mixed,
            };
            let spec = GenSpec {
                denominator,
                ..GenSpec::new(machines, jobs, preset, density, seed)
            };
            let inst: Instance<Rational> = generate_instance(&spec).map_err(|e| anyhow!(e))?;
            write_out(out.as_deref(), serialize_instance(&inst).as_bytes())?;
        }
        Cmd::Bench {
            dir,
            epsilons,
            tol,
            reps,
            json,
        } => {
            let rows = bench(&dir, &epsilons, reps, &tol)
                .with_context(|| format!("reading {}", dir.display()))?;
            let text = if json {
                rows.iter()
                    .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
                    .collect()
            } else {
                bench_table(&rows)
            };
            write_out(None, text.as_bytes())?;
        }
        Cmd::Trace {
            instance,
            tuning,
            format,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let opts = SolveOptions {
                record_events: true,
                ..options(&tuning)
            };
            let report = solve(&inst, &opts)?;
            let format = match format {
                FormatArg::Jsonl => TraceFormat::Jsonl,
                FormatArg::Dot => TraceFormat::Dot,
            };
            write_out(out.as_deref(), &emit_trace(&report.runs, format))?;
        }
        Cmd::Check {
            instance,
            certificate,
        } => {
            let inst = Arc::new(read_instance(&instance)?);
            let text = fs::read_to_string(&certificate)
                .with_context(|| format!("reading {}", certificate.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", certificate.display()))?;
            let docs: Vec<CertificateDoc> = match value.get("certificates") {
                Some(list) => serde_json::from_value(list.clone()),
                None => serde_json::from_value(value).map(|d| vec![d]),
            }
            .context("reading certificates")?;
            if docs.is_empty() {
                return Err(Failure::Input(anyhow!("no certificates found")));
            }
            let mut rejected = 0;
            for (k, doc) in docs.iter().enumerate() {
                let mut cert = DualCertificate::from_doc(doc, &inst).map_err(|e| anyhow!(e))?;
                cert.transcript.clear();
                let si = ScaledInstance::new(inst.clone(), cert.guess.clone(), cert.epsilon.clone())
                    .map_err(|e| anyhow!(e))?;
                let ok = cert
                    .verify(&si)
                    .map_err(|e| Failure::Internal(anyhow!(e)))?;
                println!(
                    "certificate {k} at T = {}: {}",
                    doc.guess,
                    if ok { "valid" } else { "REJECTED" }
                );
                for r in cert.transcript.iter().filter(|r| !r.passed) {
                    println!("  {}: {}", r.check, r.detail);
                }
                if !ok {
                    rejected += 1;
                }
            }
            if rejected > 0 {
                return Err(Failure::Internal(anyhow!("{rejected} certificate(s) rejected")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
