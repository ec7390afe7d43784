//! `cuspflow`: runs experiment presets and writes CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cusp_core::flow::ReducedTrace;
use cusp_core::harness::experiments::{bootstrap_on_trace, initial_amplitude, DEFAULT_SIGMA};
use cusp_core::harness::{run_experiment, verify_all, ExperimentSpec, Outcome, SuiteSpec, OUTPUT_ROOT_ENV};
use cusp_core::norms::NormParams;
use cusp_core::CuspError;

#[derive(Parser)]
#[command(name = "cuspflow", version, about = "Ricci-deTurck flow experiments on hyperbolic cusps")]
struct Cli {
    /// Root directory for outputs.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run a suite of experiments (every preset when no file is given).
    Verify { suite: Option<PathBuf> },
    /// Evaluate the parabolic norms and the bootstrap check on a stored reduced trace.
    Norms {
        trace_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = 0.2)]
        mu2: f64,
    },
}

fn exit_for(e: &CuspError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        CuspError::Config(_) | CuspError::Parameter(_) | CuspError::Io(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn report(out: &Outcome) {
    for r in &out.rows {
        println!(
            "{} criterion {} {}: {} ({} {}){}",
            out.preset.id(),
            r.criterion,
            r.check,
            r.value,
            r.relation_label(),
            r.bound,
            if r.pass { "" } else { " FAIL" }
        );
    }
}

fn read_suite(path: &Path) -> Result<SuiteSpec, CuspError> {
    let text = fs::read_to_string(path).map_err(|e| CuspError::Config(format!("{}: {e}", path.display())))?;
    SuiteSpec::from_json(&text).map_err(|e| match e {
        CuspError::Config(m) => CuspError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(root) = &cli.output_root {
        std::env::set_var(OUTPUT_ROOT_ENV, root);
    }
    let result = match cli.command {
        Command::Run { config } => {
            ExperimentSpec::from_path(&config).and_then(|spec| run_experiment(&spec)).map(|out| {
                report(&out);
                out.passed()
            })
        }
        Command::Verify { suite } => {
            let suite = match suite {
                Some(p) => read_suite(&p),
                None => Ok(SuiteSpec::full()),
            };
            suite.and_then(|s| verify_all(&s.experiments)).map(|summary| {
                for out in &summary.outcomes {
                    report(out);
                }
                for (c, pass) in summary.criteria() {
                    println!("criterion {c}: {}", if pass { "PASS" } else { "FAIL" });
                }
                summary.passed()
            })
        }
        Command::Norms { trace_dir, sigma, mu2 } => (|| {
            let params = NormParams::from_mu2(sigma, mu2).map_err(|e| CuspError::Config(e.to_string()))?;
            let trace = ReducedTrace::read_csv(&trace_dir.join("reduced_trace.csv"))?;
            let table = bootstrap_on_trace(&trace, params, initial_amplitude(&trace))?;
            table.artifact().write(&trace_dir)?;
            let r = &table.result;
            println!("C0 = {}", r.c0);
            println!("max residual / chi = {}", table.worst);
            match r.crossing {
                Some(t) => println!("bootstrap inequality fails at T' = {t}"),
                None => println!("bootstrap inequality holds at every horizon"),
            }
            Ok(r.crossing.is_none())
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => exit_for(&e),
    }
}
