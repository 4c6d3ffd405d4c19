use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manifold_newton::experiment::{
    format_rate_table, format_summary_table, run_case, run_certificate, run_probes, run_rate_study, write_outputs,
    write_rate_csv, ExitStatus, ExperimentConfig, ExperimentKind,
};
use manifold_newton::Error;

#[derive(Parser)]
#[command(name = "mnewton", version, about = "Inexact Newton experiments on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve constrained Karcher cases (A1-A4 when no config is given).
    Run(CommonArgs),
    /// Estimate convergence rates under the different inexactness rules.
    Rates(CommonArgs),
    /// Probe metric regularity of the SPD trace maps.
    Mreg(CommonArgs),
    /// Check a Newton run against the semi-local convergence bounds.
    Certify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment file; may be repeated.
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,
    /// Overrides the seed of every config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Run(a) => (ExperimentKind::KarcherKkt, a),
        Command::Rates(a) => (ExperimentKind::ScalarRateStudy, a),
        Command::Mreg(a) => (ExperimentKind::MregProbe, a),
        Command::Certify(a) => (ExperimentKind::SemilocalCheck, a),
    };
    let status = match load_configs(kind, args) {
        Ok(configs) => match execute(kind, &configs, &args.out) {
            Ok(status) => status,
            Err(e) => {
                eprintln!("error: {e}");
                match e {
                    Error::Config(_) => ExitStatus::ConfigError,
                    _ => ExitStatus::SolverFailure,
                }
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::ConfigError
        }
    };
    ExitCode::from(status.code() as u8)
}

fn load_configs(kind: ExperimentKind, args: &CommonArgs) -> Result<Vec<ExperimentConfig>, Error> {
    let mut configs = if args.configs.is_empty() {
        default_configs(kind)?
    } else {
        args.configs
            .iter()
            .map(|path| {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ExperimentConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    for c in &mut configs {
        if c.kind != kind {
            return Err(Error::Config(format!(
                "config of kind `{}` given to a `{}` command",
                c.kind.as_str(),
                kind.as_str()
            )));
        }
        if let Some(seed) = args.seed {
            c.seed = seed;
        }
    }
    Ok(configs)
}

fn default_configs(kind: ExperimentKind) -> Result<Vec<ExperimentConfig>, Error> {
    match kind {
        ExperimentKind::KarcherKkt => {
            ["A1", "A2", "A3", "A4"].iter().map(|c| ExperimentConfig::karcher_case(c)).collect()
        }
        other => Ok(vec![ExperimentConfig::new(other)]),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn execute(kind: ExperimentKind, configs: &[ExperimentConfig], out: &Path) -> Result<ExitStatus, Error> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    match kind {
        ExperimentKind::KarcherKkt => {
            let outcomes = configs.iter().map(run_case).collect::<Result<Vec<_>, _>>()?;
            for o in &outcomes {
                for w in &o.warnings {
                    eprintln!("warning [{}]: {w}", o.row.case);
                }
            }
            let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
            print!("{}", format_summary_table(&rows));
            write_outputs(&outcomes, &configs[0].summary_file, out)
        }
        ExperimentKind::ScalarRateStudy => {
            let mut status = ExitStatus::Success;
            let mut all = Vec::new();
            for c in configs {
                let rows = run_rate_study(c)?;
                if rows.iter().any(|r| r.status != "converged") {
                    status = ExitStatus::SolverFailure;
                }
                all.extend(rows);
            }
            print!("{}", format_rate_table(&all));
            write(&out.join("rates.txt"), format_rate_table(&all))?;
            let mut csv = Vec::new();
            write_rate_csv(&all, &mut csv)?;
            write(&out.join("rates.csv"), csv)?;
            Ok(status)
        }
        ExperimentKind::MregProbe => {
            let mut status = ExitStatus::Success;
            for c in configs {
                for report in run_probes(c)? {
                    println!(
                        "{:<18} n={} sigma={:.4} samples={} violations={} worst_margin={:.3e} tightness={:.6}",
                        report.variant.as_str(),
                        report.n,
                        report.sigma,
                        report.samples,
                        report.violations,
                        report.worst_margin,
                        report.tightness
                    );
                    if report.violations > 0 {
                        status = ExitStatus::SolverFailure;
                    }
                    let name = format!("probe_{}_n{}.json", report.variant.as_str(), report.n);
                    write(&out.join(name), report.to_json())?;
                }
            }
            Ok(status)
        }
        ExperimentKind::SemilocalCheck => {
            let mut status = ExitStatus::Success;
            for (i, c) in configs.iter().enumerate() {
                let outcome = run_certificate(c)?;
                let cert = &outcome.certificate;
                println!(
                    "start={} status={} iterations={} valid={} alpha_hat={:.4} passed={}",
                    outcome.start,
                    outcome.status,
                    outcome.iterations,
                    cert.valid,
                    cert.alpha_hat,
                    cert.passed()
                );
                for v in &cert.violations {
                    println!("  hypothesis violated: {v}");
                }
                if !cert.passed() {
                    status = ExitStatus::SolverFailure;
                }
                let name =
                    if configs.len() == 1 { "certificate.json".to_string() } else { format!("certificate_{i}.json") };
                let json = serde_json::to_string_pretty(&outcome).map_err(|e| Error::Io(e.to_string()))?;
                write(&out.join(name), json)?;
            }
            Ok(status)
        }
    }
}
