use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CaseOutcome, RateRow, SummaryRow};
use crate::error::Result;
use crate::newton::write_history_csv;

pub const SUMMARY_COLUMNS: &str = "case,status,p1,p2,p3,p4,mu,g,mu_g,grad_norm,iterations,center_distance";
const RATE_COLUMNS: &str = "problem,rule,status,iterations,class,order,linear_ratio,quadratic_ratio,used";

/// Process exit codes of the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    SolverFailure,
    ConfigError,
}

impl ExitStatus {
    pub fn code(&self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::SolverFailure => 1,
            ExitStatus::ConfigError => 2,
        }
    }
}

/// CSV cells are comma separated; free text has its commas replaced.
fn cell(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn write_summary_csv(rows: &[SummaryRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SUMMARY_COLUMNS}")?;
    for r in rows {
        write!(out, "{},{}", cell(&r.case), cell(&r.status))?;
        for c in &r.solution {
            write!(out, ",{c:.16e}")?;
        }
        writeln!(
            out,
            ",{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.multiplier, r.constraint, r.complementarity, r.gradient_norm, r.iterations, r.center_distance
        )?;
    }
    Ok(())
}

/// Aligned plain-text version of the summary.
pub fn format_summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<10} {:<36} {:>12} {:>12} {:>12} {:>10} {:>6}",
        "case", "status", "p*", "mu*", "g(p*)", "mu*g(p*)", "|grad L|", "iters"
    );
    for r in rows {
        let p = r.solution.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", ");
        let status = r.status.split(':').next().unwrap_or("");
        let _ = writeln!(
            s,
            "{:<6} {:<10} {:<36} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.2e} {:>6}",
            r.case,
            status,
            format!("[{p}]"),
            r.multiplier,
            r.constraint,
            r.complementarity,
            r.gradient_norm,
            r.iterations
        );
    }
    s
}

pub fn write_rate_csv(rows: &[RateRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{RATE_COLUMNS}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{}",
            cell(&r.problem),
            cell(&r.rule),
            r.status,
            r.iterations,
            r.class,
            r.order,
            r.linear_ratio,
            r.quadratic_ratio,
            r.used
        )?;
    }
    Ok(())
}

pub fn format_rate_table(rows: &[RateRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<28} {:<10} {:>5} {:<13} {:>8} {:>10} {:>10}",
        "problem", "rule", "status", "iters", "class", "order", "ratio", "q-ratio"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:<28} {:<10} {:>5} {:<13} {:>8.3} {:>10.3e} {:>10.3e}",
            r.problem, r.rule, r.status, r.iterations, r.class, r.order, r.linear_ratio, r.quadratic_ratio
        );
    }
    s
}

/// Writes `<summary>.txt`, `<summary>.csv` and one history CSV per case
/// into `dir`. Success only if every case converged.
pub fn write_outputs(outcomes: &[CaseOutcome], summary_stem: &str, dir: &Path) -> Result<ExitStatus> {
    fs::create_dir_all(dir)?;
    let rows: Vec<SummaryRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    fs::write(dir.join(format!("{summary_stem}.txt")), format_summary_table(&rows))?;
    let mut csv = Vec::new();
    write_summary_csv(&rows, &mut csv)?;
    fs::write(dir.join(format!("{summary_stem}.csv")), csv)?;
    for o in outcomes {
        let mut buf = Vec::new();
        write_history_csv(o.history(), &mut buf)?;
        fs::write(dir.join(o.config.history_name()), buf)?;
    }
    Ok(if outcomes.iter().all(|o| o.converged()) { ExitStatus::Success } else { ExitStatus::SolverFailure })
}
