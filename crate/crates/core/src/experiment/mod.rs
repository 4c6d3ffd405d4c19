//! Configuration-driven runs: the constrained Karcher cases, convergence-rate
//! studies, regularity probes and semi-local certificate checks, plus their
//! table and CSV outputs.

mod config;
mod output;

use std::sync::Arc;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{case_preset, default_semilocal_constants, ExperimentConfig, ExperimentKind, RuleSpec, DEFAULT_SEED};
pub use output::{
    format_rate_table, format_summary_table, write_outputs, write_rate_csv, write_summary_csv, ExitStatus,
    SUMMARY_COLUMNS,
};

use crate::error::{Error, Result};
use crate::geneq::{build_constrained_karcher, product_dist, ClosureMap, GenEqProblem, ProductPoint, SetValuedPart};
use crate::manifold::{dist, Chart, FrameField, ManifoldPoint, TangentVector};
use crate::mreglab::{verify_regularity, MapVariant, ProbeReport, RegularityProbe};
use crate::newton::{
    estimate_rate, estimate_rate_pooled, semilocal_certificate, solve, CertificateReport, InexactnessRule,
    IterateRecord, RateEstimate, SolveReport, DEFAULT_RATE_FLOOR,
};

/// `N` points with i.i.d. uniform `[0, 1)` coordinates, projected to `S³`.
pub fn case_points(n: usize, seed: u64) -> Result<Vec<ManifoldPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
            ManifoldPoint::sphere_normalized(&c)
        })
        .collect()
}

/// Final state of one Karcher run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub case: String,
    pub status: String,
    pub solution: Vec<f64>,
    pub multiplier: f64,
    pub constraint: f64,
    pub complementarity: f64,
    /// Norm of the Lagrangian gradient; the frame is orthonormal, so this is
    /// also the norm of the stationarity block of the residual.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub center_distance: f64,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub config: ExperimentConfig,
    pub row: SummaryRow,
    pub report: SolveReport,
    pub warnings: Vec<String>,
}

impl CaseOutcome {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }

    pub fn history(&self) -> &[IterateRecord] {
        &self.report.history
    }
}

/// Builds the constrained Karcher problem of a config, its start and the
/// sample points.
pub fn karcher_setup(config: &ExperimentConfig) -> Result<(GenEqProblem, ProductPoint)> {
    let points = case_points(config.n_points, config.seed)?;
    let center = ManifoldPoint::sphere_normalized(&config.center)?;
    let start = ProductPoint::new(points[0].clone(), vec![0.0]);
    Ok((build_constrained_karcher(&points, &center, config.radius)?, start))
}

/// Runs one constrained Karcher case. Proximity rules get their reference
/// from a preliminary exact run.
pub fn run_case(config: &ExperimentConfig) -> Result<CaseOutcome> {
    if config.kind != ExperimentKind::KarcherKkt {
        return Err(Error::Config(format!("`{}` is not a Karcher run", config.kind.as_str())));
    }
    config.validate()?;
    let (problem, start) = karcher_setup(config)?;
    let reference = if config.rule.needs_reference() {
        let exact = solve(&problem, start.clone(), &InexactnessRule::Exact, &config.stop)?;
        if !exact.converged() {
            return Err(Error::InvalidInput("reference run for the proximity rule did not converge".into()));
        }
        Some(exact.final_point)
    } else {
        None
    };
    let rule = config.rule.build(reference.as_ref())?;
    let report = solve(&problem, start, &rule, &config.stop)?;
    let row = summarize(config, &problem, &report)?;
    Ok(CaseOutcome { config: config.clone(), row, report, warnings: problem.warnings.clone() })
}

fn summarize(config: &ExperimentConfig, problem: &GenEqProblem, report: &SolveReport) -> Result<SummaryRow> {
    let last = report.last();
    let center = ManifoldPoint::sphere_normalized(&config.center)?;
    let status = match &report.failure {
        Some(e) => format!("{}: {e}", report.status.as_str()),
        None => report.status.as_str().to_string(),
    };
    let multiplier = last.multiplier();
    debug_assert_eq!(problem.multiplier_dim(), 1);
    Ok(SummaryRow {
        case: config.case.clone(),
        status,
        solution: report.final_point.point.to_flat(),
        multiplier,
        constraint: last.g_value,
        // adding 0.0 turns an inactive -0.0 into 0.0
        complementarity: multiplier * last.g_value + 0.0,
        gradient_norm: last.norm_phi,
        iterations: report.iterations,
        center_distance: dist(&report.final_point.point, &center)?,
    })
}

/// Number of sample points used as starts by the Karcher leg of a rate study.
pub const RATE_STUDY_STARTS: usize = 10;
/// Runs ending farther than this from the reference solution are left out
/// of the pooled rate estimate.
const RATE_STUDY_AGREEMENT: f64 = 1e-10;

/// One line of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub problem: String,
    pub rule: String,
    pub status: String,
    pub iterations: usize,
    pub class: String,
    pub order: f64,
    pub linear_ratio: f64,
    pub quadratic_ratio: f64,
    pub used: usize,
}

/// `f(p) = p² − 2` on the real line.
pub fn scalar_problem() -> GenEqProblem {
    let map = ClosureMap::new(
        Chart::Euclid(1),
        1,
        |p| Ok(DVector::from_element(1, p.coords()[0] * p.coords()[0] - 2.0)),
        |p| Ok(vec![TangentVector::from_slice(p.clone(), &[2.0 * p.coords()[0]])?]),
    );
    let solution = ProductPoint::plain(ManifoldPoint::euclid(&[2f64.sqrt()]));
    GenEqProblem::new(Arc::new(map), SetValuedPart::Zero, FrameField::Canonical)
        .expect("scalar map dimensions are consistent")
        .with_solution(solution)
}

fn rate_row(problem: &str, rule: &str, report: &SolveReport, reference: Option<&ProductPoint>) -> RateRow {
    let estimate = if report.converged() { estimate_rate(&report.history, reference).ok() } else { None };
    let (class, order, linear_ratio, quadratic_ratio, used) = match &estimate {
        Some(RateEstimate { class, order, linear_ratio, quadratic_ratio, used }) => {
            (class.as_str().to_string(), *order, *linear_ratio, *quadratic_ratio, *used)
        }
        None => ("inconclusive".to_string(), f64::NAN, f64::NAN, f64::NAN, 0),
    };
    RateRow {
        problem: problem.into(),
        rule: rule.into(),
        status: report.status.as_str().into(),
        iterations: report.iterations,
        class,
        order,
        linear_ratio,
        quadratic_ratio,
        used,
    }
}

/// Runs the scalar problem under exact, fixed-decay and both proximity
/// rules, and the Karcher case of the config under the exact rule, and
/// estimates each convergence rate against the known or converged solution.
pub fn run_rate_study(config: &ExperimentConfig) -> Result<Vec<RateRow>> {
    config.validate()?;
    let scalar = scalar_problem();
    let reference = scalar.solution.clone().expect("scalar problem carries its solution");
    let start = ProductPoint::plain(ManifoldPoint::euclid(&[config.start]));
    let rules = [
        RuleSpec::Exact,
        RuleSpec::FixedDecay { c: 1.0, rho: 0.1 },
        RuleSpec::ProximityLinear { iota: config.iota },
        RuleSpec::ProximityQuadratic { iota: config.iota },
    ];
    let mut rows = Vec::new();
    for spec in rules {
        let rule = spec.build(Some(&reference))?;
        let report = solve(&scalar, start.clone(), &rule, &config.stop)?;
        rows.push(rate_row("scalar", &spec.to_string(), &report, Some(&reference)));
    }

    let mut karcher = config.clone();
    karcher.kind = ExperimentKind::KarcherKkt;
    if case_preset(&karcher.case).is_none() {
        karcher = ExperimentConfig { seed: config.seed, ..ExperimentConfig::karcher_case("A1")? };
    }
    rows.push(karcher_rate_row(&karcher)?);
    Ok(rows)
}

/// Exact Newton from every sample point of the case, with the per-step
/// orders pooled: a single run reaches rounding level after three or four
/// steps, too few distances for an estimate of its own.
fn karcher_rate_row(config: &ExperimentConfig) -> Result<RateRow> {
    let points = case_points(config.n_points, config.seed)?;
    let (problem, start) = karcher_setup(config)?;
    let reference_run = solve(&problem, start, &InexactnessRule::Exact, &config.stop)?;
    let problem_name = format!("karcher_{}", config.case);
    if !reference_run.converged() {
        return Ok(rate_row(&problem_name, "exact", &reference_run, None));
    }
    let reference = reference_run.final_point.clone();
    let mut sequences = Vec::new();
    let mut iterations = 0;
    for p in points.iter().take(RATE_STUDY_STARTS) {
        let report = solve(&problem, ProductPoint::new(p.clone(), vec![0.0]), &InexactnessRule::Exact, &config.stop)?;
        if !report.converged() || product_dist(&report.final_point, &reference)? > RATE_STUDY_AGREEMENT {
            continue;
        }
        iterations = iterations.max(report.iterations);
        sequences
            .push(report.history.iter().map(|r| product_dist(&r.point, &reference)).collect::<Result<Vec<f64>>>()?);
    }
    let views: Vec<&[f64]> = sequences.iter().map(Vec::as_slice).collect();
    let est = estimate_rate_pooled(&views, DEFAULT_RATE_FLOOR)?;
    Ok(RateRow {
        problem: problem_name,
        rule: "exact".into(),
        status: reference_run.status.as_str().into(),
        iterations,
        class: est.class.as_str().into(),
        order: est.order,
        linear_ratio: est.linear_ratio,
        quadratic_ratio: est.quadratic_ratio,
        used: est.used,
    })
}

/// Runs the certified probe of each requested variant.
pub fn run_probes(config: &ExperimentConfig) -> Result<Vec<ProbeReport>> {
    let variants = match config.variant {
        Some(v) => vec![v],
        None => MapVariant::ALL.to_vec(),
    };
    variants
        .into_iter()
        .map(|v| {
            let mut probe =
                RegularityProbe::certified(v, config.matrix_size, config.ball_radius, config.samples, config.seed)?;
            if let Some(sigma) = config.sigma {
                probe.sigma = sigma;
            }
            verify_regularity(&probe)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateOutcome {
    pub start: f64,
    pub status: String,
    pub iterations: usize,
    pub certificate: CertificateReport,
}

/// Solves the scalar problem exactly from `config.start` and checks the
/// run against the semi-local bounds of `config.constants`.
pub fn run_certificate(config: &ExperimentConfig) -> Result<CertificateOutcome> {
    let problem = scalar_problem();
    let start = ProductPoint::plain(ManifoldPoint::euclid(&[config.start]));
    let y0 = problem.value(&start)?;
    let report = solve(&problem, start, &InexactnessRule::Exact, &config.stop)?;
    let certificate = semilocal_certificate(&config.constants, &y0, &DVector::zeros(1), &report.history)?;
    Ok(CertificateOutcome {
        start: config.start,
        status: report.status.as_str().into(),
        iterations: report.iterations,
        certificate,
    })
}

/// Residual-norm curve of a run: `(k, ‖Φ‖)`.
pub fn residual_curve(history: &[IterateRecord]) -> Vec<(usize, f64)> {
    history.iter().map(|r| (r.k, r.norm_phi)).collect()
}
