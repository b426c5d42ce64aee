//! Command dispatch for the `nematic-or` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::boundary::{hexagon_bc, square_scalar_bc, truncated_square_bc, ScalarBc, TensorBc};
use crate::config::{DomainChoice, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::flow::Diagnostics;
use crate::full_flow::{embed_scalar_bc, embed_scalar_field, evolve_full, hexagon_initial};
use crate::grid::{hexagon_grid_with, square_grid, truncated_square_grid, GridDomain};
use crate::io::{self, DomainData, OutputSet};
use crate::scalar_flow::{evolve, initial_cross, monotonicity_check, saddle_solve, symmetry_bump};
use crate::sharp_interface::{j_functional, large_lambda_consistency, surface_tension, Phase, TwoPhaseField};
use crate::stability::{eigensolve_mu, EigenResult};
use crate::sweep::{default_threshold, detect_critical, sweep_hexagon, sweep_square, CriticalEstimate};
use crate::tensor::MaterialParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    RunScalar,
    RunFull,
    Saddle,
    SweepSquare,
    SweepHexagon,
    EigenMu,
    GammaCheck,
    EmitDomain,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::RunScalar,
        Command::RunFull,
        Command::Saddle,
        Command::SweepSquare,
        Command::SweepHexagon,
        Command::EigenMu,
        Command::GammaCheck,
        Command::EmitDomain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::RunScalar => "run-scalar",
            Command::RunFull => "run-full",
            Command::Saddle => "saddle",
            Command::SweepSquare => "sweep-square",
            Command::SweepHexagon => "sweep-hexagon",
            Command::EigenMu => "eigen-mu",
            Command::GammaCheck => "gamma-check",
            Command::EmitDomain => "emit-domain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Whether every flow in the run reached its steady tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    TimedOut,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::TimedOut => 2,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::TimedOut => "timeout",
        }
    }

    fn from_flags(all_converged: bool) -> Self {
        if all_converged {
            RunStatus::Converged
        } else {
            RunStatus::TimedOut
        }
    }
}

pub fn build_grid(cfg: &RunConfig) -> Result<Arc<GridDomain>> {
    let g = match cfg.domain {
        DomainChoice::Square => square_grid(cfg.n)?,
        DomainChoice::TruncatedSquare => truncated_square_grid(cfg.n, cfg.eps)?,
        DomainChoice::Hexagon => hexagon_grid_with(cfg.n, cfg.eps, cfg.theta_min)?,
    };
    Ok(Arc::new(g))
}

pub fn scalar_bc(cfg: &RunConfig, grid: &GridDomain, params: &MaterialParams) -> Result<ScalarBc> {
    match cfg.domain {
        DomainChoice::Square => square_scalar_bc(grid, cfg.eps, params),
        DomainChoice::TruncatedSquare => truncated_square_bc(grid, params),
        DomainChoice::Hexagon => invalid("the scalar problem is not posed on the hexagon"),
    }
}

fn tensor_bc(cfg: &RunConfig, grid: &GridDomain, params: &MaterialParams) -> Result<TensorBc> {
    match cfg.domain {
        DomainChoice::Hexagon => hexagon_bc(grid, params),
        _ => Ok(embed_scalar_bc(&scalar_bc(cfg, grid, params)?, params)),
    }
}

/// Saddle-patterned cross plus the even bump scaled by `perturbation · B/2C`.
pub fn perturbed_cross(grid: Arc<GridDomain>, params: &MaterialParams, perturbation: f64) -> Result<ScalarField> {
    let a = params.scalar_well();
    let cross = initial_cross(grid.clone(), params)?;
    let bump = symmetry_bump(grid.clone());
    let v = cross.values().iter().zip(bump.values()).map(|(c, b)| c + perturbation * a * b).collect();
    ScalarField::new(grid, v)
}

fn tensor_initial(cfg: &RunConfig, grid: Arc<GridDomain>, params: &MaterialParams) -> Result<TensorField> {
    match cfg.domain {
        DomainChoice::Hexagon => {
            let a = params.scalar_well();
            let bump = symmetry_bump(grid.clone());
            let mut q = hexagon_initial(grid, params)?;
            for (v, b) in q.values_mut().iter_mut().zip(bump.values()) {
                v.0[1] += cfg.perturbation * a * b;
            }
            Ok(q)
        }
        _ => Ok(embed_scalar_field(&perturbed_cross(grid, params, cfg.perturbation)?, params)),
    }
}

struct Report {
    status: RunStatus,
    summary: BTreeMap<String, String>,
}

fn summary_of(d: &Diagnostics) -> BTreeMap<String, String> {
    let mut s = BTreeMap::new();
    s.insert("steps".into(), d.steps.to_string());
    s.insert("t".into(), io::fmt_f(d.t));
    s.insert("dt".into(), io::fmt_f(d.dt));
    s.insert("residual".into(), io::fmt_f(d.residual));
    s
}

const TENSOR_MONITORS: [&str; 3] = ["q33_deviation", "q13_max", "q23_max"];

/// Runs `command` and writes its outputs plus `manifest.json` into `out`.
/// On error every file written so far is removed again.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<RunStatus> {
    let started = Instant::now();
    let mut set = OutputSet::create(out)?;
    match dispatch(command, cfg, &mut set) {
        Ok(rep) => {
            let mut summary = rep.summary;
            summary.insert("seed".into(), cfg.seed.to_string());
            set.finish(command.name(), &cfg.echo, started.elapsed().as_secs_f64(), rep.status.name(), &summary)?;
            Ok(rep.status)
        }
        Err(e) => {
            set.discard();
            Err(e)
        }
    }
}

fn dispatch(command: Command, cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    match command {
        Command::EmitDomain => emit_domain(cfg, set),
        Command::RunScalar => run_scalar(cfg, set),
        Command::Saddle => saddle(cfg, set),
        Command::RunFull => run_full(cfg, set),
        Command::SweepSquare => sweep_sq(cfg, set),
        Command::SweepHexagon => sweep_hex(cfg, set),
        Command::EigenMu => eigen_mu(cfg, set),
        Command::GammaCheck => gamma_check(cfg, set),
    }
}

fn emit_domain(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    let params = cfg.params()?;
    let grid = build_grid(cfg)?;
    let csv = match cfg.domain {
        DomainChoice::Hexagon => io::domain_csv(&grid, DomainData::Tensor(&hexagon_bc(&grid, &params)?)),
        _ => io::domain_csv(&grid, DomainData::Scalar(&scalar_bc(cfg, &grid, &params)?)),
    };
    set.write("domain.csv", csv)?;
    let mut summary = BTreeMap::new();
    let interior = grid.interior_count();
    let boundary = (0..grid.len()).filter(|&k| grid.is_boundary(k)).count();
    summary.insert("interior_nodes".into(), interior.to_string());
    summary.insert("boundary_nodes".into(), boundary.to_string());
    summary.insert("h".into(), io::fmt_f(grid.h()));
    Ok(Report { status: RunStatus::Converged, summary })
}

fn run_scalar(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    cfg.single_size()?;
    let params = cfg.params()?;
    let l = params.lambda_bar_sq_scalar();
    let grid = build_grid(cfg)?;
    let bc = scalar_bc(cfg, &grid, &params)?;
    let q0 = perturbed_cross(grid, &params, cfg.perturbation)?;
    let r = evolve(&q0, &bc, l, &params, &cfg.flow)?;
    set.write("field.csv", io::scalar_field_csv(&r.field))?;
    set.write("diagnostics.csv", io::diagnostics_csv(&r.diagnostics, &[]))?;
    let mut summary = summary_of(&r.diagnostics);
    summary.insert("lambda_bar_sq_scalar".into(), io::fmt_f(l));
    summary.insert("q_origin".into(), io::fmt_f(r.field.at_origin()));
    Ok(Report { status: RunStatus::from_flags(r.diagnostics.converged()), summary })
}

fn saddle(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    cfg.single_size()?;
    let params = cfg.params()?;
    let l = params.lambda_bar_sq_scalar();
    let grid = build_grid(cfg)?;
    let bc = scalar_bc(cfg, &grid, &params)?;
    let r = saddle_solve(l, grid, &bc, &params, &cfg.flow)?;
    let mono = monotonicity_check(&r.field)?;
    set.write("field.csv", io::scalar_field_csv(&r.field))?;
    set.write("diagnostics.csv", io::diagnostics_csv(&r.diagnostics, &[]))?;
    let mut summary = summary_of(&r.diagnostics);
    summary.insert("lambda_bar_sq_scalar".into(), io::fmt_f(l));
    summary.insert("monotonicity_checked".into(), mono.checked.to_string());
    summary.insert("monotonicity_violations".into(), mono.violations.len().to_string());
    Ok(Report { status: RunStatus::from_flags(r.diagnostics.converged()), summary })
}

fn run_full(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    cfg.single_size()?;
    let params = cfg.params()?;
    let l = params.lambda_sq_over_l();
    let grid = build_grid(cfg)?;
    let bc = tensor_bc(cfg, &grid, &params)?;
    let q0 = tensor_initial(cfg, grid, &params)?;
    let r = evolve_full(&q0, &bc, &params, l, &cfg.flow)?;
    set.write("field.csv", io::tensor_field_csv(&r.field))?;
    set.write("diagnostics.csv", io::diagnostics_csv(&r.diagnostics, &TENSOR_MONITORS))?;
    let mut summary = summary_of(&r.diagnostics);
    summary.insert("lambda_bar_sq_full".into(), io::fmt_f(l));
    let o = r.field.at_origin();
    for (i, v) in o.0.iter().enumerate() {
        summary.insert(format!("origin_q{}", i + 1), io::fmt_f(*v));
    }
    Ok(Report { status: RunStatus::from_flags(r.diagnostics.converged()), summary })
}

fn mu_ladder(
    cfg: &RunConfig,
    grid: &Arc<GridDomain>,
    bc: &ScalarBc,
    params: &MaterialParams,
    lambdas: &[f64],
) -> Result<Vec<(f64, EigenResult)>> {
    let mut out = Vec::new();
    for &l in lambdas {
        let s = saddle_solve(l, grid.clone(), bc, params, &cfg.flow)?;
        if !s.diagnostics.converged() {
            log::warn!("saddle at lambda_bar_sq = {l} did not converge; skipping its eigenvalue");
            continue;
        }
        let e = eigensolve_mu(&s.field, l / (2.0 * params.c()), params)?;
        out.push((l, e));
    }
    Ok(out)
}

fn critical_or_none(
    records: &[crate::sweep::SweepRecord],
    threshold: f64,
    mu: &[(f64, f64)],
) -> Result<Option<CriticalEstimate>> {
    match detect_critical(records, threshold, mu) {
        Ok(c) => Ok(Some(c)),
        Err(Error::NoBifurcationInRange { threshold }) => {
            log::warn!("no probe crossing of {threshold} in the sweep range");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn sweep_summary(records: &[crate::sweep::SweepRecord], critical: Option<&CriticalEstimate>) -> BTreeMap<String, String> {
    let mut s = BTreeMap::new();
    s.insert("points".into(), records.len().to_string());
    s.insert("converged_points".into(), records.iter().filter(|r| r.converged).count().to_string());
    s.insert(
        "critical_lambda_bar_sq".into(),
        critical.map_or_else(|| "none".to_string(), |c| io::fmt_f(c.lambda_bar_sq)),
    );
    if let Some(ok) = critical.and_then(|c| c.consistent) {
        s.insert("consistent_with_mu".into(), ok.to_string());
    }
    s
}

fn sweep_sq(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    if cfg.domain != DomainChoice::Square {
        return invalid("sweep-square needs domain = square");
    }
    let params = cfg.params()?;
    let lambdas = cfg.sizes_scalar();
    let grid = build_grid(cfg)?;
    let bc = scalar_bc(cfg, &grid, &params)?;
    let records = sweep_square(&lambdas, grid.clone(), &bc, &params, &cfg.flow, cfg.perturbation)?;
    let mut mu = Vec::new();
    if cfg.mu_check {
        let ladder = mu_ladder(cfg, &grid, &bc, &params, &lambdas)?;
        let rows: Vec<(f64, &EigenResult)> = ladder.iter().map(|(l, e)| (*l, e)).collect();
        set.write("eigen.csv", io::eigen_csv(&rows))?;
        mu = ladder.iter().map(|(l, e)| (*l, e.mu)).collect();
    }
    let threshold = cfg.threshold.unwrap_or_else(|| default_threshold(&params));
    let critical = critical_or_none(&records, threshold, &mu)?;
    set.write("sweep.csv", io::sweep_csv(&records, critical.as_ref()))?;
    let mut summary = sweep_summary(&records, critical.as_ref());
    summary.insert("threshold".into(), io::fmt_f(threshold));
    Ok(Report { status: RunStatus::from_flags(records.iter().all(|r| r.converged)), summary })
}

fn sweep_hex(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    if cfg.domain != DomainChoice::Hexagon {
        return invalid("sweep-hexagon needs domain = hexagon");
    }
    let params = cfg.params()?;
    let lambdas = cfg.sizes_full();
    let grid = build_grid(cfg)?;
    let bc = hexagon_bc(&grid, &params)?;
    let records = sweep_hexagon(&lambdas, grid, &bc, &params, &cfg.flow, cfg.perturbation)?;
    let threshold = cfg.threshold.unwrap_or_else(|| default_threshold(&params));
    let critical = critical_or_none(&records, threshold, &[])?;
    set.write("sweep.csv", io::sweep_csv(&records, critical.as_ref()))?;
    let mut summary = sweep_summary(&records, critical.as_ref());
    summary.insert("threshold".into(), io::fmt_f(threshold));
    Ok(Report { status: RunStatus::from_flags(records.iter().all(|r| r.converged)), summary })
}

fn eigen_mu(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    let params = cfg.params()?;
    let lambdas = cfg.sizes_scalar();
    let grid = build_grid(cfg)?;
    let bc = scalar_bc(cfg, &grid, &params)?;
    if cfg.domain == DomainChoice::TruncatedSquare && lambdas.len() > 1 {
        return invalid("eigen-mu on the truncated square takes a single size (its boundary data depend on it)");
    }
    let ladder = mu_ladder(cfg, &grid, &bc, &params, &lambdas)?;
    let rows: Vec<(f64, &EigenResult)> = ladder.iter().map(|(l, e)| (*l, e)).collect();
    set.write("eigen.csv", io::eigen_csv(&rows))?;
    if let [(_, e)] = ladder.as_slice() {
        set.write("eta.csv", io::scalar_field_csv(&e.eta).replacen("x,y,q", "x,y,eta", 1))?;
    }
    let mut summary = BTreeMap::new();
    summary.insert("points".into(), ladder.len().to_string());
    let mu: Vec<(f64, f64)> = ladder.iter().map(|(l, e)| (*l, e.mu)).collect();
    if let Some((lo, hi, root)) = crate::sweep::mu_sign_change(&mu) {
        summary.insert("mu_sign_change".into(), format!("{},{}", io::fmt_f(lo), io::fmt_f(hi)));
        summary.insert("mu_root".into(), io::fmt_f(root));
    }
    Ok(Report { status: RunStatus::from_flags(ladder.len() == lambdas.len()), summary })
}

fn gamma_check(cfg: &RunConfig, set: &mut OutputSet) -> Result<Report> {
    if cfg.domain != DomainChoice::TruncatedSquare {
        return invalid("gamma-check needs domain = truncated-square");
    }
    cfg.single_size()?;
    let params = cfg.params()?;
    let l = params.lambda_bar_sq_scalar();
    let grid = build_grid(cfg)?;
    let bc = scalar_bc(cfg, &grid, &params)?;
    let eps = match grid.kind() {
        crate::grid::DomainKind::TruncatedSquare { eps } => eps,
        _ => unreachable!(),
    };
    let q0 = perturbed_cross(grid.clone(), &params, cfg.perturbation)?;
    let r = evolve(&q0, &bc, l, &params, &cfg.flow)?;
    let zero_tol = 1e-3 * params.scalar_well();
    let rep = large_lambda_consistency(&r.field, &bc, &params, l, zero_tol)?;
    let k = surface_tension(&params);
    let j_const = j_functional(&TwoPhaseField::constant(grid, Phase::Plus), &bc, &params)?.total;
    let bound_const = 2.0 * 2f64.sqrt() * k * (1.0 - eps) + 8.0 * k * eps;
    let cross_lower = 4.0 * k * (1.0 - eps);

    let mut csv = String::from(
        "lambda_bar_sq,eps,k,j_constant,bound_constant,cross_lower_bound,j_cross,j_observed,cross_agreement,applicable,holds\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        io::fmt_f(l),
        io::fmt_f(eps),
        io::fmt_f(k),
        io::fmt_f(j_const),
        io::fmt_f(bound_const),
        io::fmt_f(cross_lower),
        io::fmt_f(rep.j_cross),
        io::fmt_f(rep.j_observed),
        io::fmt_f(rep.cross_agreement),
        rep.applicable,
        rep.holds
    ));
    set.write("gamma.csv", csv)?;
    let mut text = String::new();
    for (key, v) in [
        ("lambda_bar_sq", io::fmt_f(l)),
        ("eps", io::fmt_f(eps)),
        ("k", io::fmt_f(k)),
        ("j_constant", io::fmt_f(j_const)),
        ("j_constant_bound", io::fmt_f(bound_const)),
        ("cross_lower_bound", io::fmt_f(cross_lower)),
        ("j_cross", io::fmt_f(rep.j_cross)),
        ("j_observed", io::fmt_f(rep.j_observed)),
        ("observed_is_cross", rep.observed_is_cross.to_string()),
        ("applicable", rep.applicable.to_string()),
        ("holds", rep.holds.to_string()),
    ] {
        text.push_str(&format!("{key}={v}\n"));
    }
    for n in &rep.notes {
        text.push_str(&format!("note={n}\n"));
    }
    set.write("report.txt", text)?;
    let mut summary = summary_of(&r.diagnostics);
    summary.insert("holds".into(), rep.holds.to_string());
    Ok(Report { status: RunStatus::from_flags(r.diagnostics.converged()), summary })
}
