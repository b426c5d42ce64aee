//! Parameter sweeps over λ̄² and detection of the symmetry-breaking threshold.
//!
//! Every sweep point starts afresh from the symmetric initial data plus a small
//! even bump. On a mirror-symmetric grid the odd symmetry of the saddle is
//! preserved exactly in floating point, so without the bump an unstable saddle
//! would never be left.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::boundary::{ScalarBc, TensorBc};
use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::flow::FlowConfig;
use crate::full_flow::{evolve_full, hexagon_initial};
use crate::grid::GridDomain;
use crate::scalar_flow::{evolve, initial_cross, symmetry_bump};
use crate::tensor::MaterialParams;

/// Relative size of the symmetry-breaking bump, in units of `B/2C`.
pub const DEFAULT_PERTURBATION: f64 = 1e-4;

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "NEMATIC_OR_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub lambda_bar_sq: f64,
    /// Values at the origin: `(q, 0, 0)` for the scalar sweep,
    /// `(Q12, Q11 − B/6C, Q22 − B/6C)` for the hexagon.
    pub probes: [f64; 3],
    pub residual: f64,
    pub converged: bool,
    pub steps: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl SweepRecord {
    /// Largest probe magnitude; NaN for a diverged run.
    pub fn magnitude(&self) -> f64 {
        if self.probes.iter().any(|p| !p.is_finite()) {
            return f64::NAN;
        }
        self.probes.iter().fold(0.0, |m, p| m.max(p.abs()))
    }
}

fn check_ladder(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return invalid("empty lambda_bar_sq list");
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return invalid("lambda_bar_sq values must be finite and non-negative");
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("lambda_bar_sq list must be strictly increasing");
    }
    Ok(())
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => b = b.num_threads(n),
            _ => return invalid(format!("{THREADS_ENV} = {v:?} is not a positive integer")),
        }
    }
    b.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Runs `point` for every λ̄² on the sweep pool. Results come back in input
/// order whatever the completion order.
fn run_points(lambdas: &[f64], point: impl Fn(f64) -> Result<SweepRecord> + Sync) -> Result<Vec<SweepRecord>> {
    check_ladder(lambdas)?;
    let pool = pool()?;
    pool.install(|| lambdas.par_iter().map(|&l| point(l)).collect())
}

fn diverged(lambda_bar_sq: f64, started: Instant, step: usize) -> SweepRecord {
    SweepRecord {
        lambda_bar_sq,
        probes: [f64::NAN; 3],
        residual: f64::NAN,
        converged: false,
        steps: step,
        wall_time: started.elapsed().as_secs_f64(),
    }
}

/// Scalar sweep on the square (scalar convention `λ̄² = 2Cλ²/L`). The probe is
/// `q(0,0)`.
pub fn sweep_square(
    lambdas: &[f64],
    grid: Arc<GridDomain>,
    bc: &ScalarBc,
    params: &MaterialParams,
    cfg: &FlowConfig,
    perturbation: f64,
) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let a = params.scalar_well();
    let cross = initial_cross(grid.clone(), params)?;
    let bump = symmetry_bump(grid.clone());
    let values: Vec<f64> =
        cross.values().iter().zip(bump.values()).map(|(c, b)| c + perturbation * a * b).collect();
    let q0 = ScalarField::new(grid, values)?;
    run_points(lambdas, |l| {
        let started = Instant::now();
        match evolve(&q0, bc, l, params, cfg) {
            Ok(run) => Ok(SweepRecord {
                lambda_bar_sq: l,
                probes: [run.field.at_origin(), 0.0, 0.0],
                residual: run.diagnostics.residual,
                converged: run.diagnostics.converged(),
                steps: run.diagnostics.steps,
                wall_time: started.elapsed().as_secs_f64(),
            }),
            Err(Error::Divergence { step, .. }) => {
                log::warn!("lambda_bar_sq = {l}: run diverged at step {step}");
                Ok(diverged(l, started, step))
            }
            Err(e) => Err(e),
        }
    })
}

/// Full-tensor sweep on the hexagon (convention `λ̄² = λ²/L`). The bump is
/// added to `Q12`.
pub fn sweep_hexagon(
    lambdas: &[f64],
    grid: Arc<GridDomain>,
    bc: &TensorBc,
    params: &MaterialParams,
    cfg: &FlowConfig,
    perturbation: f64,
) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let a = params.scalar_well();
    let base = hexagon_initial(grid.clone(), params)?;
    let bump = symmetry_bump(grid.clone());
    let mut q0: TensorField = base;
    for (q, b) in q0.values_mut().iter_mut().zip(bump.values()) {
        q.0[1] += perturbation * a * b;
    }
    let third = params.b() / (6.0 * params.c());
    run_points(lambdas, |l| {
        let started = Instant::now();
        match evolve_full(&q0, bc, params, l, cfg) {
            Ok(run) => {
                let o = run.field.at_origin();
                Ok(SweepRecord {
                    lambda_bar_sq: l,
                    probes: [o.0[1], o.0[0] - third, o.0[3] - third],
                    residual: run.diagnostics.residual,
                    converged: run.diagnostics.converged(),
                    steps: run.diagnostics.steps,
                    wall_time: started.elapsed().as_secs_f64(),
                })
            }
            Err(Error::Divergence { step, .. }) => {
                log::warn!("lambda_bar_sq = {l}: run diverged at step {step}");
                Ok(diverged(l, started, step))
            }
            Err(e) => Err(e),
        }
    })
}

/// Threshold estimate from a sweep, optionally cross-checked against the
/// sign change of the stability eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalEstimate {
    /// Linear interpolation of the probe magnitude at the threshold.
    pub lambda_bar_sq: f64,
    /// Ladder samples on either side of the crossing.
    pub bracket: (f64, f64),
    /// Ladder interval over which `μ` changes sign.
    pub mu_interval: Option<(f64, f64)>,
    /// Linear interpolation of the zero of `μ`.
    pub mu_root: Option<f64>,
    /// Whether the probe estimate lies in `mu_interval` widened by 15 % at
    /// each end.
    pub consistent: Option<bool>,
}

/// Relative widening of the eigenvalue interval used by the consistency test.
pub const CONSISTENCY_MARGIN: f64 = 0.15;

/// First upward crossing of `threshold` by the probe magnitude, ignoring
/// diverged records. `mu_samples` holds `(λ̄², μ)` pairs in the same convention
/// and may be empty.
pub fn detect_critical(records: &[SweepRecord], threshold: f64, mu_samples: &[(f64, f64)]) -> Result<CriticalEstimate> {
    let pts: Vec<(f64, f64)> =
        records.iter().map(|r| (r.lambda_bar_sq, r.magnitude())).filter(|(_, m)| m.is_finite()).collect();
    if pts.windows(2).any(|w| w[0].0 >= w[1].0) {
        return invalid("sweep records must be sorted by lambda_bar_sq");
    }
    let i = pts
        .windows(2)
        .position(|w| w[0].1 < threshold && w[1].1 >= threshold)
        .ok_or(Error::NoBifurcationInRange { threshold })?;
    let ((l0, m0), (l1, m1)) = (pts[i], pts[i + 1]);
    let est = l0 + (threshold - m0) * (l1 - l0) / (m1 - m0);

    let (mu_interval, mu_root) = match mu_sign_change(mu_samples) {
        Some((lo, hi, root)) => (Some((lo, hi)), Some(root)),
        None => (None, None),
    };
    let consistent = mu_interval
        .map(|(lo, hi)| est >= lo * (1.0 - CONSISTENCY_MARGIN) && est <= hi * (1.0 + CONSISTENCY_MARGIN));
    Ok(CriticalEstimate { lambda_bar_sq: est, bracket: (l0, l1), mu_interval, mu_root, consistent })
}

/// First interval on which `μ` goes from positive to non-positive, with the
/// linearly interpolated zero.
pub fn mu_sign_change(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    samples.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| {
        let ((l0, m0), (l1, m1)) = (w[0], w[1]);
        (l0, l1, l0 + m0 * (l1 - l0) / (m0 - m1))
    })
}

/// Default probe threshold: 5 % of `B/2C`.
pub fn default_threshold(params: &MaterialParams) -> f64 {
    0.05 * params.scalar_well()
}
