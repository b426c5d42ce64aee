//! Linear stability of a scalar critical point: the operator
//! `−Δη + (λ²/L)(6C q² − B²/2C) η` with zero Dirichlet data and its smallest
//! eigenvalue `μ`.

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::grid::GridDomain;
use crate::scalar_flow::{lap, prepare_rows, PreparedRow};
use crate::tensor::MaterialParams;

/// Converged eigenpair. `eta` is normalized to `h² Σ η² = 1` and is
/// non-negative.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub mu: f64,
    pub eta: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub cg_tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { tol: 1e-8, max_iterations: 2000, cg_tol: 1e-13 }
    }
}

/// The second variation as a matrix-free operator on node vectors that vanish
/// off the interior.
struct Hessian {
    rows: Vec<PreparedRow>,
    potential: Vec<f64>,
    len: usize,
    h2: f64,
}

impl Hessian {
    fn new(q_s: &ScalarField, lambda_sq_over_l: f64, params: &MaterialParams) -> Result<Self> {
        let grid = q_s.grid();
        if !grid.is_uniform() {
            return invalid("second variation needs a grid without cut-cell arms");
        }
        if !(lambda_sq_over_l >= 0.0 && lambda_sq_over_l.is_finite()) {
            return invalid(format!("lambda^2/L = {lambda_sq_over_l} must be finite and non-negative"));
        }
        let (b, c) = (params.b(), params.c());
        let rows = prepare_rows(grid);
        let mut potential = vec![0.0; grid.len()];
        for r in &rows {
            let q = q_s.value(r.k);
            potential[r.k] = lambda_sq_over_l * (6.0 * c * q * q - b * b / (2.0 * c));
        }
        Ok(Hessian { rows, potential, len: grid.len(), h2: grid.h() * grid.h() })
    }

    fn apply(&self, eta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in &self.rows {
            out[r.k] = -lap(r, eta) + self.potential[r.k] * eta[r.k];
        }
    }

    fn min_potential(&self) -> f64 {
        self.rows.iter().map(|r| self.potential[r.k]).fold(f64::INFINITY, f64::min)
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h2 * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }
}

fn check_boundary_zero(eta: &ScalarField) -> Result<()> {
    let grid = eta.grid();
    for k in 0..grid.len() {
        if !grid.is_interior(k) && eta.value(k) != 0.0 {
            let (x, y) = grid.xy(k);
            return invalid(format!("eta = {} at non-interior node ({x}, {y}); must vanish there", eta.value(k)));
        }
    }
    Ok(())
}

/// `−Δη + (λ²/L)(6C q_s² − B²/2C) η` at interior nodes, zero elsewhere.
pub fn second_variation_apply(
    eta: &ScalarField,
    q_s: &ScalarField,
    lambda_sq_over_l: f64,
    params: &MaterialParams,
) -> Result<ScalarField> {
    check_boundary_zero(eta)?;
    let op = Hessian::new(q_s, lambda_sq_over_l, params)?;
    let mut out = vec![0.0; op.len];
    op.apply(eta.values(), &mut out);
    ScalarField::new(eta.grid().clone(), out)
}

/// `⟨Aξ, ξ⟩ / ⟨ξ, ξ⟩` for a field vanishing off the interior.
pub fn rayleigh_quotient(
    xi: &ScalarField,
    q_s: &ScalarField,
    lambda_sq_over_l: f64,
    params: &MaterialParams,
) -> Result<f64> {
    check_boundary_zero(xi)?;
    let op = Hessian::new(q_s, lambda_sq_over_l, params)?;
    let mut a = vec![0.0; op.len];
    op.apply(xi.values(), &mut a);
    let nn = op.dot(xi.values(), xi.values());
    if nn == 0.0 {
        return invalid("Rayleigh quotient of the zero field");
    }
    Ok(op.dot(&a, xi.values()) / nn)
}

/// The quadratic form `∫ |∇η|² + (λ²/L)(6C q² − B²/2C) η²` in its discrete
/// edge form, independent of the operator route above.
pub fn second_variation_form(
    eta: &ScalarField,
    q_s: &ScalarField,
    lambda_sq_over_l: f64,
    params: &MaterialParams,
) -> Result<f64> {
    check_boundary_zero(eta)?;
    let grid = eta.grid();
    let (b, c) = (params.b(), params.c());
    let u = eta.values();
    let grad: f64 = grid.edges().iter().map(|&(i, j)| (u[i] - u[j]).powi(2)).sum();
    let h2 = grid.h() * grid.h();
    let pot: f64 = (0..grid.len())
        .filter(|&k| grid.is_interior(k))
        .map(|k| {
            let q = q_s.value(k);
            lambda_sq_over_l * (6.0 * c * q * q - b * b / (2.0 * c)) * u[k] * u[k]
        })
        .sum();
    Ok(grad + h2 * pot)
}

enum CgFailure {
    Indefinite,
    Stalled(usize, f64),
}

/// Conjugate gradients for `(A − σ) x = rhs`.
fn cg(op: &Hessian, sigma: f64, rhs: &[f64], x: &mut [f64], tol: f64) -> std::result::Result<usize, CgFailure> {
    let n = op.len;
    let max_iter = 20 * op.rows.len().max(10);
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = (0..n).map(|k| rhs[k] - (ax[k] - sigma * x[k])).collect();
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(it);
        }
        op.apply(&p, &mut ap);
        for row in &op.rows {
            ap[row.k] -= sigma * p[row.k];
        }
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(CgFailure::Indefinite);
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(CgFailure::Stalled(max_iter, rr.sqrt() / bnorm))
}

/// Smallest eigenvalue of the second variation at `q_s`.
///
/// Inverse iteration on `A − σ`, with each linear solve done by conjugate
/// gradients. The shift starts strictly below the spectrum and is then raised
/// toward the Rayleigh quotient while staying a few residuals below it. If a
/// solve meets negative curvature the shift is reset, at most three times.
pub fn eigensolve_mu(q_s: &ScalarField, lambda_sq_over_l: f64, params: &MaterialParams) -> Result<EigenResult> {
    eigensolve_mu_with(q_s, lambda_sq_over_l, params, &EigenConfig::default())
}

pub fn eigensolve_mu_with(
    q_s: &ScalarField,
    lambda_sq_over_l: f64,
    params: &MaterialParams,
    cfg: &EigenConfig,
) -> Result<EigenResult> {
    let grid: &GridDomain = q_s.grid();
    let op = Hessian::new(q_s, lambda_sq_over_l, params)?;
    if op.rows.is_empty() {
        return invalid("grid has no interior nodes");
    }
    let floor = op.min_potential() - 1.0;
    let mut sigma = floor;
    let mut reshifts = 0;

    let mut eta = vec![0.0; op.len];
    for r in &op.rows {
        eta[r.k] = 1.0;
    }
    normalize(&op, &mut eta);
    let mut a_eta = vec![0.0; op.len];
    let mut x = vec![0.0; op.len];
    let mut res = f64::INFINITY;

    for it in 1..=cfg.max_iterations {
        x.copy_from_slice(&eta);
        match cg(&op, sigma, &eta, &mut x, cfg.cg_tol) {
            Ok(_) => {}
            Err(CgFailure::Indefinite) => {
                reshifts += 1;
                if reshifts > 3 {
                    return Err(Error::Solver { what: "shifted operator stayed indefinite".into(), iterations: it, residual: res });
                }
                log::debug!("negative curvature at shift {sigma}; resetting");
                sigma = floor - (reshifts as f64);
                continue;
            }
            Err(CgFailure::Stalled(n, r)) => {
                return Err(Error::Solver { what: "conjugate gradients".into(), iterations: n, residual: r });
            }
        }
        eta.copy_from_slice(&x);
        normalize(&op, &mut eta);
        op.apply(&eta, &mut a_eta);
        let rho = op.dot(&eta, &a_eta);
        let r: Vec<f64> = a_eta.iter().zip(&eta).map(|(a, e)| a - rho * e).collect();
        res = op.dot(&r, &r).sqrt();
        if res < cfg.tol {
            orient_and_check(grid, &mut eta)?;
            let eta = ScalarField::new(q_s.grid().clone(), eta)?;
            return Ok(EigenResult { mu: rho, eta, iterations: it, residual: res });
        }
        // Some eigenvalue lies within `res` of rho, and from a positive start
        // that eigenvalue is the lowest one.
        if reshifts == 0 && res < 0.25 * (rho - sigma) {
            let target = rho - (4.0 * res).max(1e-3 * (1.0 + rho.abs()));
            if target > sigma {
                sigma = target;
            }
        }
    }
    Err(Error::Solver { what: "inverse iteration".into(), iterations: cfg.max_iterations, residual: res })
}

fn normalize(op: &Hessian, v: &mut [f64]) {
    let n = op.dot(v, v).sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

fn orient_and_check(grid: &GridDomain, eta: &mut [f64]) -> Result<()> {
    let s: f64 = eta.iter().sum();
    if s < 0.0 {
        eta.iter_mut().for_each(|v| *v = -*v);
    }
    let peak = eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-6 * peak;
    if let Some(k) = (0..grid.len()).find(|&k| grid.is_interior(k) && eta[k] < -tol) {
        let (x, y) = grid.xy(k);
        return Err(Error::Solver {
            what: format!("eigenfunction changes sign at ({x:.4}, {y:.4})"),
            iterations: 0,
            residual: eta[k],
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::square_grid;
    use std::sync::Arc;

    #[test]
    fn zero_in_zero_out() {
        let g = Arc::new(square_grid(17).unwrap());
        let p = MaterialParams::standard();
        let q = ScalarField::from_fn(g.clone(), |x, y| x * y);
        let out = second_variation_apply(&ScalarField::zeros(g), &q, 3.0, &p).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_boundary_values() {
        let g = Arc::new(square_grid(17).unwrap());
        let p = MaterialParams::standard();
        let eta = ScalarField::from_fn(g.clone(), |_, _| 1.0);
        let q = ScalarField::zeros(g);
        assert!(matches!(second_variation_apply(&eta, &q, 1.0, &p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_well_shifts_spectrum() {
        let g = Arc::new(square_grid(17).unwrap());
        let p = MaterialParams::standard();
        let a = p.scalar_well();
        let l = 2.0;
        let q = ScalarField::from_fn(g.clone(), |_, _| a);
        let mut eta = ScalarField::zeros(g.clone());
        let c = g.origin();
        eta.values_mut()[c] = 1.0;
        let out = second_variation_apply(&eta, &q, l, &p).unwrap();
        let expect = 4.0 / (g.h() * g.h()) + l * p.b() * p.b() / p.c();
        assert!((out.value(c) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn dirichlet_laplacian_ground_state() {
        let g = Arc::new(square_grid(33).unwrap());
        let p = MaterialParams::standard();
        let q = ScalarField::zeros(g.clone());
        let r = eigensolve_mu(&q, 0.0, &p).unwrap();
        // discrete: 2 * (4/h²) sin²(πh/4)
        let h = g.h();
        let exact = 2.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 4.0).sin().powi(2);
        assert!((r.mu - exact).abs() < 1e-7, "{} vs {}", r.mu, exact);
        assert!(r.residual < 1e-8);
        let norm: f64 = h * h * r.eta.values().iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn form_matches_operator() {
        let g = Arc::new(square_grid(17).unwrap());
        let p = MaterialParams::standard();
        let q = ScalarField::from_fn(g.clone(), |x, y| 0.5 * (x - y));
        let mut eta = ScalarField::from_fn(g.clone(), |x, y| (1.0 - x * x) * (1.0 - y * y) * (1.0 + x));
        for k in 0..g.len() {
            if !g.is_interior(k) {
                eta.values_mut()[k] = 0.0;
            }
        }
        let l = 0.7;
        let aeta = second_variation_apply(&eta, &q, l, &p).unwrap();
        let h2 = g.h() * g.h();
        let via_op: f64 = h2 * aeta.values().iter().zip(eta.values()).map(|(a, b)| a * b).sum::<f64>();
        let via_form = second_variation_form(&eta, &q, l, &p).unwrap();
        assert!((via_op - via_form).abs() < 1e-10 * via_form.abs());
    }
}
