//! Reduced scalar problem: the Allen–Cahn flow
//! `∂q/∂t = Δq − λ̄² q (q² − (B/2C)²)` with `λ̄² = 2Cλ²/L`, its energy, the
//! cross-shaped initial data and the saddle construction by a quadrant solve
//! followed by odd reflection.

use std::sync::Arc;

use crate::boundary::ScalarBc;
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::flow::{integrate, max_abs, Diagnostics, FlowConfig, FlowSystem};
use crate::grid::{ArmTarget, DomainKind, GridDomain};
use crate::tensor::MaterialParams;

#[derive(Clone, Copy, Debug)]
pub(crate) struct PreparedRow {
    pub k: usize,
    pub t: [usize; 4],
    pub c: [f64; 4],
    pub diag: f64,
}

pub(crate) fn prepare_rows(grid: &GridDomain) -> Vec<PreparedRow> {
    let n2 = grid.len();
    grid.rows()
        .iter()
        .map(|r| {
            let mut t = [0; 4];
            let mut c = [0.0; 4];
            for (a, arm) in r.arms.iter().enumerate() {
                t[a] = match arm.target {
                    ArmTarget::Node(j) => j,
                    ArmTarget::Point(p) => n2 + p,
                };
                c[a] = arm.coef;
            }
            PreparedRow { k: r.node, t, c, diag: r.diag }
        })
        .collect()
}

/// Five-point (or cut-cell) Laplacian at one row. The two axis pairs are
/// summed separately so that mirror-symmetric data give mirror-symmetric
/// results bit for bit.
#[inline(always)]
pub(crate) fn lap(r: &PreparedRow, u: &[f64]) -> f64 {
    let ex = r.c[0] * u[r.t[0]] + r.c[1] * u[r.t[1]];
    let ey = r.c[2] * u[r.t[2]] + r.c[3] * u[r.t[3]];
    (ex + ey) + r.diag * u[r.k]
}

/// The scalar flow as a [`FlowSystem`] on the state `[nodes | crossing points]`.
pub struct ScalarFlow {
    grid: Arc<GridDomain>,
    rows: Vec<PreparedRow>,
    bc_nodes: Vec<(usize, f64)>,
    bc_points: Vec<f64>,
    lambda_bar_sq: f64,
    well: f64,
}

impl ScalarFlow {
    pub fn new(grid: Arc<GridDomain>, bc: &ScalarBc, lambda_bar_sq: f64, params: &MaterialParams) -> Result<Self> {
        if !(lambda_bar_sq >= 0.0 && lambda_bar_sq.is_finite()) {
            return invalid(format!("lambda_bar_sq = {lambda_bar_sq} must be finite and non-negative"));
        }
        if bc.nodes().len() != grid.len() || bc.points().len() != grid.points().len() {
            return invalid("boundary data does not belong to this grid");
        }
        let rows = prepare_rows(&grid);
        let bc_nodes = (0..grid.len()).filter(|&k| grid.is_boundary(k)).map(|k| (k, bc.node(k))).collect();
        Ok(ScalarFlow {
            rows,
            bc_nodes,
            bc_points: bc.points().to_vec(),
            lambda_bar_sq,
            well: params.scalar_well(),
            grid,
        })
    }

    /// Restricts the evolution to interior nodes selected by `keep`; all other
    /// nodes stay at their initial values.
    pub fn restrict(mut self, keep: impl Fn(f64, f64) -> bool) -> Self {
        let g = self.grid.clone();
        self.rows.retain(|r| {
            let (x, y) = g.xy(r.k);
            keep(x, y)
        });
        self
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    /// Flat state for `field`, with boundary values imposed.
    pub fn state(&self, field: &ScalarField) -> Vec<f64> {
        let mut s = field.values().to_vec();
        for &(k, v) in &self.bc_nodes {
            s[k] = v;
        }
        s.extend_from_slice(&self.bc_points);
        s
    }

    pub fn field(&self, state: &[f64]) -> ScalarField {
        ScalarField::new(self.grid.clone(), state[..self.grid.len()].to_vec()).expect("state length")
    }

    fn density(&self, u: f64) -> f64 {
        let a2 = self.well * self.well;
        self.lambda_bar_sq * (0.5 * u * u * u * u - a2 * u * u)
    }
}

impl FlowSystem for ScalarFlow {
    fn dim(&self) -> usize {
        self.grid.len() + self.bc_points.len()
    }

    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let a2 = self.well * self.well;
        let l = self.lambda_bar_sq;
        for r in &self.rows {
            let q = u[r.k];
            out[r.k] = lap(r, u) - l * (q * (q * q - a2));
        }
    }

    fn energy(&self, u: &[f64]) -> f64 {
        discrete_energy(&self.grid, &u[..self.grid.len()], |v| self.density(v))
    }

    fn stiffness(&self) -> f64 {
        self.grid.laplacian_bound() + 2.0 * self.lambda_bar_sq * self.well * self.well
    }
}

/// `Σ_edges (Δu)² + h² Σ_k w_k V(u_k)`: the Dirichlet integral on the dual
/// cells plus trapezoidal bulk quadrature. On uniform stencils the flow is the
/// exact gradient flow of this sum.
pub(crate) fn discrete_energy(grid: &GridDomain, u: &[f64], density: impl Fn(f64) -> f64) -> f64 {
    let mut grad = 0.0;
    for &(a, b) in grid.edges() {
        let d = u[a] - u[b];
        grad += d * d;
    }
    let mut bulk = 0.0;
    for (k, w) in grid.weights().iter().enumerate() {
        if *w > 0.0 {
            bulk += w * density(u[k]);
        }
    }
    grad + grid.h() * grid.h() * bulk
}

/// Right-hand side of the scalar flow at interior nodes, zero elsewhere.
pub fn ac_rhs(q: &ScalarField, bc: &ScalarBc, lambda_bar_sq: f64, params: &MaterialParams) -> Result<ScalarField> {
    let flow = ScalarFlow::new(q.grid().clone(), bc, lambda_bar_sq, params)?;
    let mut s = q.values().to_vec();
    s.extend_from_slice(bc.points());
    let mut out = vec![0.0; s.len()];
    flow.rhs(&s, &mut out);
    out.truncate(q.grid().len());
    ScalarField::new(q.grid().clone(), out)
}

/// Discrete `H[q] = ∫ |∇q|² + (λ²/L)(C q⁴ − (B²/2C) q²)`.
pub fn energy_h(q: &ScalarField, lambda_sq_over_l: f64, params: &MaterialParams) -> f64 {
    let (b, c) = (params.b(), params.c());
    discrete_energy(q.grid(), q.values(), |v| lambda_sq_over_l * (c * v.powi(4) - b * b / (2.0 * c) * v * v))
}

/// Nodal lines of the saddle solution on a given domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaddleFrame {
    /// Truncated square: the saddle vanishes on `x = 0` and `y = 0`.
    Axes,
    /// Axis-aligned square: the saddle vanishes on `y = ±x`.
    Diagonals,
}

impl SaddleFrame {
    pub fn for_grid(grid: &GridDomain) -> Result<Self> {
        match grid.kind() {
            DomainKind::Square => Ok(SaddleFrame::Diagonals),
            DomainKind::TruncatedSquare { .. } => Ok(SaddleFrame::Axes),
            DomainKind::Hexagon { .. } => invalid("no scalar saddle on the hexagon"),
        }
    }

    /// Function whose sign the saddle shares.
    pub fn sign(&self, x: f64, y: f64) -> f64 {
        match self {
            SaddleFrame::Axes => x * y,
            SaddleFrame::Diagonals => (y - x) * (y + x),
        }
    }

    /// Open sector on which the saddle is positive and which generates the
    /// whole field by odd reflections.
    pub fn in_sector(&self, x: f64, y: f64) -> bool {
        match self {
            SaddleFrame::Axes => x > 0.0 && y > 0.0,
            SaddleFrame::Diagonals => y > x.abs(),
        }
    }

    pub fn on_nodal_line(&self, x: f64, y: f64) -> bool {
        match self {
            SaddleFrame::Axes => x == 0.0 || y == 0.0,
            SaddleFrame::Diagonals => x.abs() == y.abs(),
        }
    }

    /// Sector representative of node `k` and the sign relating the two values.
    pub fn representative(&self, grid: &GridDomain, k: usize) -> (usize, f64) {
        let (x, y) = grid.xy(k);
        if self.on_nodal_line(x, y) {
            return (k, 0.0);
        }
        match self {
            SaddleFrame::Axes => {
                let mut m = k;
                let mut s = 1.0;
                if x < 0.0 {
                    m = grid.mirror_x(m);
                    s = -s;
                }
                if y < 0.0 {
                    m = grid.mirror_y(m);
                    s = -s;
                }
                (m, s)
            }
            SaddleFrame::Diagonals => {
                if y > x.abs() {
                    (k, 1.0)
                } else if -y > x.abs() {
                    (grid.mirror_y(grid.mirror_x(k)), 1.0)
                } else if x > y.abs() {
                    (grid.transpose(k), -1.0)
                } else {
                    (grid.mirror_y(grid.mirror_x(grid.transpose(k))), -1.0)
                }
            }
        }
    }

    /// Reflection across a nodal line, which maps the saddle to minus itself
    /// and exchanges the two post-critical branches: `(x, y) -> (-x, y)` for
    /// [`SaddleFrame::Axes`], `(x, y) -> (y, x)` for [`SaddleFrame::Diagonals`].
    pub fn mirror(&self, grid: &GridDomain, k: usize) -> usize {
        match self {
            SaddleFrame::Axes => grid.mirror_x(k),
            SaddleFrame::Diagonals => grid.transpose(k),
        }
    }
}

/// Initial data with the sign pattern of the saddle and magnitude `B/2C`:
/// on the square `+B/2C` where `|x| < |y|`, `-B/2C` where `|y| < |x|` and 0 on
/// the diagonals; on the truncated square `sign(xy) B/2C`.
pub fn initial_cross(grid: Arc<GridDomain>, params: &MaterialParams) -> Result<ScalarField> {
    let frame = SaddleFrame::for_grid(&grid)?;
    let a = params.scalar_well();
    Ok(ScalarField::from_fn(grid, |x, y| {
        let s = frame.sign(x, y);
        if s > 0.0 {
            a
        } else if s < 0.0 {
            -a
        } else {
            0.0
        }
    }))
}

/// Smooth positive bump `cos(πx/2) cos(πy/2)` on interior nodes, zero
/// elsewhere. Invariant under every reflection of the square, so adding a
/// multiple of it breaks exactly the odd symmetry of the saddle.
pub fn symmetry_bump(grid: Arc<GridDomain>) -> ScalarField {
    let g = grid.clone();
    let mut f = ScalarField::from_fn(grid, |x, y| {
        (std::f64::consts::FRAC_PI_2 * x).cos() * (std::f64::consts::FRAC_PI_2 * y).cos()
    });
    for (k, v) in f.values_mut().iter_mut().enumerate() {
        if !g.is_interior(k) {
            *v = 0.0;
        }
    }
    f
}

/// Result of a scalar evolution.
#[derive(Clone, Debug)]
pub struct ScalarRun {
    pub field: ScalarField,
    pub diagnostics: Diagnostics,
}

/// Integrates the scalar flow from `q0` with RK4 until steady or `t_max`.
/// A timeout is reported through `diagnostics.status`, not as an error.
pub fn evolve(
    q0: &ScalarField,
    bc: &ScalarBc,
    lambda_bar_sq: f64,
    params: &MaterialParams,
    cfg: &FlowConfig,
) -> Result<ScalarRun> {
    let flow = ScalarFlow::new(q0.grid().clone(), bc, lambda_bar_sq, params)?;
    let mut s = flow.state(q0);
    let diagnostics = integrate(&flow, &mut s, cfg)?;
    Ok(ScalarRun { field: flow.field(&s), diagnostics })
}

/// Saddle solution: gradient flow on the positive sector with zero data on
/// its nodal lines, started from `B/2C`, then extended by odd reflection. The
/// result is checked to be a critical point on the full grid.
pub fn saddle_solve(
    lambda_bar_sq: f64,
    grid: Arc<GridDomain>,
    bc: &ScalarBc,
    params: &MaterialParams,
    cfg: &FlowConfig,
) -> Result<ScalarRun> {
    let frame = SaddleFrame::for_grid(&grid)?;
    let a = params.scalar_well();
    let start = ScalarField::from_fn(grid.clone(), |x, y| if frame.in_sector(x, y) { a } else { 0.0 });
    let flow = ScalarFlow::new(grid.clone(), bc, lambda_bar_sq, params)?.restrict(move |x, y| frame.in_sector(x, y));
    let mut s = flow.state(&start);
    let sector_cfg = FlowConfig { steady_tol: 0.5 * cfg.steady_tol, ..*cfg };
    let mut diagnostics = integrate(&flow, &mut s, &sector_cfg)?;

    let mut values = s[..grid.len()].to_vec();
    for k in 0..grid.len() {
        if grid.is_interior(k) {
            let (m, sign) = frame.representative(&grid, k);
            values[k] = if sign == 0.0 { 0.0 } else { sign * s[m] };
        }
    }

    let full = ScalarFlow::new(grid.clone(), bc, lambda_bar_sq, params)?;
    let field = ScalarField::new(grid.clone(), values)?;
    let state = full.state(&field);
    let mut out = vec![0.0; state.len()];
    full.rhs(&state, &mut out);
    let res = max_abs(&out);
    if !(res < cfg.steady_tol) && diagnostics.converged() {
        let worst = (0..grid.len()).max_by(|&i, &j| out[i].abs().total_cmp(&out[j].abs())).unwrap_or(0);
        let (x, y) = grid.xy(worst);
        return Err(Error::ReflectionInconsistency { x, y, residual: out[worst] });
    }
    diagnostics.residual = res;
    Ok(ScalarRun { field: full.field(&state), diagnostics })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityViolation {
    pub x: f64,
    pub y: f64,
    /// `'x'`/`'y'` on the truncated square; the diagonal directions `'u'`
    /// (`x + y` increasing) and `'v'` (`y − x` increasing) on the square.
    pub direction: char,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub violations: Vec<MonotonicityViolation>,
}

/// Checks that the saddle increases away from both nodal lines inside its
/// positive sector, using forward differences.
pub fn monotonicity_check(q: &ScalarField) -> Result<MonotonicityReport> {
    let grid = q.grid();
    let frame = SaddleFrame::for_grid(grid)?;
    let n = grid.n();
    let mut checked = 0;
    let mut violations = Vec::new();
    for k in 0..grid.len() {
        let (x, y) = grid.xy(k);
        if !grid.is_interior(k) || !frame.in_sector(x, y) {
            continue;
        }
        let (i, j) = (k % n, k / n);
        let steps: [(char, usize); 2] = match frame {
            SaddleFrame::Axes => [('x', grid.index(i + 1, j)), ('y', grid.index(i, j + 1))],
            SaddleFrame::Diagonals => [('u', grid.index(i + 1, j + 1)), ('v', grid.index(i - 1, j + 1))],
        };
        for (dir, nb) in steps {
            if !(grid.is_interior(nb) || grid.is_boundary(nb)) {
                continue;
            }
            checked += 1;
            let d = q.value(nb) - q.value(k);
            if !(d > 0.0) {
                violations.push(MonotonicityViolation { x, y, direction: dir, difference: d });
            }
        }
    }
    Ok(MonotonicityReport { checked, violations })
}

/// Which pair of opposite sides a large-λ steady state has its transition
/// layers along.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerPattern {
    /// `'x'` when the layers hug `x = ±1`, `'y'` for `y = ±1`.
    pub sides: char,
    pub sign: f64,
}

/// Looks for a pair of opposite sides of the square such that every interior
/// node farther than `margin` from both of them carries the same sign.
pub fn layer_pattern(q: &ScalarField, margin: f64) -> Option<LayerPattern> {
    let grid = q.grid();
    for sides in ['x', 'y'] {
        let mut sign = 0.0;
        let mut ok = true;
        for k in 0..grid.len() {
            if !grid.is_interior(k) {
                continue;
            }
            let (x, y) = grid.xy(k);
            let d = if sides == 'x' { 1.0 - x.abs() } else { 1.0 - y.abs() };
            if d <= margin {
                continue;
            }
            let v = q.value(k);
            if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
                ok = false;
                break;
            }
            sign = v.signum();
        }
        if ok && sign != 0.0 {
            return Some(LayerPattern { sides, sign });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{square_scalar_bc, truncated_square_bc, BoundaryData};
    use crate::grid::{square_grid, truncated_square_grid};
    use approx::assert_relative_eq;

    fn params() -> MaterialParams {
        MaterialParams::standard()
    }

    #[test]
    fn rhs_fixed_points() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let zero_bc = BoundaryData::from_fn(&g, |_, _, _| 0.0);
        let q = ScalarField::zeros(g.clone());
        let r = ac_rhs(&q, &zero_bc, 3.0, &p).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));

        let a = p.scalar_well();
        let bc = BoundaryData::from_fn(&g, |_, _, _| a);
        let q = ScalarField::from_fn(g.clone(), |_, _| a);
        let r = ac_rhs(&q, &bc, 3.0, &p).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rhs_single_node_by_hand() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let zero_bc = BoundaryData::from_fn(&g, |_, _, _| 0.0);
        let mut q = ScalarField::zeros(g.clone());
        let k = g.origin();
        let a = p.scalar_well();
        let v = a / 2.0;
        q.values_mut()[k] = v;
        let r = ac_rhs(&q, &zero_bc, 1.0, &p).unwrap();
        let h = g.h();
        let expect = (0.0 - 4.0 * v) / (h * h) - v * (v * v - a * a);
        assert_relative_eq!(r.value(k), expect, max_relative = 1e-14);
        assert_relative_eq!(r.value(k), -116.74197084548105, max_relative = 1e-13);
    }

    #[test]
    fn energy_of_constants() {
        let p = params();
        let g = Arc::new(square_grid(33).unwrap());
        assert_eq!(energy_h(&ScalarField::zeros(g.clone()), 1.0, &p), 0.0);
        let a = p.scalar_well();
        let q = ScalarField::from_fn(g.clone(), |_, _| a);
        let ls = 2e-4;
        let (b, c) = (p.b(), p.c());
        let expect = ls * (c * a.powi(4) - b * b / (2.0 * c) * a * a) * 4.0;
        assert!(expect < 0.0);
        assert_relative_eq!(energy_h(&q, ls, &p), expect, max_relative = 1e-12);
    }

    #[test]
    fn initial_cross_values() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let q = initial_cross(g.clone(), &p).unwrap();
        let a = p.scalar_well();
        assert_eq!(q.at(0.0, 0.5), Some(a));
        assert_eq!(q.at(0.5, 0.5), Some(0.0));
        assert_eq!(q.at(0.5, 0.0), Some(-a));
        let hex = Arc::new(crate::grid::hexagon_grid(17, 0.0).unwrap());
        assert!(initial_cross(hex, &p).is_err());
    }

    #[test]
    fn heat_flow_to_zero() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let bc = BoundaryData::from_fn(&g, |_, _, _| 0.0);
        let q0 = ScalarField::from_fn(g.clone(), |x, y| (3.0 * x).sin() + y * y);
        let run = evolve(&q0, &bc, 0.0, &p, &FlowConfig::default()).unwrap();
        assert!(run.diagnostics.converged());
        assert!(run.field.values().iter().all(|v| v.abs() < 1e-8));
        assert!(run.diagnostics.worst_energy_increase().is_none());
    }

    #[test]
    fn saddle_on_axes_and_sign() {
        let p = params();
        let g = Arc::new(truncated_square_grid(33, 0.125).unwrap());
        let pl = p.with_size(crate::tensor::SizeParam::Scalar(1.0)).unwrap();
        let bc = truncated_square_bc(&g, &pl).unwrap();
        let run = saddle_solve(1.0, g.clone(), &bc, &pl, &FlowConfig::default()).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.xy(k);
            if g.is_interior(k) && (x == 0.0 || y == 0.0) {
                assert_eq!(run.field.value(k), 0.0);
            }
            assert!(x * y * run.field.value(k) >= -1e-12);
        }
        assert!(run.diagnostics.residual < 1e-8);
        let rep = monotonicity_check(&run.field).unwrap();
        assert!(rep.checked > 0);
        assert!(rep.violations.is_empty(), "{:?}", &rep.violations[..rep.violations.len().min(5)]);
    }

    #[test]
    fn monotonicity_flags_constants() {
        let g = Arc::new(truncated_square_grid(17, 0.125).unwrap());
        let q = ScalarField::from_fn(g, |_, _| 0.3);
        let rep = monotonicity_check(&q).unwrap();
        assert_eq!(rep.violations.len(), rep.checked);
        assert!(rep.checked > 0);
    }

    #[test]
    fn square_saddle_matches_flow_at_small_size() {
        let p = params();
        let g = Arc::new(square_grid(33).unwrap());
        let bc = square_scalar_bc(&g, 0.125, &p).unwrap();
        let cfg = FlowConfig::default();
        let s = saddle_solve(0.05, g.clone(), &bc, &p, &cfg).unwrap();
        let q0 = initial_cross(g.clone(), &p).unwrap();
        let e = evolve(&q0, &bc, 0.05, &p, &cfg).unwrap();
        assert!(s.field.max_diff(&e.field) < 1e-6);
    }

    #[test]
    fn representative_covers_all_sectors() {
        let g = square_grid(17).unwrap();
        let f = SaddleFrame::Diagonals;
        for k in 0..g.len() {
            let (x, y) = g.xy(k);
            let (m, s) = f.representative(&g, k);
            let (mx, my) = g.xy(m);
            if s != 0.0 {
                assert!(f.in_sector(mx, my), "({x},{y}) -> ({mx},{my})");
                assert_eq!(s, f.sign(x, y).signum());
            }
        }
    }

    #[test]
    fn layer_pattern_detects_vertical_layers() {
        let g = Arc::new(square_grid(33).unwrap());
        let q = ScalarField::from_fn(g, |x, _| if x.abs() > 0.9 { -1.0 } else { 1.0 });
        let lp = layer_pattern(&q, 0.2).unwrap();
        assert_eq!(lp.sides, 'x');
        assert_eq!(lp.sign, 1.0);
    }
}
