//! Five-component Landau-de Gennes gradient flow
//! `∂Q/∂t = ΔQ − λ̄² (AQ − B(QQ − |Q|²I/3) + C|Q|²Q)` with `λ̄² = λ²/L`.

use std::sync::Arc;

use crate::boundary::{ScalarBc, TensorBc};
use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::flow::{integrate, Diagnostics, FlowConfig, FlowSystem};
use crate::grid::{DomainKind, GridDomain, NodeClass};
use crate::scalar_flow::{prepare_rows, PreparedRow};
use crate::tensor::{
    biaxiality, bulk_gradient_raw, bulk_potential, embed_planar, embed_scalar_or, extract_planar, uniaxial_unchecked,
    Frame, MaterialParams, PTensor, QTensor, Vec3,
};

pub struct TensorFlow {
    grid: Arc<GridDomain>,
    rows: Vec<PreparedRow>,
    bc_nodes: Vec<(usize, QTensor)>,
    bc_points: Vec<QTensor>,
    params: MaterialParams,
    lambda_bar_sq: f64,
    q_bound: f64,
}

impl TensorFlow {
    pub fn new(grid: Arc<GridDomain>, bc: &TensorBc, params: &MaterialParams, lambda_bar_sq: f64) -> Result<Self> {
        if !(lambda_bar_sq >= 0.0 && lambda_bar_sq.is_finite()) {
            return invalid(format!("lambda_bar_sq = {lambda_bar_sq} must be finite and non-negative"));
        }
        if bc.nodes().len() != grid.len() || bc.points().len() != grid.points().len() {
            return invalid("boundary data does not belong to this grid");
        }
        let bc_nodes: Vec<_> = (0..grid.len()).filter(|&k| grid.is_boundary(k)).map(|k| (k, bc.node(k))).collect();
        let q_bound = bc_nodes
            .iter()
            .map(|(_, q)| q.norm_sq())
            .chain(bc.points().iter().map(|q| q.norm_sq()))
            .fold(0.0, f64::max)
            .sqrt();
        Ok(TensorFlow {
            rows: prepare_rows(&grid),
            bc_nodes,
            bc_points: bc.points().to_vec(),
            params: *params,
            lambda_bar_sq,
            q_bound,
            grid,
        })
    }

    pub fn state(&mut self, field: &TensorField) -> Vec<f64> {
        let mut values = field.values().to_vec();
        for &(k, q) in &self.bc_nodes {
            values[k] = q;
        }
        let m = values.iter().map(|q| q.norm_sq()).fold(0.0, f64::max).sqrt();
        self.q_bound = self.q_bound.max(m);
        let mut s: Vec<f64> = values.iter().flat_map(|q| q.0).collect();
        s.extend(self.bc_points.iter().flat_map(|q| q.0));
        s
    }

    pub fn field(&self, state: &[f64]) -> TensorField {
        TensorField::from_flat(self.grid.clone(), &state[..5 * self.grid.len()])
    }
}

impl FlowSystem for TensorFlow {
    fn dim(&self) -> usize {
        5 * (self.grid.len() + self.bc_points.len())
    }

    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (a, b, c) = (self.params.a(), self.params.b(), self.params.c());
        let l = self.lambda_bar_sq;
        for r in &self.rows {
            let k = 5 * r.k;
            let t = r.t.map(|i| 5 * i);
            let q = [u[k], u[k + 1], u[k + 2], u[k + 3], u[k + 4]];
            let g = bulk_gradient_raw(&q, a, b, c).0;
            for comp in 0..5 {
                let ex = r.c[0] * u[t[0] + comp] + r.c[1] * u[t[1] + comp];
                let ey = r.c[2] * u[t[2] + comp] + r.c[3] * u[t[3] + comp];
                let lap = (ex + ey) + r.diag * q[comp];
                out[k + comp] = lap - l * g[comp];
            }
        }
    }

    fn energy(&self, u: &[f64]) -> f64 {
        tensor_energy(&self.grid, &u[..5 * self.grid.len()], &self.params, self.lambda_bar_sq)
    }

    fn stiffness(&self) -> f64 {
        let m = self.q_bound;
        let p = &self.params;
        self.grid.laplacian_bound() + self.lambda_bar_sq * (p.a().abs() + 2.0 * p.b() * m + 3.0 * p.c() * m * m)
    }

    fn monitors(&self, u: &[f64]) -> Vec<f64> {
        let target = -self.params.b() / (3.0 * self.params.c());
        let mut m = [0.0f64; 3];
        for k in 0..self.grid.len() {
            if !(self.grid.is_interior(k) || self.grid.is_boundary(k)) {
                continue;
            }
            let q = &u[5 * k..5 * k + 5];
            m[0] = m[0].max((-q[0] - q[3] - target).abs());
            m[1] = m[1].max(q[2].abs());
            m[2] = m[2].max(q[4].abs());
        }
        m.to_vec()
    }
}

fn tensor_energy(grid: &GridDomain, u: &[f64], params: &MaterialParams, lambda_bar_sq: f64) -> f64 {
    let at = |k: usize| QTensor([u[5 * k], u[5 * k + 1], u[5 * k + 2], u[5 * k + 3], u[5 * k + 4]]);
    let mut grad = 0.0;
    for &(a, b) in grid.edges() {
        grad += at(a).sub(&at(b)).norm_sq();
    }
    let mut bulk = 0.0;
    for (k, w) in grid.weights().iter().enumerate() {
        if *w > 0.0 {
            bulk += w * bulk_potential(&at(k), params);
        }
    }
    0.5 * grad + grid.h() * grid.h() * lambda_bar_sq * bulk
}

/// Right-hand side of the tensor flow at interior nodes, zero elsewhere.
pub fn ldg_rhs(q: &TensorField, bc: &TensorBc, params: &MaterialParams, lambda_bar_sq: f64) -> Result<TensorField> {
    let flow = TensorFlow::new(q.grid().clone(), bc, params, lambda_bar_sq)?;
    let mut s = q.flat();
    s.extend(bc.points().iter().flat_map(|v| v.0));
    let mut out = vec![0.0; s.len()];
    flow.rhs(&s, &mut out);
    Ok(TensorField::from_flat(q.grid().clone(), &out))
}

/// Discrete `∫ ½|∇Q|² + λ̄² f_B(Q)` with the same quadrature as the scalar energy.
pub fn energy_ldg(q: &TensorField, params: &MaterialParams, lambda_bar_sq: f64) -> f64 {
    tensor_energy(q.grid(), &q.flat(), params, lambda_bar_sq)
}

/// Embeds a scalar field as `q(x̂⊗x̂ − ŷ⊗ŷ) − (B/6C)(2ẑ⊗ẑ − x̂⊗x̂ − ŷ⊗ŷ)`.
pub fn embed_scalar_field(q: &ScalarField, params: &MaterialParams) -> TensorField {
    let q3 = -params.b() / (6.0 * params.c());
    let f = Frame::standard();
    let values = q.values().iter().map(|&v| embed_scalar_or(v, q3, &f)).collect();
    TensorField::new(q.grid().clone(), values).expect("same grid")
}

/// Tensor boundary data obtained by embedding scalar data.
pub fn embed_scalar_bc(bc: &ScalarBc, params: &MaterialParams) -> TensorBc {
    let q3 = -params.b() / (6.0 * params.c());
    let f = Frame::standard();
    bc.map(|&v| embed_scalar_or(v, q3, &f))
}

fn sector_director(k: usize) -> Vec3 {
    let r = 3f64.sqrt() / 2.0;
    match k % 3 {
        0 => [-0.5, r, 0.0],
        1 => [-1.0, 0.0, 0.0],
        _ => [-0.5, -r, 0.0],
    }
}

/// Six constant uniaxial sectors: the sector between polar angles `60°k` and
/// `60°(k+1)` takes the tangent director of the edge it faces. The origin is
/// set to the planar state with `P = 0`.
pub fn hexagon_initial(grid: Arc<GridDomain>, params: &MaterialParams) -> Result<TensorField> {
    hexagon_initial_shifted(grid, params, 0)
}

/// As [`hexagon_initial`] with the sector-to-director assignment rotated by
/// `shift` sixths.
pub fn hexagon_initial_shifted(grid: Arc<GridDomain>, params: &MaterialParams, shift: usize) -> Result<TensorField> {
    if !matches!(grid.kind(), DomainKind::Hexagon { .. }) {
        return invalid("hexagon_initial needs a hexagon grid");
    }
    let s = params.s_plus();
    let centre = embed_planar(&PTensor::default(), params);
    Ok(TensorField::from_fn(grid, |x, y| {
        if x == 0.0 && y == 0.0 {
            return centre;
        }
        let ang = y.atan2(x).rem_euclid(std::f64::consts::TAU);
        let k = ((ang / (std::f64::consts::PI / 3.0)).floor() as usize).min(5);
        uniaxial_unchecked(s, sector_director(k + shift))
    }))
}

#[derive(Clone, Debug)]
pub struct TensorRun {
    pub field: TensorField,
    pub diagnostics: Diagnostics,
}

/// Integrates the tensor flow from `q0` with RK4 until steady or `t_max`.
/// Diagnostics record `max|Q33 + B/3C|`, `max|Q13|`, `max|Q23|` as extras.
pub fn evolve_full(
    q0: &TensorField,
    bc: &TensorBc,
    params: &MaterialParams,
    lambda_bar_sq: f64,
    cfg: &FlowConfig,
) -> Result<TensorRun> {
    let mut flow = TensorFlow::new(q0.grid().clone(), bc, params, lambda_bar_sq)?;
    let mut s = flow.state(q0);
    let diagnostics = integrate(&flow, &mut s, cfg)?;
    Ok(TensorRun { field: flow.field(&s), diagnostics })
}

/// `β²` per node; NaN where `|Q|` is too small for it to be defined.
pub fn biaxiality_map(q: &TensorField) -> ScalarField {
    let values = q
        .values()
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if q.grid().is_interior(k) || q.grid().is_boundary(k) {
                biaxiality(t).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            }
        })
        .collect();
    ScalarField::new(q.grid().clone(), values).expect("same grid")
}

/// True when the nodes with `β² > level` cut the origin off from the boundary:
/// a 4-connected walk from the origin through nodes with `β² <= level` (or
/// undefined `β²`) never reaches a boundary node.
pub fn ring_separates(beta2: &ScalarField, level: f64) -> bool {
    let g = beta2.grid();
    let n = g.n();
    let open = |k: usize| !matches!(g.class(k), NodeClass::Exterior) && !(beta2.value(k) > level);
    let start = g.origin();
    if !open(start) {
        return true;
    }
    let mut seen = vec![false; g.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(k) = stack.pop() {
        if g.is_boundary(k) {
            return false;
        }
        let (i, j) = (k % n, k / n);
        let nbrs = [(i + 1, j), (i.wrapping_sub(1), j), (i, j + 1), (i, j.wrapping_sub(1))];
        for (a, b) in nbrs {
            if a < n && b < n {
                let m = g.index(a, b);
                if !seen[m] && open(m) {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
    }
    true
}

/// Tolerance on the distance to the planar manifold accepted by
/// [`planar_residual`].
pub const PLANAR_TOL: f64 = 1e-6;

/// Max-norm residual of the planar system
/// `ΔP = λ̄² (−(B²/2C) P − B (PP − |P|² I/2) + C |P|² P)` over interior nodes.
pub fn planar_residual(q: &TensorField, bc: &TensorBc, params: &MaterialParams, lambda_bar_sq: f64) -> Result<f64> {
    let grid = q.grid();
    let n2 = grid.len();
    let mut p = vec![PTensor::default(); n2 + grid.points().len()];
    for k in 0..n2 {
        if grid.is_interior(k) || grid.is_boundary(k) {
            let (pk, dev) = extract_planar(&q.value(k), params);
            if dev > PLANAR_TOL {
                return Err(Error::NotOnPlanarManifold { node: k, deviation: dev });
            }
            p[k] = pk;
        }
    }
    for (i, v) in bc.points().iter().enumerate() {
        let (pk, dev) = extract_planar(v, params);
        if dev > PLANAR_TOL {
            return Err(Error::NotOnPlanarManifold { node: n2 + i, deviation: dev });
        }
        p[n2 + i] = pk;
    }
    let (b, c) = (params.b(), params.c());
    let pc: Vec<f64> = p.iter().map(|v| v.p).collect();
    let rc: Vec<f64> = p.iter().map(|v| v.r).collect();
    let mut worst = 0.0f64;
    for r in prepare_rows(grid) {
        let pk = p[r.k];
        let n2p = pk.norm_sq();
        let sq = pk.square_defect();
        let bulk_p = -b * b / (2.0 * c) * pk.p - b * sq[0][0] + c * n2p * pk.p;
        let bulk_r = -b * b / (2.0 * c) * pk.r - b * sq[0][1] + c * n2p * pk.r;
        let res_p = crate::scalar_flow::lap(&r, &pc) - lambda_bar_sq * bulk_p;
        let res_r = crate::scalar_flow::lap(&r, &rc) - lambda_bar_sq * bulk_r;
        worst = worst.max(res_p.abs()).max(res_r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{hexagon_bc, BoundaryData};
    use crate::grid::{hexagon_grid, square_grid};
    use crate::tensor::{bulk_gradient, uniaxial};
    use approx::assert_relative_eq;

    fn params() -> MaterialParams {
        MaterialParams::standard()
    }

    #[test]
    fn constant_minimizer_is_fixed() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let qb = uniaxial(p.s_plus(), [0.6, 0.8, 0.0]).unwrap();
        let bc = BoundaryData::from_fn(&g, |_, _, _| qb);
        let f = TensorField::from_fn(g.clone(), |_, _| qb);
        let r = ldg_rhs(&f, &bc, &p, 5.0).unwrap();
        for v in r.values() {
            assert!(v.0.iter().all(|c| c.abs() < 1e-9));
        }
        let zb = BoundaryData::from_fn(&g, |_, _, _| QTensor::ZERO);
        let z = TensorField::from_fn(g.clone(), |_, _| QTensor::ZERO);
        assert!(ldg_rhs(&z, &zb, &p, 5.0).unwrap().values().iter().all(|v| *v == QTensor::ZERO));
        assert_eq!(energy_ldg(&z, &p, 5.0), 0.0);
    }

    #[test]
    fn planar_reduction_of_bulk_gradient() {
        let p = params();
        for &(pp, rr) in &[(0.3, -0.1), (0.0, 0.7), (-0.5, 0.2)] {
            let pt = PTensor::new(pp, rr);
            let g = bulk_gradient(&embed_planar(&pt, &p), &p);
            let n2 = pt.norm_sq();
            let k = -p.b() * p.b() / (2.0 * p.c()) + p.c() * n2;
            assert_relative_eq!(0.5 * (g.0[0] - g.0[3]), k * pp, epsilon = 1e-9);
            assert_relative_eq!(g.0[1], k * rr, epsilon = 1e-9);
            assert!(g.0[2].abs() < 1e-12 && g.0[4].abs() < 1e-12);
            assert!(g.q33().abs() < 1e-9);
        }
    }

    #[test]
    fn planar_residual_cases() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let zero = embed_planar(&PTensor::default(), &p);
        let bc = BoundaryData::from_fn(&g, |_, _, _| zero);
        let f = TensorField::from_fn(g.clone(), |_, _| zero);
        assert_eq!(planar_residual(&f, &bc, &p, 3.0).unwrap(), 0.0);

        let a = p.b() / (2.0 * p.c());
        let qa = embed_planar(&PTensor::new(a, 0.0), &p);
        let bc = BoundaryData::from_fn(&g, |_, _, _| qa);
        let f = TensorField::from_fn(g.clone(), |_, _| qa);
        assert!(planar_residual(&f, &bc, &p, 3.0).unwrap() < 1e-9);

        let off = TensorField::from_fn(g.clone(), |_, _| QTensor([0.1, 0.0, 0.01, 0.1, 0.0]));
        assert!(matches!(planar_residual(&off, &bc, &p, 3.0), Err(Error::NotOnPlanarManifold { .. })));
    }

    #[test]
    fn hexagon_initial_sectors() {
        let p = params();
        let g = Arc::new(hexagon_grid(33, 0.0).unwrap());
        let f = hexagon_initial(g.clone(), &p).unwrap();
        let k = g.nearest_node(0.875, 0.0);
        let e = uniaxial(p.b() / p.c(), [-0.5, 3f64.sqrt() / 2.0, 0.0]).unwrap();
        assert!(f.value(k).max_abs_diff(&e) < 1e-14);
        let b6 = p.b() / (6.0 * p.c());
        assert_eq!(f.at_origin().0, [b6, 0.0, 0.0, b6, 0.0]);
        for v in f.values() {
            assert_relative_eq!(v.q33(), -2.0 * b6, epsilon = 1e-14);
        }
    }

    #[test]
    fn biaxiality_of_embedded_zero() {
        let p = params();
        let g = Arc::new(square_grid(17).unwrap());
        let q = ScalarField::zeros(g.clone());
        let t = embed_scalar_field(&q, &p);
        let b = biaxiality_map(&t);
        assert!(b.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn short_run_keeps_hexagon_planar() {
        let p = params();
        let g = Arc::new(hexagon_grid(33, 0.0).unwrap());
        let bc = hexagon_bc(&g, &p).unwrap();
        let q0 = hexagon_initial(g.clone(), &p).unwrap();
        let cfg = FlowConfig { t_max: 0.05, record_every: 10, ..FlowConfig::default() };
        let run = evolve_full(&q0, &bc, &p, 1e-3, &cfg).unwrap();
        for r in &run.diagnostics.records {
            assert!(r.extra.iter().all(|v| *v < 1e-12), "{:?}", r.extra);
        }
    }

    #[test]
    fn ring_detection() {
        let g = Arc::new(hexagon_grid(33, 0.0).unwrap());
        let ring = ScalarField::from_fn(g.clone(), |x, y| if (x.hypot(y) - 0.4).abs() < 0.05 { 1.0 } else { 0.0 });
        assert!(ring_separates(&ring, 0.9));
        let broken = ScalarField::from_fn(g.clone(), |x, y| {
            if (x.hypot(y) - 0.4).abs() < 0.05 && y.abs() > 0.1 {
                1.0
            } else {
                0.0
            }
        });
        assert!(!ring_separates(&broken, 0.9));
    }
}
