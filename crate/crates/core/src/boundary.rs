//! Dirichlet data on the grid boundaries.

use crate::error::{invalid, Result};
use crate::grid::{BoundaryTag, DomainKind, EdgeId, GridDomain};
use crate::tensor::{uniaxial_unchecked, MaterialParams, QTensor, Vec3};

/// Fixed boundary values, one per grid node (meaningful on boundary nodes
/// only) and one per off-grid crossing point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData<T> {
    nodes: Vec<T>,
    points: Vec<T>,
}

pub type ScalarBc = BoundaryData<f64>;
pub type TensorBc = BoundaryData<QTensor>;

impl<T: Copy + Default> BoundaryData<T> {
    /// Evaluates `f` at every boundary node and crossing point of `grid`.
    pub fn from_fn(grid: &GridDomain, mut f: impl FnMut(f64, f64, &BoundaryTag) -> T) -> Self {
        let mut nodes = vec![T::default(); grid.len()];
        for (k, slot) in nodes.iter_mut().enumerate() {
            if let Some(tag) = grid.boundary_tag(k) {
                let (x, y) = grid.xy(k);
                *slot = f(x, y, &tag);
            }
        }
        let points = grid.points().iter().map(|p| f(p.x, p.y, &p.tag)).collect();
        BoundaryData { nodes, points }
    }

    pub fn node(&self, k: usize) -> T {
        self.nodes[k]
    }

    pub fn point(&self, p: usize) -> T {
        self.points[p]
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> BoundaryData<U> {
        BoundaryData { nodes: self.nodes.iter().map(&f).collect(), points: self.points.iter().map(&f).collect() }
    }

    /// Overwrites the boundary entries of a node array.
    pub fn apply(&self, grid: &GridDomain, values: &mut [T]) {
        for (k, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(k) {
                *v = self.nodes[k];
            }
        }
    }
}

/// Linear ramp from `well` on `|s| <= 1 - eps` down to zero at `|s| = 1`.
fn ramp(s: f64, eps: f64, well: f64) -> f64 {
    let t = 1.0 - s.abs();
    if t >= eps {
        well
    } else {
        well * t.max(0.0) / eps
    }
}

/// Scalar data on the axis-aligned square: `+B/2C` on the top and bottom
/// sides, `-B/2C` on the left and right sides, each ramped linearly to zero
/// over the last `eps` before a corner.
pub fn square_scalar_bc(grid: &GridDomain, eps: f64, params: &MaterialParams) -> Result<ScalarBc> {
    if grid.kind() != DomainKind::Square {
        return invalid("square_scalar_bc needs a square grid");
    }
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("ramp width eps = {eps} outside (0, 1/2)"));
    }
    let eps = crate::grid::snap_to_grid(eps, grid.h());
    if eps <= 0.0 {
        return invalid("ramp width rounds to zero on this grid");
    }
    let a = params.scalar_well();
    Ok(BoundaryData::from_fn(grid, |x, y, tag| {
        if tag.is_vertex() {
            return 0.0;
        }
        match tag.edge {
            EdgeId::Side(2) | EdgeId::Side(4) => ramp(x, eps, a),
            _ => -ramp(y, eps, a),
        }
    }))
}

/// Short-edge profile joining `0` at `s = 0` to `s₊/2` at `s = eps`, odd in
/// `s` and constant beyond `eps`.
pub fn g_profile(s: f64, eps: f64, mu: f64, s_plus: f64) -> f64 {
    if s < 0.0 {
        return -g_profile(-s, eps, mu, s_plus);
    }
    let half = 0.5 * s_plus;
    if s >= eps || eps <= 0.0 {
        return half;
    }
    if mu <= 0.0 {
        return half * s / eps;
    }
    // e^{-με} sinh(μs)/sinh(με) rewritten with non-positive exponents only
    let ratio = (-2.0 * mu * s).exp_m1() / (-2.0 * mu * eps).exp_m1();
    let bump = (mu * (s - 2.0 * eps)).exp() * ratio;
    half * (bump - (-mu * s).exp() + 1.0)
}

/// Second derivative of [`g_profile`] on `0 < s < eps`.
pub fn g_profile_second_derivative(s: f64, eps: f64, mu: f64, s_plus: f64) -> f64 {
    if s.abs() >= eps {
        return 0.0;
    }
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let g = g_profile(s.abs(), eps, mu, s_plus);
    sign * mu * mu * (g - 0.5 * s_plus)
}

/// Scalar data on the truncated square: `+s₊/2` on `C1 ∪ C3`, `-s₊/2` on
/// `C2 ∪ C4`, and the odd profile `g` on the short edges so that the datum is
/// continuous and odd under both axis reflections.
pub fn truncated_square_bc(grid: &GridDomain, params: &MaterialParams) -> Result<ScalarBc> {
    let eps = match grid.kind() {
        DomainKind::TruncatedSquare { eps } => eps,
        _ => return invalid("truncated_square_bc needs a truncated-square grid"),
    };
    let sp = params.s_plus();
    let mu = params.mu_g();
    let value = move |x: f64, y: f64, e: EdgeId| match e {
        EdgeId::Long(1) | EdgeId::Long(3) => 0.5 * sp,
        EdgeId::Long(_) => -0.5 * sp,
        EdgeId::Short(1) | EdgeId::Short(3) => x.signum() * g_profile(y, eps, mu, sp),
        EdgeId::Short(_) => y.signum() * g_profile(x, eps, mu, sp),
        EdgeId::Side(_) => unreachable!(),
    };
    Ok(BoundaryData::from_fn(grid, |x, y, tag| match tag.vertex {
        Some(v) => 0.5 * (value(x, y, tag.edge) + value(x, y, v)),
        None => value(x, y, tag.edge),
    }))
}

fn long_edge_director(k: u8) -> Vec3 {
    let r = 3f64.sqrt() / 2.0;
    match (k - 1) % 3 {
        0 => [-0.5, r, 0.0],
        1 => [-1.0, 0.0, 0.0],
        _ => [-0.5, -r, 0.0],
    }
}

/// Director on the short edge at `(1 - eps, y)`, rotating from the `C6`
/// director to the `C1` director.
pub fn short_edge_director(y: f64, eps: f64) -> Vec3 {
    let f = 2.0 * eps / (eps * eps + y * y).sqrt();
    [-0.5 * f, f * y / (2.0 * eps), 0.0]
}

fn rotate(v: (f64, f64), ang: f64) -> (f64, f64) {
    let (s, c) = ang.sin_cos();
    (c * v.0 - s * v.1, s * v.0 + c * v.1)
}

/// Uniaxial tangent data `s₊(n_b⊗n_b − I/3)` on the hexagon. Vertices get the
/// componentwise average of their two edges.
pub fn hexagon_bc(grid: &GridDomain, params: &MaterialParams) -> Result<TensorBc> {
    let eps = match grid.kind() {
        DomainKind::Hexagon { eps } => eps,
        _ => return invalid("hexagon_bc needs a hexagon grid"),
    };
    let s = params.s_plus();
    let value = move |x: f64, y: f64, e: EdgeId| -> QTensor {
        match e {
            EdgeId::Long(k) => uniaxial_unchecked(s, long_edge_director(k)),
            EdgeId::Short(k) => {
                let ang = (60.0 * (k - 1) as f64).to_radians();
                let (_, yr) = rotate((x, y), -ang);
                let d = short_edge_director(yr, eps);
                let (dx, dy) = rotate((d[0], d[1]), ang);
                uniaxial_unchecked(s, [dx, dy, 0.0])
            }
            EdgeId::Side(_) => unreachable!(),
        }
    };
    Ok(BoundaryData::from_fn(grid, |x, y, tag| match tag.vertex {
        Some(v) => value(x, y, tag.edge).add(&value(x, y, v)).scale(0.5),
        None => value(x, y, tag.edge),
    }))
}
