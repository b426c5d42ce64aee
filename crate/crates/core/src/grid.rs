//! Masked uniform Cartesian grids on `[-1, 1]²`.
//!
//! Nodes are indexed `j * n + i` with `x = -1 + i h`, `y = -1 + j h`. Every
//! interior node carries a four-arm Laplacian stencil. On the squares every arm
//! ends on a grid node. On the hexagon an arm that would leave the domain is
//! cut at the boundary crossing and ends on a [`BoundaryPoint`] instead
//! (Shortley–Weller weights), which keeps the slanted edges second order.

use std::fmt;

use crate::error::{invalid, Result};

/// Domain geometry. The squares are rescaled to `[-1, 1]²`, the hexagon has
/// unit circumradius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    Square,
    /// Square with its diagonals on the coordinate axes and corners cut by
    /// short edges at distance `1 - eps` from the origin.
    TruncatedSquare { eps: f64 },
    Hexagon { eps: f64 },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Square => "square",
            DomainKind::TruncatedSquare { .. } => "truncated-square",
            DomainKind::Hexagon { .. } => "hexagon",
        }
    }
}

/// Boundary edge label, counted counterclockwise from the positive x-axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeId {
    /// Side of the axis-aligned square: 1 = right, 2 = top, 3 = left, 4 = bottom.
    Side(u8),
    /// Long edge `C_k`.
    Long(u8),
    /// Short edge `S_k`.
    Short(u8),
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeId::Side(k) => write!(f, "side{k}"),
            EdgeId::Long(k) => write!(f, "C{k}"),
            EdgeId::Short(k) => write!(f, "S{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryTag {
    pub edge: EdgeId,
    /// Second edge when the node sits on a vertex.
    pub vertex: Option<EdgeId>,
}

impl BoundaryTag {
    pub fn is_vertex(&self) -> bool {
        self.vertex.is_some()
    }

    pub fn label(&self) -> String {
        match self.vertex {
            Some(v) => format!("{}|{}", self.edge, v),
            None => self.edge.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeClass {
    Interior,
    Boundary(BoundaryTag),
    Exterior,
}

impl NodeClass {
    pub fn name(&self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary(t) if t.is_vertex() => "vertex",
            NodeClass::Boundary(_) => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }
}

/// Off-grid Dirichlet point where a stencil arm meets the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub x: f64,
    pub y: f64,
    pub tag: BoundaryTag,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArmTarget {
    Node(usize),
    Point(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub coef: f64,
    pub target: ArmTarget,
}

/// Laplacian stencil at one interior node, arms ordered east, west, north,
/// south. The diagonal weight is minus the sum of the arm weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilRow {
    pub node: usize,
    pub arms: [Arm; 4],
    pub diag: f64,
}

#[derive(Clone, Copy, Debug)]
struct HalfPlane {
    nx: f64,
    ny: f64,
    d: f64,
    edge: EdgeId,
}

/// Smallest arm fraction used when building cut-cell weights on the hexagon.
pub const DEFAULT_THETA_MIN: f64 = 0.1;

const CLASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GridDomain {
    kind: DomainKind,
    n: usize,
    h: f64,
    classes: Vec<NodeClass>,
    rows: Vec<StencilRow>,
    row_of: Vec<Option<usize>>,
    points: Vec<BoundaryPoint>,
    weights: Vec<f64>,
    edges: Vec<(usize, usize)>,
    planes: Vec<HalfPlane>,
}

fn check_n(n: usize) -> Result<()> {
    if n % 2 == 0 {
        return invalid(format!("n = {n} is even; the origin must be a grid node, so n has to be odd"));
    }
    if n < 17 {
        return invalid(format!("n = {n} is too small, need n >= 17"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return invalid(format!("eps = {eps} outside [0, 1/2)"));
    }
    Ok(())
}

/// Rounds `eps` to the nearest multiple of `h`, warning when it moves.
pub fn snap_to_grid(eps: f64, h: f64) -> f64 {
    let snapped = (eps / h).round() * h;
    if (snapped - eps).abs() > 1e-12 {
        log::warn!("eps = {eps} is not a multiple of h = {h}; using {snapped}");
    }
    snapped
}

pub fn square_grid(n: usize) -> Result<GridDomain> {
    check_n(n)?;
    let planes = vec![
        HalfPlane { nx: 1.0, ny: 0.0, d: 1.0, edge: EdgeId::Side(1) },
        HalfPlane { nx: 0.0, ny: 1.0, d: 1.0, edge: EdgeId::Side(2) },
        HalfPlane { nx: -1.0, ny: 0.0, d: 1.0, edge: EdgeId::Side(3) },
        HalfPlane { nx: 0.0, ny: -1.0, d: 1.0, edge: EdgeId::Side(4) },
    ];
    Ok(GridDomain::build(DomainKind::Square, n, planes, DEFAULT_THETA_MIN))
}

/// Square with diagonals along the axes: `|x ± y| < 1`, plus `|x|, |y| < 1 - eps`
/// when `eps > 0`. `C1` lies in the first quadrant.
pub fn truncated_square_grid(n: usize, eps: f64) -> Result<GridDomain> {
    check_n(n)?;
    check_eps(eps)?;
    let h = 2.0 / (n - 1) as f64;
    let eps = snap_to_grid(eps, h);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut planes = Vec::new();
    for k in 0..4u8 {
        let ang = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
        let (s, c) = ang.sin_cos();
        // normals at 45° + 90°k with offset 1/√2: exact form |x ± y| < 1
        let (nx, ny) = (c.signum() * r, s.signum() * r);
        planes.push(HalfPlane { nx, ny, d: r, edge: EdgeId::Long(k + 1) });
    }
    if eps > 0.0 {
        let axes = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (k, (nx, ny)) in axes.into_iter().enumerate() {
            planes.push(HalfPlane { nx, ny, d: 1.0 - eps, edge: EdgeId::Short(k as u8 + 1) });
        }
    }
    Ok(GridDomain::build(DomainKind::TruncatedSquare { eps }, n, planes, DEFAULT_THETA_MIN))
}

/// Regular hexagon with vertices `(cos 60°k, sin 60°k)`, optionally truncated
/// at each vertex by a short edge at distance `1 - eps` from the origin.
pub fn hexagon_grid(n: usize, eps: f64) -> Result<GridDomain> {
    hexagon_grid_with(n, eps, DEFAULT_THETA_MIN)
}

pub fn hexagon_grid_with(n: usize, eps: f64, theta_min: f64) -> Result<GridDomain> {
    check_n(n)?;
    check_eps(eps)?;
    if !(theta_min > 0.0 && theta_min <= 1.0) {
        return invalid(format!("theta_min = {theta_min} outside (0, 1]"));
    }
    let mut planes = Vec::new();
    let apothem = 3f64.sqrt() / 2.0;
    for k in 0..6u8 {
        let ang = (30.0 + 60.0 * k as f64).to_radians();
        planes.push(HalfPlane { nx: ang.cos(), ny: ang.sin(), d: apothem, edge: EdgeId::Long(k + 1) });
    }
    if eps > 0.0 {
        for k in 0..6u8 {
            let ang = (60.0 * k as f64).to_radians();
            planes.push(HalfPlane { nx: ang.cos(), ny: ang.sin(), d: 1.0 - eps, edge: EdgeId::Short(k + 1) });
        }
    }
    Ok(GridDomain::build(DomainKind::Hexagon { eps }, n, planes, theta_min))
}

impl GridDomain {
    fn build(kind: DomainKind, n: usize, planes: Vec<HalfPlane>, theta_min: f64) -> GridDomain {
        let m = (n - 1) as f64;
        let h = 2.0 / m;
        let coord = |i: usize| (2.0 * i as f64 - m) / m;
        let nn = n * n;

        let slack = |p: &HalfPlane, x: f64, y: f64| p.d - (p.nx * x + p.ny * y);
        let inside = |x: f64, y: f64| planes.iter().all(|p| slack(p, x, y) > CLASS_TOL);
        let tag_at = |x: f64, y: f64| -> Option<BoundaryTag> {
            let mut active: Vec<(f64, EdgeId)> = planes
                .iter()
                .map(|p| (slack(p, x, y), p.edge))
                .filter(|(s, _)| *s <= CLASS_TOL)
                .collect();
            active.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match active.len() {
                0 => None,
                1 => Some(BoundaryTag { edge: active[0].1, vertex: None }),
                _ => {
                    // a vertex when two edges are equally close, or both exactly met
                    let tie = (active[0].0 - active[1].0).abs() <= CLASS_TOL
                        || (active[0].0.abs() <= CLASS_TOL && active[1].0.abs() <= CLASS_TOL);
                    if !tie {
                        return Some(BoundaryTag { edge: active[0].1, vertex: None });
                    }
                    let (a, b) = (active[0].1.min(active[1].1), active[0].1.max(active[1].1));
                    Some(BoundaryTag { edge: a, vertex: Some(b) })
                }
            }
        };

        let mut interior = vec![false; nn];
        for j in 0..n {
            for i in 0..n {
                interior[j * n + i] = inside(coord(i), coord(j));
            }
        }
        let mut classes = vec![NodeClass::Exterior; nn];
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if interior[k] {
                    classes[k] = NodeClass::Interior;
                    continue;
                }
                let (x, y) = (coord(i), coord(j));
                let on_boundary = planes.iter().all(|p| slack(p, x, y) >= -CLASS_TOL);
                let touches = (i > 0 && interior[k - 1])
                    || (i + 1 < n && interior[k + 1])
                    || (j > 0 && interior[k - n])
                    || (j + 1 < n && interior[k + n]);
                if on_boundary || touches {
                    if let Some(tag) = tag_at(x, y) {
                        classes[k] = NodeClass::Boundary(tag);
                    }
                }
            }
        }

        let mut points = Vec::new();
        let mut rows = Vec::new();
        let mut row_of = vec![None; nn];
        let h2 = h * h;
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if !interior[k] {
                    continue;
                }
                let (x, y) = (coord(i), coord(j));
                // east, west, north, south
                let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
                let nbrs = [k + 1, k - 1, k + n, k - n];
                let mut theta = [1.0f64; 4];
                let mut target = [ArmTarget::Node(0); 4];
                for a in 0..4 {
                    let (dx, dy) = dirs[a];
                    let mut best = f64::INFINITY;
                    for p in &planes {
                        let nd = p.nx * dx + p.ny * dy;
                        if nd > 1e-12 {
                            best = best.min(slack(p, x, y) / (h * nd));
                        }
                    }
                    if best >= 1.0 - CLASS_TOL {
                        target[a] = ArmTarget::Node(nbrs[a]);
                    } else {
                        let (px, py) = (x + best * h * dx, y + best * h * dy);
                        let tag = tag_at(px, py).expect("crossing lies on the boundary");
                        target[a] = ArmTarget::Point(points.len());
                        points.push(BoundaryPoint { x: px, y: py, tag });
                        theta[a] = best.max(theta_min);
                    }
                }
                let mut arms = [Arm { coef: 0.0, target: ArmTarget::Node(0) }; 4];
                for (pair, other) in [(0usize, 1usize), (1, 0), (2, 3), (3, 2)] {
                    let (t, to) = (theta[pair], theta[other]);
                    let coef = if t == 1.0 && to == 1.0 { 1.0 / h2 } else { 2.0 / (h2 * t * (t + to)) };
                    arms[pair] = Arm { coef, target: target[pair] };
                }
                let diag = -((arms[0].coef + arms[1].coef) + (arms[2].coef + arms[3].coef));
                row_of[k] = Some(rows.len());
                rows.push(StencilRow { node: k, arms, diag });
            }
        }

        let active = |k: usize| !matches!(classes[k], NodeClass::Exterior);
        let mut weights = vec![0.0; nn];
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                weights[k] = match classes[k] {
                    NodeClass::Interior => 1.0,
                    NodeClass::Exterior => 0.0,
                    NodeClass::Boundary(_) => {
                        let mut cells = 0;
                        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            if i < di || j < dj || i - di + 1 >= n || j - dj + 1 >= n {
                                continue;
                            }
                            let c0 = (j - dj) * n + (i - di);
                            if active(c0) && active(c0 + 1) && active(c0 + n) && active(c0 + n + 1) {
                                cells += 1;
                            }
                        }
                        cells as f64 / 4.0
                    }
                };
            }
        }
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if !active(k) {
                    continue;
                }
                for (ok, nb) in [(i + 1 < n, k + 1), (j + 1 < n, k + n)] {
                    if ok && active(nb) && (interior[k] || interior[nb]) {
                        edges.push((k, nb));
                    }
                }
            }
        }

        GridDomain { kind, n, h, classes, rows, row_of, points, weights, edges, planes }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        let m = (self.n - 1) as f64;
        (2.0 * i as f64 - m) / m
    }

    pub fn xy(&self, k: usize) -> (f64, f64) {
        (self.coord(k % self.n), self.coord(k / self.n))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Node at `(x, y)` if it lies on the lattice within a small tolerance.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let m = (self.n - 1) as f64;
        let fi = (x + 1.0) * m / 2.0;
        let fj = (y + 1.0) * m / 2.0;
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-6 || (fj - rj).abs() > 1e-6 || ri < 0.0 || rj < 0.0 || ri > m || rj > m {
            return None;
        }
        Some(self.index(ri as usize, rj as usize))
    }

    /// Nearest lattice node to `(x, y)`, clamped to the bounding box.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let m = (self.n - 1) as f64;
        let i = ((x + 1.0) * m / 2.0).round().clamp(0.0, m) as usize;
        let j = ((y + 1.0) * m / 2.0).round().clamp(0.0, m) as usize;
        self.index(i, j)
    }

    pub fn origin(&self) -> usize {
        let c = (self.n - 1) / 2;
        self.index(c, c)
    }

    pub fn class(&self, k: usize) -> NodeClass {
        self.classes[k]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn is_interior(&self, k: usize) -> bool {
        matches!(self.classes[k], NodeClass::Interior)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        matches!(self.classes[k], NodeClass::Boundary(_))
    }

    pub fn boundary_tag(&self, k: usize) -> Option<BoundaryTag> {
        match self.classes[k] {
            NodeClass::Boundary(t) => Some(t),
            _ => None,
        }
    }

    pub fn rows(&self) -> &[StencilRow] {
        &self.rows
    }

    pub fn row_of(&self, k: usize) -> Option<&StencilRow> {
        self.row_of[k].map(|r| &self.rows[r])
    }

    pub fn points(&self) -> &[BoundaryPoint] {
        &self.points
    }

    /// Quadrature weight (in units of `h²`) of each node in the discrete energy.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid edges entering the discrete Dirichlet energy.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn interior_count(&self) -> usize {
        self.rows.len()
    }

    /// True when every stencil arm ends on a grid node with the standard
    /// five-point weights.
    pub fn is_uniform(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether `(x, y)` lies strictly inside the continuous domain.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.planes.iter().all(|p| p.d - (p.nx * x + p.ny * y) > CLASS_TOL)
    }

    /// Largest Gershgorin bound of the discrete Laplacian, `max_k 2 |diag_k|`.
    pub fn laplacian_bound(&self) -> f64 {
        self.rows.iter().map(|r| 2.0 * r.diag.abs()).fold(0.0, f64::max)
    }

    /// Index of the mirror image of node `k` under `(x, y) -> (-x, y)`.
    pub fn mirror_x(&self, k: usize) -> usize {
        let (i, j) = (k % self.n, k / self.n);
        self.index(self.n - 1 - i, j)
    }

    /// Index of the mirror image of node `k` under `(x, y) -> (x, -y)`.
    pub fn mirror_y(&self, k: usize) -> usize {
        let (i, j) = (k % self.n, k / self.n);
        self.index(i, self.n - 1 - j)
    }

    /// Index of the mirror image of node `k` under `(x, y) -> (y, x)`.
    pub fn transpose(&self, k: usize) -> usize {
        let (i, j) = (k % self.n, k / self.n);
        self.index(j, i)
    }
}
