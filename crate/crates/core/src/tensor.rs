//! Q-tensor and P-tensor algebra.
//!
//! A [`QTensor`] stores the five independent entries of a symmetric traceless
//! 3×3 matrix, so symmetry and tracelessness hold by construction. A
//! [`PTensor`] is the 2×2 block used for planar states whose third eigenvalue
//! is pinned to `-B/3C`.

use crate::error::{invalid, Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

/// Symmetric traceless 3×3 tensor stored as `[Q11, Q12, Q13, Q22, Q23]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QTensor(pub [f64; 5]);

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub fn q33(&self) -> f64 {
        -self.0[0] - self.0[3]
    }

    pub fn matrix(&self) -> Mat3 {
        let [q1, q2, q3, q4, q5] = self.0;
        [[q1, q2, q3], [q2, q4, q5], [q3, q5, -q1 - q4]]
    }

    /// Takes the upper triangle of `m`. The caller is responsible for `m`
    /// being symmetric and traceless; the 33 entry is discarded.
    pub fn from_matrix(m: &Mat3) -> Self {
        QTensor([m[0][0], m[0][1], m[0][2], m[1][1], m[1][2]])
    }

    /// Frobenius norm squared, `tr Q²`.
    pub fn norm_sq(&self) -> f64 {
        let [q1, q2, q3, q4, q5] = self.0;
        let q6 = -q1 - q4;
        q1 * q1 + q4 * q4 + q6 * q6 + 2.0 * (q2 * q2 + q3 * q3 + q5 * q5)
    }

    pub fn tr_cube(&self) -> f64 {
        // tr Q³ = 3 det Q for traceless Q
        let m = self.matrix();
        3.0 * det3(&m)
    }

    pub fn scale(&self, s: f64) -> Self {
        QTensor(self.0.map(|v| v * s))
    }

    pub fn add(&self, o: &QTensor) -> Self {
        let mut r = self.0;
        for (a, b) in r.iter_mut().zip(o.0) {
            *a += b;
        }
        QTensor(r)
    }

    pub fn sub(&self, o: &QTensor) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn max_abs_diff(&self, o: &QTensor) -> f64 {
        self.0
            .iter()
            .zip(o.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `R Q Rᵀ` for a rotation or reflection `R` acting in the xy-plane.
    pub fn transform_planar(&self, rot: &[[f64; 2]; 2]) -> Self {
        let m = self.matrix();
        let mut r3 = [[0.0; 3]; 3];
        r3[0][0] = rot[0][0];
        r3[0][1] = rot[0][1];
        r3[1][0] = rot[1][0];
        r3[1][1] = rot[1][1];
        r3[2][2] = 1.0;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += r3[i][k] * m[k][l] * r3[j][l];
                    }
                }
                out[i][j] = s;
            }
        }
        QTensor::from_matrix(&out)
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Symmetric traceless 2×2 tensor `[[p, r], [r, -p]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PTensor {
    pub p: f64,
    pub r: f64,
}

impl PTensor {
    pub fn new(p: f64, r: f64) -> Self {
        PTensor { p, r }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.p, self.r], [self.r, -self.p]]
    }

    pub fn norm_sq(&self) -> f64 {
        2.0 * (self.p * self.p + self.r * self.r)
    }

    /// `P·P − (I/2)|P|²`, which vanishes for every symmetric traceless 2×2
    /// matrix. Evaluated entrywise rather than assumed.
    pub fn square_defect(&self) -> [[f64; 2]; 2] {
        let m = self.matrix();
        let n2 = self.norm_sq();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let pp = m[i][0] * m[0][j] + m[i][1] * m[1][j];
                out[i][j] = pp - if i == j { 0.5 * n2 } else { 0.0 };
            }
        }
        out
    }
}

/// Landau-de Gennes material constants.
///
/// `a`, `b`, `c` in N·m⁻², `l` in N, `lambda` in m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    a: f64,
    b: f64,
    c: f64,
    l: f64,
    lambda: f64,
}

pub const DEFAULT_B: f64 = 6400.0;
pub const DEFAULT_C: f64 = 3500.0;
pub const DEFAULT_L: f64 = 1e-11;

impl MaterialParams {
    pub fn new(a: f64, b: f64, c: f64, l: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("A", a), ("B", b), ("C", c), ("L", l), ("lambda", lambda)] {
            if !v.is_finite() {
                return invalid(format!("{name} must be finite, got {v}"));
            }
        }
        if b <= 0.0 || c <= 0.0 || l <= 0.0 || lambda <= 0.0 {
            return invalid(format!(
                "B, C, L and lambda must be positive (B={b}, C={c}, L={l}, lambda={lambda})"
            ));
        }
        Ok(MaterialParams { a, b, c, l, lambda })
    }

    /// Default constants at the temperature `A = -B²/3C`, with `lambda` chosen
    /// so that the scalar size `2Cλ²/L` equals one.
    pub fn standard() -> Self {
        let (b, c, l) = (DEFAULT_B, DEFAULT_C, DEFAULT_L);
        let lambda = (l / (2.0 * c)).sqrt();
        MaterialParams { a: -b * b / (3.0 * c), b, c, l, lambda }
    }

    /// Same constants at the fixed temperature `A = -B²/3C`.
    pub fn at_reference_temperature(b: f64, c: f64, l: f64, lambda: f64) -> Result<Self> {
        Self::new(-b * b / (3.0 * c), b, c, l, lambda)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.c, self.l, lambda)
    }

    /// Rescales `lambda` so that `λ²/L` equals `v`.
    pub fn with_size(&self, size: SizeParam) -> Result<Self> {
        let full = size.full(self.c);
        if !(full > 0.0) {
            return invalid(format!("size parameter must be positive, got {full}"));
        }
        self.with_lambda((full * self.l).sqrt())
    }

    /// Bulk-minimizing uniaxial order parameter.
    pub fn s_plus(&self) -> f64 {
        (self.b + (self.b * self.b + 24.0 * self.a.abs() * self.c).sqrt()) / (4.0 * self.c)
    }

    /// Well depth `B/2C` of the reduced scalar problem.
    pub fn scalar_well(&self) -> f64 {
        self.b / (2.0 * self.c)
    }

    /// `λ²/L`, the size used by the tensor flow.
    pub fn lambda_sq_over_l(&self) -> f64 {
        self.lambda * self.lambda / self.l
    }

    /// `2Cλ²/L`, the size used by the scalar flow.
    pub fn lambda_bar_sq_scalar(&self) -> f64 {
        2.0 * self.c * self.lambda_sq_over_l()
    }

    /// Decay rate of the short-edge boundary profile.
    pub fn mu_g(&self) -> f64 {
        self.lambda * self.b / (self.c * self.l).sqrt()
    }
}

/// Rescaled domain size in one of the two conventions in use.
///
/// The scalar convention is `2Cλ²/L`, the tensor convention is `λ²/L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeParam {
    Scalar(f64),
    Full(f64),
}

impl SizeParam {
    pub fn scalar(&self, c: f64) -> f64 {
        match *self {
            SizeParam::Scalar(v) => v,
            SizeParam::Full(v) => 2.0 * c * v,
        }
    }

    pub fn full(&self, c: f64) -> f64 {
        match *self {
            SizeParam::Scalar(v) => v / (2.0 * c),
            SizeParam::Full(v) => v,
        }
    }
}

/// Orthonormal right-handed frame `{n1, n2, n3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    n1: Vec3,
    n2: Vec3,
    n3: Vec3,
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl Frame {
    pub fn new(n1: Vec3, n2: Vec3, n3: Vec3) -> Result<Self> {
        let tol = 1e-12;
        let ok = (dot(&n1, &n1) - 1.0).abs() < tol
            && (dot(&n2, &n2) - 1.0).abs() < tol
            && (dot(&n3, &n3) - 1.0).abs() < tol
            && dot(&n1, &n2).abs() < tol
            && dot(&n1, &n3).abs() < tol
            && dot(&n2, &n3).abs() < tol;
        if !ok {
            return invalid("frame is not orthonormal");
        }
        let c = cross(&n1, &n2);
        if dot(&c, &n3) < 0.0 {
            return invalid("frame is not right-handed");
        }
        Ok(Frame { n1, n2, n3 })
    }

    pub fn standard() -> Self {
        Frame { n1: [1.0, 0.0, 0.0], n2: [0.0, 1.0, 0.0], n3: [0.0, 0.0, 1.0] }
    }

    /// In-plane frame rotated by `angle` about ẑ.
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Frame { n1: [c, s, 0.0], n2: [-s, c, 0.0], n3: [0.0, 0.0, 1.0] }
    }

    pub fn n1(&self) -> Vec3 {
        self.n1
    }
    pub fn n2(&self) -> Vec3 {
        self.n2
    }
    pub fn n3(&self) -> Vec3 {
        self.n3
    }
}

fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

/// `s (n⊗n − I/3)`.
pub fn uniaxial(s: f64, n: Vec3) -> Result<QTensor> {
    let nn = dot(&n, &n);
    if (nn.sqrt() - 1.0).abs() > 1e-12 {
        return invalid(format!("director must be a unit vector, |n| = {}", nn.sqrt()));
    }
    Ok(uniaxial_unchecked(s, n))
}

pub(crate) fn uniaxial_unchecked(s: f64, n: Vec3) -> QTensor {
    let m = outer(&n, &n);
    QTensor([
        s * (m[0][0] - 1.0 / 3.0),
        s * m[0][1],
        s * m[0][2],
        s * (m[1][1] - 1.0 / 3.0),
        s * m[1][2],
    ])
}

/// `(A/2) tr Q² − (B/3) tr Q³ + (C/4)(tr Q²)²`.
pub fn bulk_potential(q: &QTensor, params: &MaterialParams) -> f64 {
    let t2 = q.norm_sq();
    let t3 = q.tr_cube();
    0.5 * params.a * t2 - params.b / 3.0 * t3 + 0.25 * params.c * t2 * t2
}

/// Traceless gradient of the bulk potential, `AQ − B(QQ − |Q|²I/3) + C|Q|²Q`.
#[inline]
pub fn bulk_gradient(q: &QTensor, params: &MaterialParams) -> QTensor {
    bulk_gradient_raw(&q.0, params.a, params.b, params.c)
}

#[inline]
pub(crate) fn bulk_gradient_raw(q: &[f64; 5], a: f64, b: f64, c: f64) -> QTensor {
    let [q1, q2, q3, q4, q5] = *q;
    let q6 = -q1 - q4;
    let n2 = q1 * q1 + q4 * q4 + q6 * q6 + 2.0 * (q2 * q2 + q3 * q3 + q5 * q5);
    let third = n2 / 3.0;
    let s11 = q1 * q1 + q2 * q2 + q3 * q3 - third;
    let s12 = q1 * q2 + q2 * q4 + q3 * q5;
    let s13 = q1 * q3 + q2 * q5 + q3 * q6;
    let s22 = q2 * q2 + q4 * q4 + q5 * q5 - third;
    let s23 = q2 * q3 + q4 * q5 + q5 * q6;
    let lin = a + c * n2;
    QTensor([
        lin * q1 - b * s11,
        lin * q2 - b * s12,
        lin * q3 - b * s13,
        lin * q4 - b * s22,
        lin * q5 - b * s23,
    ])
}

pub const BIAXIALITY_TOL: f64 = 1e-10;

/// `β² = 1 − 6 (tr Q³)² / |Q|⁶`, clamped to `[0, 1]`.
pub fn biaxiality(q: &QTensor) -> Result<f64> {
    biaxiality_with_tol(q, BIAXIALITY_TOL)
}

pub fn biaxiality_with_tol(q: &QTensor, tol: f64) -> Result<f64> {
    let n2 = q.norm_sq();
    let norm = n2.sqrt();
    if !(norm > tol) {
        return Err(Error::UndefinedBiaxiality { norm, tol });
    }
    let t3 = q.tr_cube();
    let b = 1.0 - 6.0 * t3 * t3 / (n2 * n2 * n2);
    Ok(b.clamp(0.0, 1.0))
}

/// `q (n1⊗n1 − n2⊗n2) + q3 (2 n3⊗n3 − n1⊗n1 − n2⊗n2)`.
pub fn embed_scalar_or(q: f64, q3: f64, frame: &Frame) -> QTensor {
    let a = outer(&frame.n1, &frame.n1);
    let b = outer(&frame.n2, &frame.n2);
    let z = outer(&frame.n3, &frame.n3);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = q * (a[i][j] - b[i][j]) + q3 * (2.0 * z[i][j] - a[i][j] - b[i][j]);
        }
    }
    QTensor::from_matrix(&m)
}

/// Planar embedding with `Q33 = -B/3C` and `P + (B/6C) I` in the xy block.
pub fn embed_planar(p: &PTensor, params: &MaterialParams) -> QTensor {
    let d = params.b / (6.0 * params.c);
    QTensor([p.p + d, p.r, 0.0, -p.p + d, 0.0])
}

/// Inverse of [`embed_planar`]. Also returns the largest deviation of `Q` from
/// the planar manifold (`|Q33 + B/3C|`, `|Q13|`, `|Q23|`).
pub fn extract_planar(q: &QTensor, params: &MaterialParams) -> (PTensor, f64) {
    let [q1, q2, q3, q4, q5] = q.0;
    let dev = (q.q33() + params.b / (3.0 * params.c)).abs().max(q3.abs()).max(q5.abs());
    (PTensor { p: 0.5 * (q1 - q4), r: q2 }, dev)
}
