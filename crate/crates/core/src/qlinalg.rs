//! Dense complex linear algebra for one to three qubits.
//!
//! Everything here works on small row-major matrices. The computational basis
//! is ordered with `|↑⟩ = 0` and `|↓⟩ = 1`, the leftmost subsystem being the
//! most significant bit, so a two-qubit operator is indexed
//! `(↑↑, ↑↓, ↓↑, ↓↓)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Structural tolerance (Hermiticity, trace, normalization).
pub const STRUCT_TOL: f64 = 1e-12;
/// Spectral tolerance (eigen-residuals, positivity).
pub const SPECTRAL_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Panics if the rows are ragged or not square.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), dim, "matrix rows must be square");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_fn(
            diag.len(),
            |i, j| if i == j { c(diag[i], 0.0) } else { ZERO },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_same_dim(rhs)?;
        Ok(self * rhs)
    }

    /// Element-wise (Schur) product.
    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_same_dim(rhs)?;
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (n, m) = (self.dim, rhs.dim);
        Self::from_fn(n * m, |i, j| self[(i / m, j / m)] * rhs[(i % m, j % m)])
    }

    /// `U · self · U†`
    pub fn conjugate_by(&self, u: &Matrix) -> Result<Matrix> {
        self.check_same_dim(u)?;
        Ok(&(u * self) * &u.adjoint())
    }

    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A − A†|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_same_dim(&self, rhs: &Matrix) -> Result<()> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Serialized as a list of rows, each entry a `[re, im]` pair.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut rows = serializer.serialize_seq(Some(self.dim))?;
        for i in 0..self.dim {
            let row: Vec<[f64; 2]> = (0..self.dim)
                .map(|j| [self[(i, j)].re, self[(i, j)].im])
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

pub mod pauli {
    use super::{c, Matrix, ONE, ZERO};

    pub fn x() -> Matrix {
        Matrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn y() -> Matrix {
        Matrix::from_rows(&[[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]])
    }

    pub fn z() -> Matrix {
        Matrix::from_rows(&[[ONE, ZERO], [ZERO, c(-1.0, 0.0)]])
    }

    /// `[σx, σy, σz]`
    pub fn all() -> [Matrix; 3] {
        [x(), y(), z()]
    }
}

fn check_state_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 | 8 => Ok(()),
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// A density operator on one, two or three qubits.
///
/// Always Hermitian and positive semidefinite to tolerance. Unit trace is only
/// enforced when the operator is flagged `normalized`; unnormalized operators
/// carry the branch-weighted states of a measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityOp {
    #[serde(rename = "elements")]
    matrix: Matrix,
    normalized: bool,
}

impl DensityOp {
    /// Validates Hermiticity, positivity and unit trace.
    pub fn new(matrix: Matrix) -> Result<Self> {
        let op = Self::unnormalized(matrix)?;
        let tr = op.matrix.trace();
        if (tr.re - 1.0).abs() > STRUCT_TOL {
            return Err(Error::ContractViolation(format!(
                "density operator trace {} is not 1",
                tr.re
            )));
        }
        Ok(Self {
            normalized: true,
            ..op
        })
    }

    /// Validates Hermiticity, positivity and a real trace.
    pub fn unnormalized(matrix: Matrix) -> Result<Self> {
        check_state_dim(matrix.dim())?;
        if !matrix.is_finite() {
            return Err(Error::ContractViolation("non-finite matrix entry".into()));
        }
        let defect = matrix.hermiticity_defect();
        if defect > STRUCT_TOL {
            return Err(Error::ContractViolation(format!(
                "density operator not Hermitian (defect {defect:.3e})"
            )));
        }
        let (vals, _) = eig_hermitian(&matrix)?;
        if vals[0] < -SPECTRAL_TOL {
            return Err(Error::ContractViolation(format!(
                "density operator has negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(Self {
            matrix,
            normalized: false,
        })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_state_dim(dim)?;
        Ok(Self {
            matrix: Matrix::identity(dim).scale_re(1.0 / dim as f64),
            normalized: true,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn tensor(&self, other: &DensityOp) -> Result<DensityOp> {
        let dim = self.dim() * other.dim();
        if dim > 8 {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(DensityOp {
            matrix: self.matrix.kron(&other.matrix),
            normalized: self.normalized && other.normalized,
        })
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOp> {
        let matrix = partial_trace(&self.matrix, keep)?;
        Ok(DensityOp {
            matrix,
            normalized: self.normalized,
        })
    }

    /// Divides by the trace. Fails on a (numerically) zero trace.
    pub fn normalize(&self) -> Result<DensityOp> {
        let tr = self.trace();
        if tr.abs() < f64::EPSILON {
            return Err(Error::ContractViolation(
                "cannot normalize a zero-trace operator".into(),
            ));
        }
        DensityOp::new(self.matrix.scale_re(1.0 / tr))
    }

    /// Wraps a matrix known to be a valid state without re-running the eigen check.
    pub(crate) fn from_trusted(matrix: Matrix, normalized: bool) -> Self {
        Self { matrix, normalized }
    }
}

/// A normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureKet {
    amps: Vec<C64>,
}

impl PureKet {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::UnsupportedDimension(n));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > STRUCT_TOL {
            return Err(Error::ContractViolation(format!(
                "ket squared norm {norm2} is not 1"
            )));
        }
        Ok(Self { amps })
    }

    /// Computational basis ket `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn tensor(&self, other: &PureKet) -> PureKet {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        PureKet { amps }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureKet) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim(), |i, j| self.amps[i] * self.amps[j].conj())
    }

    pub fn projector(&self) -> Result<DensityOp> {
        check_state_dim(self.dim())?;
        Ok(DensityOp::from_trusted(self.projector_matrix(), true))
    }

    /// `⟨ψ|M|ψ⟩`
    pub fn expectation(&self, m: &Matrix) -> Result<C64> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: m.dim(),
            });
        }
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.amps[i].conj() * m[(i, j)] * self.amps[j];
            }
        }
        Ok(acc)
    }
}

/// Bloch-sphere angles of a single-qubit pure state,
/// `α = cos(θ/2)`, `β = sin(θ/2)·e^{iφ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta {theta} outside [0, π]"
            )));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::InvalidArgument(format!("phi {phi} outside [0, 2π)")));
        }
        Ok(Self { theta, phi })
    }

    /// `(α, β)`
    pub fn amplitudes(&self) -> (C64, C64) {
        let (s, co) = (self.theta / 2.0).sin_cos();
        (c(co, 0.0), C64::from_polar(s, self.phi))
    }

    pub fn ket(&self) -> PureKet {
        let (a, b) = self.amplitudes();
        PureKet { amps: vec![a, b] }
    }
}

/// Reduced operator on the qubits listed in `keep` (indices into the
/// subsystem order, 0 = leftmost). The kept qubits retain their relative order.
pub fn partial_trace(rho: &Matrix, keep: &[usize]) -> Result<Matrix> {
    let dim = rho.dim();
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::UnsupportedDimension(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "partial trace needs a nonempty keep set".into(),
        ));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidArgument(format!(
            "qubit {bad} out of range for a {n}-qubit operator"
        )));
    }
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();

    // Bit position of qubit q inside a full index.
    let shift = |q: usize| n - 1 - q;
    let spread = |bits: usize, qubits: &[usize]| -> usize {
        let k = qubits.len();
        qubits
            .iter()
            .enumerate()
            .map(|(pos, &q)| ((bits >> (k - 1 - pos)) & 1) << shift(q))
            .sum()
    };

    let out_dim = 1 << keep.len();
    let mut out = Matrix::zeros(out_dim);
    for i in 0..out_dim {
        let row = spread(i, &keep);
        for j in 0..out_dim {
            let col = spread(j, &keep);
            let mut acc = ZERO;
            for t in 0..(1 << traced.len()) {
                let off = spread(t, &traced);
                acc += rho[(row | off, col | off)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Eigenvalues come back ascending; eigenvectors are the columns
/// of the returned unitary in the same order.
pub fn eig_hermitian(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.dim();
    let defect = m.hermiticity_defect();
    if defect > SPECTRAL_TOL {
        return Err(Error::ContractViolation(format!(
            "eigensolver input is not Hermitian (defect {defect:.3e})"
        )));
    }
    if !m.is_finite() {
        return Err(Error::ContractViolation(
            "eigensolver input is not finite".into(),
        ));
    }
    // Symmetrize so rounding in the input does not leak into the rotations.
    let mut a = Matrix::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let zeta = (aqq - app) / (2.0 * r);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // U = D·R on the (p, q) plane with D = diag(1, e^{-iφ}).
                let u_pp = c(cs, 0.0);
                let u_pq = c(sn, 0.0);
                let u_qp = -phase.conj() * sn;
                let u_qq = phase.conj() * cs;

                // A ← A·U (columns p, q)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                // A ← U†·A (rows p, q)
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = Matrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn mat_sqrt_psd(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    if vals[0] < -1e-8 {
        return Err(Error::ContractViolation(format!(
            "matrix square root of a matrix with eigenvalue {:.3e}",
            vals[0]
        )));
    }
    let roots: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let d = Matrix::from_real_diag(&roots);
    let out = &(&vecs * &d) * &vecs.adjoint();
    // Exact Hermitian symmetrization.
    Ok(Matrix::from_fn(out.dim(), |i, j| {
        0.5 * (out[(i, j)] + out[(j, i)].conj())
    }))
}
