//! Fixed-size complex linear algebra for qubit, qubit+probe and four-qubit
//! systems: observables, projectors, Kronecker products, partial traces,
//! Born-rule expectations and Lüders state updates.
//!
//! Matrices are dense and row-major. Everything here is small (at most
//! 16×16), so no attempt is made at blocking or sparsity.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::math::{abs, sqrt};

/// Complex scalar used throughout.
pub type C64 = Complex64;

/// Tolerance for the unit-norm check on Bloch vectors.
pub const BLOCH_NORM_TOL: f64 = 1e-12;
/// Tolerance for Hermiticity and unit trace of density matrices.
pub const STATE_TOL: f64 = 1e-12;
/// Eigenvalues down to `-EIGEN_FLOOR` are accepted as round-off.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Imaginary parts of expectation values above this are an error.
pub const IMAG_TOL: f64 = 1e-10;
/// Below this a measurement outcome is treated as impossible.
pub const IMPOSSIBLE_PROB: f64 = 1e-15;

/// Hilbert-space dimensions a [`DensityMatrix`] may have: one to four qubits.
pub const SUPPORTED_DIMS: [usize; 4] = [2, 4, 8, 16];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmathError {
    #[error("bloch vector has norm {norm}, expected 1")]
    NonUnitBloch { norm: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("matrix has {got} entries, expected {expected}")]
    BadShape { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("state trace is {0}, expected 1")]
    NotNormalized(f64),
    #[error("state has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("expectation value has imaginary part {0:e}")]
    ComplexExpectation(f64),
    #[error("outcome impossible (probability {0:e})")]
    OutcomeImpossible(f64),
    #[error("partial trace must keep at least one subsystem")]
    EmptyKeep,
    #[error("subsystem index {index} out of range for {count} subsystems")]
    BadSubsystem { index: usize, count: usize },
}

/// A dichotomic measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "i8", try_from = "i8"))]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    /// Bit encoding: `+1 ↦ 0`, `-1 ↦ 1`.
    #[inline]
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    #[inline]
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    /// Index into two-element tables (`Plus` first).
    #[inline]
    pub fn index(self) -> usize {
        self.bit() as usize
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        match o {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Outcome {
    type Error = &'static str;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            _ => Err("outcome must be +1 or -1"),
        }
    }
}

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

impl core::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. Entries must be finite.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self, QmathError> {
        if data.len() != dim * dim {
            return Err(QmathError::BadShape {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QmathError::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Convenience for real-valued matrices.
    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self, QmathError> {
        Self::from_row_major(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// `|ψ⟩⟨ψ|` for an (unnormalised) ket.
    pub fn outer(ket: &[C64]) -> Self {
        let dim = ket.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        m
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("static shape")
    }

    pub fn pauli_y() -> Self {
        let i = C64::new(0.0, 1.0);
        let o = C64::new(0.0, 0.0);
        Self::from_row_major(2, vec![o, -i, i, o]).expect("static shape")
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && self.max_abs_diff(other) <= tol
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, QmathError> {
        if self.dim != rhs.dim {
            return Err(QmathError::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    /// `Tr(self · rhs)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> C64 {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * rhs.data[k * n + i];
            }
        }
        acc
    }

    /// `A ρ A†` for this matrix `A`.
    pub fn sandwich(&self, rho: &Self) -> Self {
        &(self * rho) * &self.adjoint()
    }

    pub fn anticommutator(&self, rhs: &Self) -> Self {
        &(self * rhs) + &(rhs * self)
    }

    pub fn apply(&self, ket: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, ket.len(), "dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * ket[j]).sum())
            .collect()
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    ///
    /// The `n×n` Hermitian `A + iB` is embedded as the real symmetric
    /// `[[A, -B], [B, A]]`, whose spectrum is that of the original with
    /// every eigenvalue doubled; cyclic Jacobi then diagonalises it.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>, QmathError> {
        let defect = self.hermiticity_defect();
        if defect > 1e-9 {
            return Err(QmathError::NotHermitian(defect));
        }
        let n = self.dim;
        let m = 2 * n;
        let mut s = vec![0.0f64; m * m];
        for i in 0..n {
            for j in 0..n {
                // symmetrise to remove round-off asymmetry
                let z = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                s[i * m + j] = z.re;
                s[(i + n) * m + (j + n)] = z.re;
                s[i * m + (j + n)] = -z.im;
                s[(i + n) * m + j] = z.im;
            }
        }
        jacobi_eigenvalues(&mut s, m);
        let mut evs: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
        evs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        // each eigenvalue appears twice
        Ok(evs.into_iter().step_by(2).collect())
    }
}

fn jacobi_eigenvalues(a: &mut [f64], n: usize) {
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-30 {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if abs(apq) < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
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

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
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

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on dimension mismatch; use [`ComplexMatrix::try_mul`] otherwise.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_mul(rhs).expect("dimension mismatch")
    }
}

/// Unit vector `n` naming the qubit observable `n·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub const X: BlochVector = BlochVector {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: BlochVector = BlochVector {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: BlochVector = BlochVector {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };
    /// `(X + Y)/√2`
    pub const M_PLUS: BlochVector = BlochVector {
        x: core::f64::consts::FRAC_1_SQRT_2,
        y: core::f64::consts::FRAC_1_SQRT_2,
        z: 0.0,
    };
    /// `(X - Y)/√2`
    pub const M_MINUS: BlochVector = BlochVector {
        x: core::f64::consts::FRAC_1_SQRT_2,
        y: -core::f64::consts::FRAC_1_SQRT_2,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QmathError> {
        let norm = sqrt(x * x + y * y + z * z);
        if !norm.is_finite() || abs(norm - 1.0) > BLOCH_NORM_TOL {
            return Err(QmathError::NonUnitBloch { norm });
        }
        Ok(Self { x, y, z })
    }

    /// Normalises an arbitrary nonzero direction.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self, QmathError> {
        let norm = sqrt(x * x + y * y + z * z);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QmathError::NonUnitBloch { norm });
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Direction at angle `phi` from `X` towards `Y` in the equatorial plane.
    pub fn equatorial(phi: f64) -> Self {
        Self {
            x: libm::cos(phi),
            y: libm::sin(phi),
            z: 0.0,
        }
    }

    /// Direction at angle `phi` from `Z` towards `X`.
    pub fn xz_plane(phi: f64) -> Self {
        Self {
            x: libm::sin(phi),
            y: 0.0,
            z: libm::cos(phi),
        }
    }

    /// Spherical coordinates: polar angle from `Z`, azimuth from `X`.
    pub fn spherical(polar: f64, azimuth: f64) -> Self {
        let s = libm::sin(polar);
        Self {
            x: s * libm::cos(azimuth),
            y: s * libm::sin(azimuth),
            z: libm::cos(polar),
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn negated(&self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// `n_x σ_x + n_y σ_y + n_z σ_z`.
pub fn bloch_to_observable(n: &BlochVector) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    m[(0, 0)] = C64::new(n.z, 0.0);
    m[(1, 1)] = C64::new(-n.z, 0.0);
    m[(0, 1)] = C64::new(n.x, -n.y);
    m[(1, 0)] = C64::new(n.x, n.y);
    m
}

/// Rank-one (or embedded) projector with its outcome label.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    outcome: Outcome,
}

impl Projector {
    /// Wraps a matrix after checking `P² = P = P†` to 1e-12.
    pub fn new(matrix: ComplexMatrix, outcome: Outcome) -> Result<Self, QmathError> {
        let defect = matrix.hermiticity_defect();
        if defect > STATE_TOL {
            return Err(QmathError::NotHermitian(defect));
        }
        let sq = &matrix * &matrix;
        let idem = sq.max_abs_diff(&matrix);
        if idem > STATE_TOL {
            return Err(QmathError::NotHermitian(idem));
        }
        Ok(Self { matrix, outcome })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    /// Lifts a single-qubit projector to qubit `site` of an `n_qubits`
    /// register (site 0 is the most significant factor).
    pub fn embed(&self, site: usize, n_qubits: usize) -> Result<Self, QmathError> {
        if site >= n_qubits {
            return Err(QmathError::BadSubsystem {
                index: site,
                count: n_qubits,
            });
        }
        let mut m = if site == 0 {
            self.matrix.clone()
        } else {
            ComplexMatrix::identity(2)
        };
        for k in 1..n_qubits {
            let factor = if k == site {
                self.matrix.clone()
            } else {
                ComplexMatrix::identity(2)
            };
            m = tensor(&m, &factor);
        }
        Ok(Self {
            matrix: m,
            outcome: self.outcome,
        })
    }
}

/// `(I + m n·σ)/2`.
pub fn projector_of(n: &BlochVector, m: Outcome) -> Projector {
    let obs = bloch_to_observable(n).scale_real(m.sign());
    let mut p = &ComplexMatrix::identity(2) + &obs;
    p = p.scale_real(0.5);
    Projector {
        matrix: p,
        outcome: m,
    }
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut out = ComplexMatrix::zeros(d);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, QmathError> {
        if !SUPPORTED_DIMS.contains(&matrix.dim) {
            return Err(QmathError::UnsupportedDimension(matrix.dim));
        }
        if matrix
            .data
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QmathError::NonFinite);
        }
        let defect = matrix.hermiticity_defect();
        if defect > STATE_TOL {
            return Err(QmathError::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if abs(tr.re - 1.0) > STATE_TOL || abs(tr.im) > STATE_TOL {
            return Err(QmathError::NotNormalized(tr.re));
        }
        let min_ev = matrix.hermitian_eigenvalues()?[0];
        if min_ev < -EIGEN_FLOOR {
            return Err(QmathError::NotPositive(min_ev));
        }
        Ok(Self(matrix))
    }

    /// `|ψ⟩⟨ψ|` after normalising `ψ`.
    pub fn pure(ket: &[C64]) -> Result<Self, QmathError> {
        let norm_sq: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sq > 0.0) {
            return Err(QmathError::NotNormalized(norm_sq));
        }
        let s = 1.0 / sqrt(norm_sq);
        let ket: Vec<C64> = ket.iter().map(|z| z * s).collect();
        Self::new(ComplexMatrix::outer(&ket))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, QmathError> {
        Self::new(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    /// Qubit state `(I + r·σ)/2` with `|r| ≤ 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self, QmathError> {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 0)] += C64::new(r[2], 0.0);
        m[(1, 1)] -= C64::new(r[2], 0.0);
        m[(0, 1)] = C64::new(r[0], -r[1]);
        m[(1, 0)] = C64::new(r[0], r[1]);
        Self::new(m.scale_real(0.5))
    }

    /// Pure eigenstate of `n·σ` with eigenvalue `m`.
    pub fn eigenstate(n: &BlochVector, m: Outcome) -> Self {
        Self(projector_of(n, m).matrix)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    /// Bloch vector of a qubit state.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let m = &self.0;
        Some([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }

    pub fn tensor(&self, other: &Self) -> Result<Self, QmathError> {
        Self::new(tensor(&self.0, &other.0))
    }

    /// Purity `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }
}

/// Traces out every subsystem not listed in `keep`.
///
/// `dims` lists the local dimensions with the first entry as the most
/// significant tensor factor; `keep` indices are kept in ascending order.
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<DensityMatrix, QmathError> {
    if keep.is_empty() {
        return Err(QmathError::EmptyKeep);
    }
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(QmathError::DimensionMismatch {
            left: total,
            right: rho.dim(),
        });
    }
    for &k in keep {
        if k >= dims.len() {
            return Err(QmathError::BadSubsystem {
                index: k,
                count: dims.len(),
            });
        }
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();

    let kept_dims: Vec<usize> = kept.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let d_keep: usize = kept_dims.iter().product();
    let d_trace: usize = traced_dims.iter().product();

    let n = dims.len();
    let mut digits = vec![0usize; n];
    let full_index = |digits: &[usize]| -> usize {
        digits
            .iter()
            .zip(dims)
            .fold(0usize, |acc, (&d, &size)| acc * size + d)
    };
    let spread = |mut idx: usize, positions: &[usize], sizes: &[usize], digits: &mut [usize]| {
        for (&pos, &size) in positions.iter().zip(sizes).rev() {
            digits[pos] = idx % size;
            idx /= size;
        }
    };

    let src = rho.matrix();
    let mut out = ComplexMatrix::zeros(d_keep);
    for r in 0..d_keep {
        for c in 0..d_keep {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..d_trace {
                spread(t, &traced, &traced_dims, &mut digits);
                spread(r, &kept, &kept_dims, &mut digits);
                let row = full_index(&digits);
                spread(c, &kept, &kept_dims, &mut digits);
                let col = full_index(&digits);
                acc += src[(row, col)];
            }
            out[(r, c)] = acc;
        }
    }
    DensityMatrix::new(out)
}

/// `Tr(O ρ)` for Hermitian `O`.
pub fn expectation(rho: &DensityMatrix, observable: &ComplexMatrix) -> Result<f64, QmathError> {
    if observable.dim() != rho.dim() {
        return Err(QmathError::DimensionMismatch {
            left: observable.dim(),
            right: rho.dim(),
        });
    }
    let defect = observable.hermiticity_defect();
    if defect > STATE_TOL {
        return Err(QmathError::NotHermitian(defect));
    }
    let v = observable.trace_product(rho.matrix());
    if abs(v.im) > IMAG_TOL {
        return Err(QmathError::ComplexExpectation(v.im));
    }
    Ok(v.re)
}

/// Born probability of `P` and the Lüders post-measurement state `PρP/p`.
pub fn luders_update(
    rho: &DensityMatrix,
    p: &Projector,
) -> Result<(f64, DensityMatrix), QmathError> {
    if p.dim() != rho.dim() {
        return Err(QmathError::DimensionMismatch {
            left: p.dim(),
            right: rho.dim(),
        });
    }
    let post = p.matrix.sandwich(rho.matrix());
    let prob = post.trace().re;
    if prob <= IMPOSSIBLE_PROB {
        return Err(QmathError::OutcomeImpossible(prob));
    }
    let post = DensityMatrix::new(post.scale_real(1.0 / prob))?;
    Ok((prob, post))
}

/// Probability of a whole sequence of projective outcomes,
/// `Tr(P_k⋯P_1 ρ P_1⋯P_k)`, without renormalising in between.
pub fn sequence_probability(rho: &ComplexMatrix, chain: &[&Projector]) -> f64 {
    let mut state = rho.clone();
    for p in chain {
        state = p.matrix.sandwich(&state);
    }
    state.trace().re
}
