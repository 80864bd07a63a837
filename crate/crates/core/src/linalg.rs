//! Dense complex linear algebra for statevectors and `d x d` operators.
//!
//! All types are immutable once built. The matrix exponential of a Hermitian
//! exponent goes through a Hermitian eigendecomposition, which yields unitaries
//! accurate to machine precision.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported register. `d = 2^12 = 4096` keeps dense matrices in memory.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for the unit-norm invariant of statevectors.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance for `U^dagger U = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for conjugate symmetry, scaled by the largest entry when above one.
pub const HERMITIAN_TOL: f64 = 1e-12;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

pub type C64 = Complex64;

fn dimension_of(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "qubit count {n} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(1usize << n)
}

/// Returns `log2(d)` when `d` is a power of two of at least 2.
pub(crate) fn qubits_for_dim(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::Dimension(format!("{d} is not a power of two >= 2")));
    }
    let n = d.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "dimension {d} exceeds 2^{MAX_QUBITS}"
        )));
    }
    Ok(n)
}

/// Pure state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: DVector<C64>,
    n: usize,
}

impl Statevector {
    /// The all-zeros computational basis state `|0...0>`.
    pub fn ground(n: usize) -> Result<Self> {
        let d = dimension_of(n)?;
        let mut amplitudes = DVector::zeros(d);
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, n })
    }

    /// Builds a state from raw amplitudes; they must already be normalized.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len())?;
        let amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Dimension(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes, n })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `|<0...0|psi>|^2`, clamped into `[0, 1]`.
    pub fn ground_projection_prob(&self) -> f64 {
        self.amplitudes[0].norm_sqr().clamp(0.0, 1.0)
    }

    /// Negates the amplitude at every index `k` with `negate[k]` set.
    pub(crate) fn flip_signs(&mut self, negate: &[bool]) {
        for (a, &neg) in self.amplitudes.iter_mut().zip(negate) {
            if neg {
                *a = -*a;
            }
        }
    }

    pub(crate) fn apply_in_place(&mut self, u: &UnitaryMatrix, scratch: &mut DVector<C64>) {
        u.entries.mul_to(&self.amplitudes, scratch);
        std::mem::swap(&mut self.amplitudes, scratch);
    }
}

/// Convenience wrapper around [`Statevector::ground`].
pub fn make_ground_state(n: usize) -> Result<Statevector> {
    Statevector::ground(n)
}

/// Returns `U psi`.
pub fn apply(u: &UnitaryMatrix, psi: &Statevector) -> Result<Statevector> {
    if u.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: psi.dim(),
        });
    }
    Ok(Statevector {
        amplitudes: &u.entries * &psi.amplitudes,
        n: psi.n,
    })
}

pub fn ground_projection_prob(psi: &Statevector) -> f64 {
    psi.ground_projection_prob()
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `|M - M^dagger|`.
fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..d {
        for k in j..d {
            dev = dev.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    dev
}

/// Complex Hermitian `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: DMatrix<C64>,
}

impl HermitianMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        let deviation = hermitian_deviation(&entries);
        if deviation > HERMITIAN_TOL * max_abs(&entries).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { entries })
    }

    /// Row-major construction, mostly for tests and small literals.
    pub fn from_row_slice(d: usize, data: &[C64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            entries: DMatrix::zeros(d, d),
        }
    }

    pub(crate) fn from_parts_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `Tr(self * other)`.
    pub fn trace_product(&self, other: &HermitianMatrix) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..d {
            for k in 0..d {
                acc += self.entries[(j, k)] * other.entries[(k, j)];
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.map(|z| z * factor),
        }
    }
}

/// `d x d` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: DMatrix<C64>,
}

impl UnitaryMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        let u = Self { entries };
        let deviation = u.unitarity_deviation();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn from_row_slice(d: usize, data: &[C64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub(crate) fn from_parts_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(d, d),
        }
    }

    /// `H^{(x) n}`, the `n`-fold tensor power of the Hadamard gate.
    pub fn hadamard_power(n: usize) -> Result<Self> {
        let d = dimension_of(n)?;
        let scale = (d as f64).sqrt().recip();
        let entries = DMatrix::from_fn(d, d, |j, k| {
            let sign = if (j & k).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            C64::new(sign * scale, 0.0)
        });
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rhs.dim(),
            });
        }
        Ok(Self {
            entries: &self.entries * &rhs.entries,
        })
    }

    /// `e^{i phi} U`.
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let phase = C64::from_polar(1.0, phi);
        Self {
            entries: self.entries.map(|z| z * phase),
        }
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self.entries.adjoint() * &self.entries;
        let d = gram.nrows();
        let mut dev = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                let target = if j == k { 1.0 } else { 0.0 };
                dev = dev.max((gram[(j, k)] - target).norm());
            }
        }
        dev
    }

    /// Largest entrywise distance to another matrix of the same size.
    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

/// Spectral decomposition `H = V diag(lambda) V^dagger`, eigenvalues ascending.
pub fn hermitian_eig(h: &HermitianMatrix) -> Result<(Vec<f64>, UnitaryMatrix)> {
    let deviation = hermitian_deviation(&h.entries);
    if deviation > HERMITIAN_TOL * max_abs(&h.entries).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::try_new(h.entries.clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Dimension("eigensolver did not converge".into()))?;

    let d = h.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, UnitaryMatrix::from_parts_unchecked(vectors)))
}

/// `exp(-i H)` for Hermitian `H`.
pub fn exp_minus_i(h: &HermitianMatrix) -> Result<UnitaryMatrix> {
    let (values, vectors) = hermitian_eig(h)?;
    let v = &vectors.entries;
    // Scale the columns of V by the phases, then multiply by V^dagger.
    let mut scaled = v.clone();
    for (c, lambda) in values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= phase);
    }
    Ok(UnitaryMatrix::from_parts_unchecked(scaled * v.adjoint()))
}
