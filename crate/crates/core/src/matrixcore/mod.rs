//! Dense complex matrices, Hermitian splitting, matrix exponentials,
//! time-ordered propagators and the spectral quantities of a generator.

mod expm;
mod generator;
mod spectral;

use std::ops::{Add, Deref};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

pub use expm::{expm, EXPM_NORM_LIMIT};
pub use generator::{min_steps, time_ordered_exp, GeneratorKind, GeneratorSpec, PropagatorPlan};
pub use spectral::{evolution_norm_bound, spectral_profile, QuadratureRule, SpectralProfile};

pub type ComplexVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// A square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LabError::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(LabError::InvalidMatrix("matrix has dimension 0".into()));
        }
        if let Some((idx, _)) = m
            .iter()
            .enumerate()
            .find(|(_, z)| !z.re.is_finite() || !z.im.is_finite())
        {
            let (r, c) = (idx % m.nrows(), idx / m.nrows());
            return Err(LabError::InvalidMatrix(format!("entry ({r}, {c}) is not finite")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller knows to be square; finiteness is not checked.
    pub(crate) fn from_raw(m: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LabError::InvalidMatrix("rows have inconsistent lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(diag: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diagonal(&d)
    }

    pub fn scalar(value: Complex64) -> Result<Self> {
        Self::diagonal(&[value])
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(&self.0 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest singular value, from the top eigenvalue of the Hermitian `M†M`.
    pub fn spectral_norm(&self) -> Result<f64> {
        spectral_norm(&self.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// Deviation from Hermiticity, relative to the Frobenius norm.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.frobenius_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let d = &self.0 - self.0.adjoint();
        d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / scale
    }

    /// Extreme eigenvalues `(min, max)` of the Hermitian part `(M + M†)/2`.
    pub fn hermitian_extremes(&self) -> Result<(f64, f64)> {
        let ev = hermitian_eigenvalues(&self.0)?;
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<Complex64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

pub(crate) fn symmetrize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues of the Hermitian part of `m`.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)].re]);
    }
    let h = symmetrize(m);
    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| LabError::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NumericalFailure("non-finite eigenvalue".into()));
    }
    Ok(vals)
}

/// Eigen-decomposition `(values, vectors)` of the Hermitian part of `m`.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let h = symmetrize(m);
    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| LabError::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(0.0);
    }
    if !scale.is_finite() {
        return Err(LabError::NumericalFailure("non-finite matrix in spectral norm".into()));
    }
    let n = m / Complex64::new(scale, 0.0);
    let gram = n.adjoint() * &n;
    let ev = hermitian_eigenvalues(&gram)?;
    let top = ev.iter().copied().fold(0.0, f64::max);
    Ok(scale * top.max(0.0).sqrt())
}

/// `A = L + iH` with `L = (A + A†)/2` and `H = (A − A†)/(2i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSplit {
    pub h: ComplexMatrix,
    pub l: ComplexMatrix,
}

impl HermitianSplit {
    pub fn reassemble(&self) -> ComplexMatrix {
        ComplexMatrix(&self.l.0 + &self.h.0 * I)
    }
}

pub fn hermitian_split(a: &ComplexMatrix) -> Result<HermitianSplit> {
    let a = ComplexMatrix::new(a.0.clone())?;
    let adj = a.0.adjoint();
    let l = (&a.0 + &adj) * Complex64::new(0.5, 0.0);
    let h = (&a.0 - &adj) / Complex64::new(0.0, 2.0);
    Ok(HermitianSplit {
        h: ComplexMatrix(h),
        l: ComplexMatrix(l),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let entries = (0..n)
            .map(|i| (0..n).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        MatrixJson { dim: n, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = MatrixJson::deserialize(d)?;
        if raw.entries.len() != raw.dim {
            return Err(D::Error::custom(format!(
                "entries: expected {} rows, found {}",
                raw.dim,
                raw.entries.len()
            )));
        }
        if let Some((i, row)) = raw.entries.iter().enumerate().find(|(_, r)| r.len() != raw.dim) {
            return Err(D::Error::custom(format!(
                "entries[{i}]: expected {} columns, found {}",
                raw.dim,
                row.len()
            )));
        }
        let m = DMatrix::from_fn(raw.dim, raw.dim, |i, j| {
            let [re, im] = raw.entries[i][j];
            Complex64::new(re, im)
        });
        ComplexMatrix::new(m).map_err(|e| D::Error::custom(format!("entries: {e}")))
    }
}

/// Serde adapter writing a [`ComplexVector`] as `[[re, im], ...]`.
pub mod vector_json {
    use super::*;

    pub fn serialize<S: Serializer>(v: &ComplexVector, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexVector, D::Error> {
        use serde::de::Error;
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        if let Some(i) = raw.iter().position(|[re, im]| !(re.is_finite() && im.is_finite())) {
            return Err(D::Error::custom(format!("[{i}]: entry is not finite")));
        }
        Ok(ComplexVector::from_iterator(raw.len(), raw.iter().map(|[re, im]| Complex64::new(*re, *im))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn split_of_identity_and_i_identity() {
        let s = hermitian_split(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(s.l, ComplexMatrix::identity(2));
        assert_eq!(s.h.frobenius_norm(), 0.0);
        let s = hermitian_split(&ComplexMatrix::identity(2).scale(I)).unwrap();
        assert_eq!(s.l.frobenius_norm(), 0.0);
        assert!((&*s.h - ComplexMatrix::identity(2).inner()).norm() < 1e-15);
    }

    #[test]
    fn split_of_triangular_example() {
        let a = ComplexMatrix::from_rows(&[vec![c(1., 0.), c(2., 1.)], vec![c(0., 0.), c(3., 0.)]]).unwrap();
        let s = hermitian_split(&a).unwrap();
        let l = ComplexMatrix::from_rows(&[vec![c(1., 0.), c(1., 0.5)], vec![c(1., -0.5), c(3., 0.)]]).unwrap();
        let h = ComplexMatrix::from_rows(&[vec![c(0., 0.), c(0.5, -1.0)], vec![c(0.5, 1.0), c(0., 0.)]]).unwrap();
        assert!((&*s.l - &*l).norm() < 1e-15);
        assert!((&*s.h - &*h).norm() < 1e-15);
        assert!((&*s.reassemble() - &*a).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let bad = DMatrix::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(ComplexMatrix::new(bad), Err(LabError::InvalidMatrix(_))));
        let rect = DMatrix::from_element(2, 3, c(1.0, 0.0));
        assert!(matches!(ComplexMatrix::new(rect), Err(LabError::InvalidMatrix(_))));
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        let m = ComplexMatrix::from_real_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert!((m.spectral_norm().unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let a = ComplexMatrix::from_rows(&[vec![c(0.1, -2.5), c(1e-300, 3.0)], vec![c(7.0, 0.0), c(-0.3, 0.7)]]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_rejects_ragged_rows() {
        let err = serde_json::from_str::<ComplexMatrix>(r#"{"dim":2,"entries":[[[1,0],[0,0]],[[1,0]]]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("entries[1]"), "{err}");
    }
}
