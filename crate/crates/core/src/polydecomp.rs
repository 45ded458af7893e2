//! Exact decomposition `p(iH + L) = Σ_r w_r·p(iH + i·q_r·L)` of a matrix
//! polynomial into evaluations at Hermitian-generated arguments.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrixcore::{ComplexMatrix, I};
use crate::par;

/// Minimum gap between interpolation points.
pub const MIN_POINT_GAP: f64 = 1e-12;

/// `p(z) = Σ_j coeffs[j]·z^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialJson", into = "PolynomialJson")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialJson {
    coeffs: Vec<[f64; 2]>,
}

impl TryFrom<PolynomialJson> for Polynomial {
    type Error = LabError;
    fn try_from(j: PolynomialJson) -> Result<Self> {
        Polynomial::new(j.coeffs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
    }
}

impl From<Polynomial> for PolynomialJson {
    fn from(p: Polynomial) -> Self {
        PolynomialJson {
            coeffs: p.coeffs.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(LabError::InvalidPolynomial("coeffs must not be empty".into()));
        }
        if let Some(j) = coeffs.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LabError::InvalidPolynomial(format!("coeffs[{j}] is not finite")));
        }
        if coeffs.len() > 1 && coeffs[coeffs.len() - 1] == Complex64::new(0.0, 0.0) {
            return Err(LabError::InvalidPolynomial("leading coefficient is zero".into()));
        }
        Ok(Self { coeffs })
    }

    /// `z^d`.
    pub fn monomial(d: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        coeffs[d] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Horner evaluation on a square matrix.
    pub fn eval_matrix(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = x.nrows();
        let mut acc = DMatrix::<Complex64>::identity(n, n) * self.coeffs[self.degree()];
        for c in self.coeffs.iter().rev().skip(1) {
            acc = &acc * x;
            for d in 0..n {
                acc[(d, d)] += c;
            }
        }
        acc
    }
}

/// Points `q_r` with weights `w_r = Π_{r'≠r}(−i − q_{r'})/(q_r − q_{r'})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyDecomp {
    pub points: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub total_weight: f64,
}

/// Lagrange weights evaluated at `−i`, accumulated as log-modulus plus phase.
pub fn lagrange_weights(points: &[f64]) -> Result<PolyDecomp> {
    if points.is_empty() {
        return Err(LabError::DegeneratePoints(0.0));
    }
    if let Some(q) = points.iter().find(|q| !q.is_finite()) {
        return Err(LabError::InvalidPolynomial(format!("point {q} is not finite")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap <= MIN_POINT_GAP {
        return Err(LabError::DegeneratePoints(gap));
    }
    let weights: Vec<Complex64> = points
        .iter()
        .enumerate()
        .map(|(r, &qr)| {
            let mut log_mod = 0.0;
            let mut phase = 0.0;
            for (s, &qs) in points.iter().enumerate() {
                if s == r {
                    continue;
                }
                let num = Complex64::new(-qs, -1.0);
                let den = qr - qs;
                log_mod += num.norm().ln() - den.abs().ln();
                phase += num.arg();
                if den < 0.0 {
                    phase += PI;
                }
            }
            Complex64::from_polar(log_mod.exp(), phase.rem_euclid(2.0 * PI))
        })
        .collect();
    let total_weight = par::pairwise_sum_f64(&weights.iter().map(|w| w.norm()).collect::<Vec<_>>());
    Ok(PolyDecomp {
        points: points.to_vec(),
        weights,
        total_weight,
    })
}

/// `m = D + 1` Chebyshev points `spread·cos((2r − 1)π/(2m))`, `r = 1..m`.
pub fn choose_points(degree: usize, spread: f64) -> Vec<f64> {
    let m = degree + 1;
    (1..=m)
        .map(|r| {
            if 2 * r - 1 == m {
                0.0
            } else {
                spread * ((2 * r - 1) as f64 * PI / (2 * m) as f64).cos()
            }
        })
        .collect()
}

/// Default spread `max(1, ‖L‖)`.
pub fn default_spread(l: &ComplexMatrix) -> Result<f64> {
    Ok(l.spectral_norm()?.max(1.0))
}

fn check_pair(h: &ComplexMatrix, l: &ComplexMatrix) -> Result<()> {
    if h.dim() != l.dim() {
        return Err(LabError::InvalidMatrix(format!(
            "H is {0}x{0} but L is {1}x{1}",
            h.dim(),
            l.dim()
        )));
    }
    for (name, m) in [("H", h), ("L", l)] {
        let scale = m.frobenius_norm().max(1.0);
        if m.hermitian_defect() > 1e-10 * scale {
            return Err(LabError::InvalidMatrix(format!("{name} is not Hermitian")));
        }
    }
    Ok(())
}

/// `Σ_r w_r·p(i(H + q_r L))`, branches evaluated independently and summed pairwise.
pub fn apply_decomposition(h: &ComplexMatrix, l: &ComplexMatrix, p: &Polynomial, decomp: &PolyDecomp) -> Result<ComplexMatrix> {
    check_pair(h, l)?;
    if decomp.points.len() != decomp.weights.len() {
        return Err(LabError::InvalidPolynomial("points and weights differ in length".into()));
    }
    let branches = par::map_indexed(decomp.points.len(), |r| {
        let arg = (h.inner() + l.inner() * Complex64::new(decomp.points[r], 0.0)) * I;
        p.eval_matrix(&arg) * decomp.weights[r]
    });
    let sum = par::pairwise_sum(&branches).expect("at least one point");
    ComplexMatrix::new(sum)
}

/// Direct Horner evaluation of `p(iH + L)`.
pub fn direct_evaluation(h: &ComplexMatrix, l: &ComplexMatrix, p: &Polynomial) -> Result<ComplexMatrix> {
    check_pair(h, l)?;
    ComplexMatrix::new(p.eval_matrix(&(h.inner() * I + l.inner())))
}

/// Relative residual `‖Σ_r w_r p(iH + iq_rL) − p(iH + L)‖/‖p(iH + L)‖` with `m`
/// Chebyshev points at the default spread.
pub fn exactness_witness(h: &ComplexMatrix, l: &ComplexMatrix, p: &Polynomial, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(LabError::DegeneratePoints(0.0));
    }
    let decomp = lagrange_weights(&choose_points(m - 1, default_spread(l)?))?;
    let approx = apply_decomposition(h, l, p, &decomp)?;
    let exact = direct_evaluation(h, l, p)?;
    let diff = ComplexMatrix::new(approx.inner() - exact.inner())?.spectral_norm()?;
    let scale = exact.spectral_norm()?;
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `(length/2π)·max‖(z − A)⁻¹‖·max|f − p|` on the contour.
pub fn runge_error_bound(f_minus_p_max: f64, resolvent_max: f64, contour_length: f64) -> f64 {
    contour_length / (2.0 * PI) * resolvent_max * f_minus_p_max
}
