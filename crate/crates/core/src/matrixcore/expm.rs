use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{LabError, Result};

/// Largest spectral norm accepted by [`expm`].
pub const EXPM_NORM_LIMIT: f64 = 1e3;

const PADE_DEGREE: usize = 8;
const SCALED_NORM_TARGET: f64 = 0.5;

fn pade_coefficients() -> [f64; PADE_DEGREE + 1] {
    let p = PADE_DEGREE;
    let mut c = [0.0; PADE_DEGREE + 1];
    c[0] = 1.0;
    for j in 1..=p {
        c[j] = c[j - 1] * (p + 1 - j) as f64 / (j as f64 * (2 * p + 1 - j) as f64);
    }
    c
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.dim();
    if n == 1 {
        return ComplexMatrix::new(DMatrix::from_element(1, 1, m[(0, 0)].exp()));
    }
    let cheap = (m.norm_one() * m.norm_inf()).sqrt();
    if cheap > EXPM_NORM_LIMIT {
        let norm = m.spectral_norm()?;
        if norm > EXPM_NORM_LIMIT {
            return Err(LabError::NormTooLarge { norm });
        }
    }
    if m.is_diagonal() {
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                m[(i, i)].exp()
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        return ComplexMatrix::new(d);
    }

    let norm1 = m.norm_one();
    let squarings = if norm1 > SCALED_NORM_TARGET {
        (norm1 / SCALED_NORM_TARGET).log2().ceil() as i32
    } else {
        0
    };
    let x: DMatrix<Complex64> = m.inner() * Complex64::new(2f64.powi(-squarings), 0.0);

    let c = pade_coefficients();
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut num = &id * Complex64::new(c[0], 0.0);
    let mut den = num.clone();
    let mut power = id.clone();
    for (j, &cj) in c.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = &power * Complex64::new(cj, 0.0);
        num += &term;
        if j % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or_else(|| LabError::NumericalFailure("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    ComplexMatrix::new(r).map_err(|_| LabError::NumericalFailure("expm produced non-finite entries".into()))
}
