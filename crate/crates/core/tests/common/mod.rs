//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use cbmd_lab::matrixcore::{ComplexMatrix, ComplexVector, GeneratorSpec};
use cbmd_lab::series::{LcuSeries, LcuTerm, TermKind};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use cbmd_lab::matrixcore::I;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Truncated Taylor series of `e^M` with scaling and squaring.
pub fn taylor_expm(m: &DMatrix<Complex64>, terms: usize) -> DMatrix<Complex64> {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let s = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let x = m * Complex64::new(2f64.powi(-s), 0.0);
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = sum.clone();
    for j in 1..=terms {
        term = &term * &x / Complex64::new(j as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Unscaled Taylor sum with the given number of terms.
pub fn plain_taylor_expm(m: &DMatrix<Complex64>, terms: usize) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = sum.clone();
    for j in 1..=terms {
        term = &term * m / Complex64::new(j as f64, 0.0);
        sum += &term;
    }
    sum
}

pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * scale)
}

pub fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let m = random_matrix(r, n, 1.0);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

pub fn random_psd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let m = random_matrix(r, n, 1.0);
    m.adjoint() * m
}

/// Rescales `m` to the given spectral norm.
pub fn with_norm(m: DMatrix<Complex64>, target: f64) -> DMatrix<Complex64> {
    let n = spectral_norm(&m);
    m * Complex64::new(target / n, 0.0)
}

/// Random constant generator `L + iH` with PSD `L`, `‖A‖ = norm`.
pub fn random_psd_generator(r: &mut ChaCha8Rng, n: usize, norm: f64) -> (ComplexMatrix, DMatrix<Complex64>, DMatrix<Complex64>) {
    let h = random_hermitian(r, n);
    let l = random_psd(r, n);
    let a = &l + &h * I;
    let s = norm / spectral_norm(&a);
    let h = h * c(s, 0.0);
    let l = l * c(s, 0.0);
    let a = &l + &h * I;
    (ComplexMatrix::new(a).unwrap(), h, l)
}

/// `T exp(∫(−iH − zL))` for a constant generator via the Taylor oracle.
pub fn constant_propagator(h: &DMatrix<Complex64>, l: &DMatrix<Complex64>, z: Complex64, t: f64) -> DMatrix<Complex64> {
    taylor_expm(&((h * I + l * z) * c(-t, 0.0)), 60)
}

/// `Σ c_j e^{−(i h + i k'_j l)T}` for a scalar `λ = l + ih`.
pub fn scalar_series_value(series: &LcuSeries, lambda: Complex64, t: f64) -> Complex64 {
    series
        .terms
        .iter()
        .map(|term| term.coefficient * (-(I * lambda.im + I * term.k_param() * lambda.re) * t).exp())
        .sum()
}

pub fn scalar_target(lambda: Complex64, t: f64) -> Complex64 {
    (-lambda * t).exp()
}

/// CBMD lattice coefficient from the unpaired, direct product.
pub fn direct_main_coefficient(m: usize, a: f64, k: i64) -> Complex64 {
    let x = c(k as f64 / a, 0.0);
    let mut h2 = (x - 2.0 * I) / c(0.0, -3.0);
    for r in -(m as i64)..=(m as i64) {
        let rf = r as f64;
        h2 *= (x - rf - I) / (-rf - 2.0 * I);
    }
    ((-2.0 * PI * a).exp() - 1.0) / (a * 2.0 * PI * I * (x + I) * h2)
}

/// Auxiliary-pole coefficient from the generic residue formula
/// `−(e^{−2πa} − 1)/((p + i)·h₂'(p)·(e^{−2πiap} − 1))` over the pole set.
pub fn generic_aux_coefficient(poles: &[Complex64], a: f64, p: Complex64) -> Complex64 {
    let mut h2_prime = 1.0 / (-I - p);
    for &q in poles {
        if q != p {
            h2_prime *= (p - q) / (-I - q);
        }
    }
    -((-2.0 * PI * a).exp() - 1.0) / ((p + I) * h2_prime * ((-2.0 * PI * I * a * p).exp() - 1.0))
}

pub fn cbmd_pole_set(m: usize) -> Vec<Complex64> {
    let mut p = vec![c(0.0, 2.0)];
    for r in -(m as i64)..=(m as i64) {
        p.push(c(r as f64, 1.0));
    }
    p
}

/// Orthonormal completion of a unit column into a unitary matrix (Gram–Schmidt).
pub fn complete_unitary(col: &[Complex64]) -> DMatrix<Complex64> {
    let n = col.len();
    let mut basis: Vec<Vec<Complex64>> = vec![col.to_vec()];
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![c(0.0, 0.0); n];
        v[e] = c(1.0, 0.0);
        for b in &basis {
            let dot: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for i in 0..n {
                v[i] -= dot * b[i];
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.iter().map(|z| z / norm).collect());
        }
    }
    DMatrix::from_fn(n, n, |i, j| basis[j][i])
}

/// Explicit ancilla-register circuit `(P_l† ⊗ I)·SEL·(P_r ⊗ I)` applied to `|0⟩|u0⟩`,
/// returning the `|0⟩`-ancilla block of the output.
pub fn brute_force_lcu(series: &LcuSeries, unitaries: &[DMatrix<Complex64>], u0: &ComplexVector) -> ComplexVector {
    let terms: Vec<&LcuTerm> = series.terms.iter().filter(|t| t.kind == TermKind::Main).collect();
    let j = terms.len();
    let d = u0.len();
    let w: f64 = terms.iter().map(|t| t.coefficient.norm()).sum();
    let right: Vec<Complex64> = terms.iter().map(|t| t.coefficient.sqrt() / w.sqrt()).collect();
    let left: Vec<Complex64> = terms.iter().map(|t| t.coefficient.sqrt().conj() / w.sqrt()).collect();
    let pr = complete_unitary(&right);
    let pl = complete_unitary(&left);
    let dim = j * d;
    let kron = |p: &DMatrix<Complex64>| {
        DMatrix::from_fn(dim, dim, |r, s| {
            let (ra, rs) = (r / d, r % d);
            let (sa, ss) = (s / d, s % d);
            if rs == ss {
                p[(ra, sa)]
            } else {
                c(0.0, 0.0)
            }
        })
    };
    let mut sel = DMatrix::<Complex64>::zeros(dim, dim);
    for (idx, u) in unitaries.iter().enumerate() {
        sel.view_mut((idx * d, idx * d), (d, d)).copy_from(u);
    }
    let circuit = kron(&pl).adjoint() * sel * kron(&pr);
    let mut input = ComplexVector::zeros(dim);
    for i in 0..d {
        input[i] = u0[i];
    }
    let out = circuit * input;
    ComplexVector::from_fn(d, |i, _| out[i])
}

pub fn scalar_gen(lambda: Complex64) -> GeneratorSpec {
    GeneratorSpec::scalar(lambda, 1.0).unwrap()
}
