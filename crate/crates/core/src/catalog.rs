//! Built-in test problems.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrixcore::{vector_json, ComplexMatrix, ComplexVector, GeneratorSpec, I};
use crate::solver::CompareProblem;

pub const DEFAULT_SEED: u64 = 7;

pub const TAG_SCALAR: &str = "scalar";
pub const TAG_NON_NORMAL: &str = "non-normal";
pub const TAG_TIME_DEPENDENT: &str = "time-dependent";
pub const TAG_DISSIPATIVE: &str = "dissipative";
pub const TAG_UNITARY: &str = "unitary";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemCatalogEntry {
    pub name: String,
    pub description: String,
    pub gen: GeneratorSpec,
    #[serde(with = "vector_json")]
    pub u0: ComplexVector,
    pub tags: Vec<String>,
    /// `L` is indefinite and the problem needs the exact minimum shift.
    pub needs_shift: bool,
}

impl ProblemCatalogEntry {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn problem(&self) -> CompareProblem {
        CompareProblem {
            name: self.name.clone(),
            gen: self.gen.clone(),
            u0: self.u0.clone(),
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn state(v: &[Complex64]) -> ComplexVector {
    let x = ComplexVector::from_column_slice(v);
    let n = x.norm();
    x / c(n, 0.0)
}

fn entry(name: &str, description: &str, gen: GeneratorSpec, u0: ComplexVector, tags: &[&str], needs_shift: bool) -> ProblemCatalogEntry {
    ProblemCatalogEntry {
        name: name.to_string(),
        description: description.to_string(),
        gen,
        u0,
        tags: tags.iter().map(|t| t.to_string()).collect(),
        needs_shift,
    }
}

fn draw(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Random constant `A = L + iH` on `[0, 1]` with `L ⪰ 0` and `‖A‖ = norm`, plus a random unit state.
pub fn random_psd_problem(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> Result<(GeneratorSpec, ComplexVector)> {
    let g = draw(rng, n);
    let b = draw(rng, n);
    let l = g.adjoint() * &g;
    let h = (&b + b.adjoint()) * c(0.5, 0.0);
    let a = ComplexMatrix::new(l + h * I)?;
    let scale = norm / a.spectral_norm()?;
    let a = a.scale(c(scale, 0.0));
    let u: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Ok((GeneratorSpec::constant(a, 1.0)?, state(&u)))
}

/// Random Hermitian pair `(H, L)` with `‖H‖ = ‖L‖ = 1`.
pub fn random_hermitian_pair(rng: &mut ChaCha8Rng, n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let mut herm = || -> Result<ComplexMatrix> {
        let b = draw(rng, n);
        let h = ComplexMatrix::new((&b + b.adjoint()) * c(0.5, 0.0))?;
        let norm = h.spectral_norm()?;
        Ok(h.scale(c(1.0 / norm, 0.0)))
    };
    Ok((herm()?, herm()?))
}

/// A ChaCha generator on stream `stream` of `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The catalog; random entries draw from stream `index` of a ChaCha generator seeded with `seed`.
pub fn catalog(seed: u64) -> Result<Vec<ProblemCatalogEntry>> {
    let one = c(1.0, 0.0);
    let mut out = vec![
        entry("scalar-1", "A = 1, T = 1", GeneratorSpec::scalar(one, 1.0)?, state(&[one]), &[TAG_SCALAR, TAG_DISSIPATIVE], false),
        entry(
            "scalar-complex",
            "A = 2 + i, T = 1",
            GeneratorSpec::scalar(c(2.0, 1.0), 1.0)?,
            state(&[one]),
            &[TAG_SCALAR, TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "scalar-half",
            "A = 0.5, T = 1",
            GeneratorSpec::scalar(c(0.5, 0.0), 1.0)?,
            state(&[one]),
            &[TAG_SCALAR, TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "diag-5-6",
            "A = diag(5, 6), T = 1",
            GeneratorSpec::constant(ComplexMatrix::real_diagonal(&[5.0, 6.0])?, 1.0)?,
            state(&[one, one]),
            &[TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "diag-1-2",
            "A = diag(1, 2), T = 1",
            GeneratorSpec::constant(ComplexMatrix::real_diagonal(&[1.0, 2.0])?, 1.0)?,
            state(&[one, one]),
            &[TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "jordan",
            "A = [[1, 5], [0, 1]], T = 1; L has eigenvalues -1.5 and 3.5",
            GeneratorSpec::constant(ComplexMatrix::from_real_rows(&[vec![1.0, 5.0], vec![0.0, 1.0]])?, 1.0)?,
            state(&[one, one]),
            &[TAG_NON_NORMAL],
            true,
        ),
        entry(
            "damped-oscillator",
            "A = [[0.2, 1], [-1, 0.4]], T = 2",
            GeneratorSpec::constant(ComplexMatrix::from_real_rows(&[vec![0.2, 1.0], vec![-1.0, 0.4]])?, 2.0)?,
            state(&[one, c(0.0, 0.0)]),
            &[TAG_DISSIPATIVE, TAG_NON_NORMAL],
            false,
        ),
        entry(
            "time-dep-scalar",
            "A(t) = 1 + t on [0, 1]",
            GeneratorSpec::sampled_from_fn(1.0, 9, |t| ComplexMatrix::scalar(c(1.0 + t, 0.0)))?,
            state(&[one]),
            &[TAG_SCALAR, TAG_TIME_DEPENDENT, TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "time-dep-rotating",
            "A(t) = diag(0.3, 0.3 + 0.4t) + i(1 + t)X on [0, 1]",
            GeneratorSpec::sampled_from_fn(1.0, 9, |t| {
                ComplexMatrix::from_rows(&[vec![c(0.3, 0.0), c(0.0, 1.0 + t)], vec![c(0.0, 1.0 + t), c(0.3 + 0.4 * t, 0.0)]])
            })?,
            state(&[one, one]),
            &[TAG_TIME_DEPENDENT, TAG_DISSIPATIVE],
            false,
        ),
        entry(
            "pure-unitary",
            "A = iH with H = [[1, 0.5], [0.5, -1]], T = 1",
            GeneratorSpec::constant(
                ComplexMatrix::from_rows(&[vec![I, c(0.0, 0.5)], vec![c(0.0, 0.5), -I]])?,
                1.0,
            )?,
            state(&[one, c(0.0, 1.0)]),
            &[TAG_UNITARY],
            false,
        ),
    ];
    let mut rng = seeded_rng(seed, out.len() as u64);
    let (gen, u0) = random_psd_problem(&mut rng, 4, 2.0)?;
    out.push(entry(
        "random-4",
        "random 4x4 L + iH with L PSD and norm 2, T = 1",
        gen,
        u0,
        &[TAG_DISSIPATIVE, TAG_NON_NORMAL],
        false,
    ));
    Ok(out)
}

pub fn find(name: &str, seed: u64) -> Result<ProblemCatalogEntry> {
    catalog(seed)?
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| LabError::InvalidGenerator(format!("no catalog problem named '{name}'")))
}
