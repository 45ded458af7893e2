use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{expm, hermitian_eigen, hermitian_split, ComplexMatrix, ComplexVector, HermitianSplit, I};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Constant,
    TimeSampled,
}

/// The generator `A(t) = L(t) + iH(t)` on `[0, T]`, either constant or given
/// on a time grid with entrywise piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    kind: GeneratorKind,
    t_final: f64,
    times: Vec<f64>,
    samples: Vec<ComplexMatrix>,
    splits: Vec<HermitianSplit>,
    diagonal: bool,
}

impl GeneratorSpec {
    pub fn constant(a: ComplexMatrix, t_final: f64) -> Result<Self> {
        check_horizon(t_final)?;
        Self::assemble(GeneratorKind::Constant, vec![0.0, t_final], vec![a.clone(), a])
    }

    pub fn scalar(lambda: Complex64, t_final: f64) -> Result<Self> {
        Self::constant(ComplexMatrix::scalar(lambda)?, t_final)
    }

    pub fn time_sampled(times: Vec<f64>, samples: Vec<ComplexMatrix>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(LabError::InvalidGenerator("samples: at least 2 samples required".into()));
        }
        if times.len() != samples.len() {
            return Err(LabError::InvalidGenerator(format!(
                "times: {} grid points for {} samples",
                times.len(),
                samples.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(LabError::InvalidGenerator("times: non-finite entry".into()));
        }
        if times[0] != 0.0 {
            return Err(LabError::InvalidGenerator("times: first grid point must be 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidGenerator("times: grid must be strictly increasing".into()));
        }
        check_horizon(*times.last().expect("non-empty"))?;
        Self::assemble(GeneratorKind::TimeSampled, times, samples)
    }

    /// Samples `a(t)` on a uniform grid of `points` nodes over `[0, T]`.
    pub fn sampled_from_fn<F>(t_final: f64, points: usize, a: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<ComplexMatrix>,
    {
        if points < 2 {
            return Err(LabError::InvalidGenerator("samples: at least 2 samples required".into()));
        }
        let times: Vec<f64> = (0..points)
            .map(|i| {
                if i + 1 == points {
                    t_final
                } else {
                    t_final * i as f64 / (points - 1) as f64
                }
            })
            .collect();
        let samples = times.iter().map(|&t| a(t)).collect::<Result<Vec<_>>>()?;
        Self::time_sampled(times, samples)
    }

    fn assemble(kind: GeneratorKind, times: Vec<f64>, samples: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = samples[0].dim();
        if let Some(i) = samples.iter().position(|s| s.dim() != dim) {
            return Err(LabError::InvalidGenerator(format!(
                "samples[{i}]: dimension {} differs from {dim}",
                samples[i].dim()
            )));
        }
        let splits = samples.iter().map(hermitian_split).collect::<Result<Vec<_>>>()?;
        let diagonal = samples.iter().all(ComplexMatrix::is_diagonal);
        Ok(Self {
            kind,
            t_final: *times.last().expect("non-empty"),
            times,
            samples,
            splits,
            diagonal,
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    /// Grid times; `[0, T]` for a constant generator.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Samples on the grid; a constant generator repeats its matrix at both ends.
    pub fn samples(&self) -> &[ComplexMatrix] {
        &self.samples
    }

    pub fn splits(&self) -> &[HermitianSplit] {
        &self.splits
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Hermitian split of the interpolated generator at time `t`.
    pub fn split_at(&self, t: f64) -> HermitianSplit {
        if self.kind == GeneratorKind::Constant {
            return self.splits[0].clone();
        }
        let n = self.times.len();
        let idx = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (t0, t1) = (self.times[idx], self.times[idx + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let lerp = |a: &ComplexMatrix, b: &ComplexMatrix| {
            ComplexMatrix::from_raw(a.inner() * Complex64::new(1.0 - w, 0.0) + b.inner() * Complex64::new(w, 0.0))
        };
        let (s0, s1) = (&self.splits[idx], &self.splits[idx + 1]);
        HermitianSplit {
            h: lerp(&s0.h, &s1.h),
            l: lerp(&s0.l, &s1.l),
        }
    }

    /// Applies `f(t_i, A(t_i))` to every grid sample.
    pub fn map_samples<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(f64, &ComplexMatrix) -> Result<ComplexMatrix>,
    {
        let samples = self
            .times
            .iter()
            .zip(&self.samples)
            .map(|(&t, a)| f(t, a))
            .collect::<Result<Vec<_>>>()?;
        match self.kind {
            GeneratorKind::Constant => Self::constant(samples[0].clone(), self.t_final),
            GeneratorKind::TimeSampled => Self::time_sampled(self.times.clone(), samples),
        }
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidGenerator(format!("T: must be finite and positive, got {t}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorJson {
    kind: GeneratorKind,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<ComplexMatrix>>,
}

impl Serialize for GeneratorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self.kind {
            GeneratorKind::Constant => GeneratorJson {
                kind: self.kind,
                t_final: self.t_final,
                a: Some(self.samples[0].clone()),
                times: None,
                samples: None,
            },
            GeneratorKind::TimeSampled => GeneratorJson {
                kind: self.kind,
                t_final: self.t_final,
                a: None,
                times: Some(self.times.clone()),
                samples: Some(self.samples.clone()),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = GeneratorJson::deserialize(d)?;
        let spec = match raw.kind {
            GeneratorKind::Constant => {
                let a = match (raw.a, raw.samples) {
                    (Some(a), None) => a,
                    (None, Some(mut s)) if s.len() == 1 => s.remove(0),
                    (None, Some(_)) => return Err(D::Error::custom("samples: constant generator takes exactly one sample")),
                    (Some(_), Some(_)) => return Err(D::Error::custom("A: give either A or samples, not both")),
                    (None, None) => return Err(D::Error::custom("A: missing matrix for constant generator")),
                };
                GeneratorSpec::constant(a, raw.t_final)
            }
            GeneratorKind::TimeSampled => {
                let times = raw.times.ok_or_else(|| D::Error::custom("times: missing for time_sampled generator"))?;
                let samples = raw
                    .samples
                    .ok_or_else(|| D::Error::custom("samples: missing for time_sampled generator"))?;
                if let Some(&last) = times.last() {
                    if (last - raw.t_final).abs() > 1e-12 * raw.t_final.abs().max(1.0) {
                        return Err(D::Error::custom(format!("times: last grid point {last} differs from T = {}", raw.t_final)));
                    }
                }
                GeneratorSpec::time_sampled(times, samples)
            }
        };
        spec.map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[derive(Debug, Clone)]
struct StepData {
    split: HermitianSplit,
    h_norm: f64,
    l_norm: f64,
}

/// Pre-sampled midpoint data for evaluating `U(z) = T exp(∫(−iH(s) − zL(s)) ds)`
/// for many multipliers `z` on one generator.
#[derive(Debug, Clone)]
pub struct PropagatorPlan {
    kind: GeneratorKind,
    dim: usize,
    dt: f64,
    steps: usize,
    diagonal: bool,
    data: Vec<StepData>,
}

impl PropagatorPlan {
    pub fn new(gen: &GeneratorSpec, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(LabError::InvalidGenerator("steps: must be at least 1".into()));
        }
        let (dt, mids): (f64, Vec<f64>) = match gen.kind() {
            GeneratorKind::Constant => (gen.t_final(), vec![0.0]),
            GeneratorKind::TimeSampled => {
                let dt = gen.t_final() / steps as f64;
                (dt, (0..steps).map(|n| (n as f64 + 0.5) * dt).collect())
            }
        };
        let data = mids
            .iter()
            .map(|&t| {
                let split = gen.split_at(t);
                Ok(StepData {
                    h_norm: split.h.spectral_norm()?,
                    l_norm: split.l.spectral_norm()?,
                    split,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: gen.kind(),
            dim: gen.dim(),
            dt,
            steps: data.len(),
            diagonal: gen.is_diagonal(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of exponential factors in the product (1 for constant generators).
    pub fn factors(&self) -> usize {
        self.steps
    }

    /// Upper bound on `‖Δt(iH + zL)‖` over all steps.
    pub fn step_norm(&self, z: Complex64) -> f64 {
        self.data
            .iter()
            .map(|d| self.dt * (d.h_norm + z.norm() * d.l_norm))
            .fold(0.0, f64::max)
    }

    fn check_steps(&self, z: Complex64) -> Result<()> {
        if self.kind == GeneratorKind::TimeSampled {
            let step_norm = self.step_norm(z);
            if step_norm > 1.0 {
                return Err(LabError::StepTooCoarse {
                    steps: self.steps,
                    step_norm,
                });
            }
        }
        Ok(())
    }

    fn factor(&self, d: &StepData, z: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.dim;
        let dt = self.dt;
        if self.diagonal {
            return Ok(DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    diag_exponent(d, i, z, dt).exp()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
        if z.re == 0.0 {
            let herm = d.split.h.inner() + d.split.l.inner() * Complex64::new(z.im, 0.0);
            let (vals, vecs) = hermitian_eigen(&herm)?;
            let mut scaled = vecs.clone();
            for (j, &lam) in vals.iter().enumerate() {
                let phase = Complex64::from_polar(1.0, -dt * lam);
                for i in 0..n {
                    scaled[(i, j)] *= phase;
                }
            }
            return Ok(scaled * vecs.adjoint());
        }
        let g = (d.split.h.inner() * I + d.split.l.inner() * z) * Complex64::new(-dt, 0.0);
        Ok(expm(&ComplexMatrix::from_raw(g))?.into_inner())
    }

    /// The propagator `U(z)` as a matrix.
    pub fn matrix(&self, z: Complex64) -> Result<ComplexMatrix> {
        self.check_steps(z)?;
        let mut u = DMatrix::<Complex64>::identity(self.dim, self.dim);
        for d in &self.data {
            u = self.factor(d, z)? * u;
        }
        ComplexMatrix::new(u).map_err(|_| LabError::NumericalFailure("propagator has non-finite entries".into()))
    }

    /// `U(z)·v`.
    pub fn apply(&self, z: Complex64, v: &ComplexVector) -> Result<ComplexVector> {
        if v.len() != self.dim {
            return Err(LabError::InvalidState(format!(
                "state has length {}, generator has dimension {}",
                v.len(),
                self.dim
            )));
        }
        self.check_steps(z)?;
        if self.diagonal {
            let mut out = v.clone();
            for (i, x) in out.iter_mut().enumerate() {
                let e: Complex64 = self.data.iter().map(|d| diag_exponent(d, i, z, self.dt)).sum();
                *x *= e.exp();
            }
            return Ok(out);
        }
        let mut out = v.clone();
        for d in &self.data {
            out = self.factor(d, z)? * out;
        }
        Ok(out)
    }
}

fn diag_exponent(d: &StepData, i: usize, z: Complex64, dt: f64) -> Complex64 {
    -(I * d.split.h[(i, i)] + z * d.split.l[(i, i)]) * dt
}

/// `T exp(∫₀ᵀ(−iH(s) − zL(s)) ds)` by the exponential-midpoint product.
pub fn time_ordered_exp(gen: &GeneratorSpec, z: Complex64, steps: usize) -> Result<ComplexMatrix> {
    PropagatorPlan::new(gen, steps)?.matrix(z)
}

/// Smallest step count whose per-step norm bound stays ≤ 1 for every `z` with `|z| ≤ z_abs`.
pub fn min_steps(gen: &GeneratorSpec, z_abs: f64) -> Result<usize> {
    if gen.kind() == GeneratorKind::Constant {
        return Ok(1);
    }
    let mut worst: f64 = 0.0;
    for s in gen.splits() {
        worst = worst.max(s.h.spectral_norm()? + z_abs * s.l.spectral_norm()?);
    }
    Ok(((gen.t_final() * worst).ceil() as usize).max(1))
}
