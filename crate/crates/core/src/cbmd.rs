//! Truncated contour-based series with lattice poles `ℤ/a`, auxiliary poles
//! `{2i} ∪ {r + i : |r| ≤ m}`, parameter selection and error bounds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{verify_with_residues, ContourSpec, ResidueCheck};
use crate::error::{LabError, Result};
use crate::matrixcore::{spectral_profile, ComplexMatrix, GeneratorSpec, PropagatorPlan, QuadratureRule, I};
use crate::par;
use crate::series::{LcuSeries, LcuTerm, TermKind};

/// Largest auxiliary half-count whose factorials stay representable.
pub const MAX_M: usize = 170;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbmdParams {
    pub m: usize,
    pub a: f64,
    #[serde(rename = "K")]
    pub k_max: u64,
    pub epsilon1: f64,
}

impl CbmdParams {
    pub fn new(m: usize, a: f64, k_max: u64, epsilon1: f64) -> Result<Self> {
        let p = Self { m, a, k_max, epsilon1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(LabError::InvalidKernelParam("m must be at least 1".into()));
        }
        if self.m > MAX_M {
            return Err(LabError::ParamTooLarge(format!("m = {} exceeds {MAX_M}", self.m)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(LabError::InvalidKernelParam(format!("a must be positive, got {}", self.a)));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            return Err(LabError::InvalidTolerance(self.epsilon1));
        }
        if (self.k_max as f64) < 2.0 * self.m as f64 * self.a * (1.0 - 1e-12) {
            return Err(LabError::InvalidKernelParam(format!(
                "K/a = {} is below 2m = {}",
                self.k_max as f64 / self.a,
                2 * self.m
            )));
        }
        Ok(())
    }

    /// `η_max ≤ 2πa`.
    pub fn admits(&self, eta_max: f64) -> bool {
        eta_max <= 2.0 * PI * self.a * (1.0 + 1e-14)
    }

    pub fn term_count(&self) -> u64 {
        2 * self.k_max + 1
    }
}

fn sinh_2pi() -> f64 {
    (2.0 * PI).sinh()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn check_tolerance(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidTolerance(eps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    pub trunc: f64,
    pub aux_2i: f64,
    pub aux_line: f64,
}

impl ErrorBounds {
    pub fn total(&self) -> f64 {
        self.trunc + self.aux_2i + self.aux_line
    }
}

fn trunc_bound(m: usize, ratio: f64) -> f64 {
    let gap = ratio - m as f64;
    if gap <= 0.0 {
        return f64::INFINITY;
    }
    (sinh_2pi().ln() + 2.0 * ln_factorial(m) - (2 * m + 1) as f64 * gap.ln() - 2.0 * PI.ln()).exp()
}

/// The three error groups of the truncated series: lattice tail, `2i` pole and line poles.
pub fn error_bounds(params: &CbmdParams, eta_max: f64) -> ErrorBounds {
    let a = params.a;
    let trunc = trunc_bound(params.m, params.k_max as f64 / a);
    let aux_2i = (2.0 * eta_max - (4.0 * PI * a).exp_m1().ln() + sinh_2pi().ln() - PI.ln()).exp();
    let aux_line = (eta_max - 2.0 * PI * a + sinh_2pi().ln() + 0.5 * (params.m as f64).ln()).exp();
    ErrorBounds { trunc, aux_2i, aux_line }
}

/// Parameters for which every error group is at most `ε₁/3`.
pub fn select_parameters(eta_max: f64, epsilon1: f64) -> Result<CbmdParams> {
    check_tolerance(epsilon1)?;
    if !(eta_max >= 0.0 && eta_max.is_finite()) {
        return Err(LabError::HypothesisViolation(format!("eta_max must be finite and ≥ 0, got {eta_max}")));
    }
    let s = sinh_2pi();
    let third = epsilon1 / 3.0;
    let m = (0.5 * (3.0 * s / (PI * epsilon1)).ln()).ceil().max(1.0) as usize;
    if m > MAX_M {
        return Err(LabError::ParamTooLarge(format!("m = {m} exceeds {MAX_M}")));
    }
    let a_2i = (1.0 + 3.0 * s * (2.0 * eta_max).exp() / (PI * epsilon1)).ln() / (4.0 * PI);
    let a_line = (eta_max + (3.0 * s * (m as f64).sqrt() / epsilon1).ln()) / (2.0 * PI);
    let a = a_2i.max(a_line).max(eta_max / (2.0 * PI)) * (1.0 + 1e-12);

    let need = (s.ln() + 2.0 * ln_factorial(m) - 2.0 * PI.ln() - third.ln()) / (2 * m + 1) as f64;
    let ratio = (m as f64 + need.exp()).max(2.0 * m as f64);
    let mut k_max = (ratio * a).ceil() as u64;
    k_max = k_max.max((2.0 * m as f64 * a).ceil() as u64);
    while trunc_bound(m, k_max as f64 / a) > third {
        k_max += 1;
    }
    CbmdParams::new(m, a, k_max, epsilon1)
}

/// `h₂(x) = Π_{r=−m}^{m} (x − r − i)/(−r − 2i) · (x − 2i)/(−3i)` as `(ln|h₂|, arg h₂)`,
/// with the `r, −r` factors paired.
fn ln_h2(m: usize, x: Complex64) -> Complex64 {
    let xi = x - I;
    let mut acc = (xi / Complex64::new(0.0, -2.0)).ln();
    for r in 1..=m {
        let r2 = (r * r) as f64;
        acc += (xi * xi - r2).ln() - Complex64::new(-(r2 + 4.0), 0.0).ln();
    }
    acc + ((x - 2.0 * I) / Complex64::new(0.0, -3.0)).ln()
}

/// `c_k = (e^{−2πa} − 1) / (a·2πi·(k/a + i)·h₂(k/a))`.
pub fn main_coefficient(params: &CbmdParams, k: i64) -> Complex64 {
    let a = params.a;
    let x = Complex64::new(k as f64 / a, 0.0);
    let num = (-2.0 * PI * a).exp_m1();
    let ln_den = (2.0 * PI * a * I * (x + I)).ln() + ln_h2(params.m, x);
    num * (-ln_den).exp()
}

/// Coefficient of the line pole `r + i`, `|r| ≤ m`.
pub fn aux_line_coefficient(params: &CbmdParams, r: i64) -> Complex64 {
    let (m, a) = (params.m as i64, params.a);
    let rf = r as f64;
    let num = Complex64::new(0.0, -3.0) * (-2.0 * PI * a).exp_m1();
    let e = Complex64::new(2.0 * PI * a, -2.0 * PI * rf * a).exp() - 1.0;
    let den = e * Complex64::new(rf, 2.0) * Complex64::new(rf, -1.0);
    let ln_mag = (1..=m).map(|q| ((q * q) as f64 + 4.0).ln()).sum::<f64>()
        - ln_factorial((m - r) as usize)
        - ln_factorial((m + r) as usize);
    let sign = if (m + r).rem_euclid(2) == 0 { 1.0 } else { -1.0 } * if m % 2 == 0 { 1.0 } else { -1.0 };
    let prod = Complex64::new(0.0, 2.0 * sign) * ln_mag.exp();
    num / den * prod
}

/// Coefficient of the `2i` pole (real and positive).
pub fn aux_2i_coefficient(params: &CbmdParams) -> Complex64 {
    let a = params.a;
    let ln_ratio: f64 = (1..=params.m)
        .map(|r| {
            let r2 = (r * r) as f64;
            (r2 + 4.0).ln() - (r2 + 1.0).ln()
        })
        .sum();
    Complex64::new(-2.0 * (-2.0 * PI * a).exp_m1() * ln_ratio.exp() / (4.0 * PI * a).exp_m1(), 0.0)
}

/// The main lattice terms `|k| ≤ K`, optionally followed by the `2m + 1`
/// line-pole terms and the `2i` term.
pub fn build_series(params: &CbmdParams, include_aux: bool) -> Result<LcuSeries> {
    params.validate()?;
    let kk = params.k_max as i64;
    let n = (2 * kk + 1) as usize;
    let mut terms = par::map_indexed(n, |j| {
        let k = j as i64 - kk;
        LcuTerm::main(main_coefficient(params, k), k as f64 / params.a)
    });
    if include_aux {
        let m = params.m as i64;
        for r in -m..=m {
            terms.push(LcuTerm::aux(
                aux_line_coefficient(params, r),
                Complex64::new(r as f64, 1.0),
                TermKind::AuxLine,
            ));
        }
        terms.push(LcuTerm::aux(aux_2i_coefficient(params), Complex64::new(0.0, 2.0), TermKind::Aux2i));
    }
    LcuSeries::new(terms)
}

/// Checks `L(t) ⪰ 0` on the grid and returns `η_max`.
pub fn check_psd(gen: &GeneratorSpec) -> Result<f64> {
    let profile = spectral_profile(gen, QuadratureRule::Trapezoid)?;
    for (t, lo) in profile.times.iter().zip(&profile.alpha_min_t) {
        let scale = profile.alpha_a.max(1.0);
        if *lo < -1e-12 * scale {
            return Err(LabError::HypothesisViolation(format!(
                "L(t) is not positive semidefinite at t = {t} (min eigenvalue {lo:.3e})"
            )));
        }
    }
    Ok(profile.eta_max)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub residual: f64,
    pub bounds: ErrorBounds,
    pub eta_max: f64,
    pub main_terms: usize,
    pub aux_terms: usize,
}

/// Norm of `target − main sum − auxiliary sums` for the full three-group identity.
pub fn verify_identity(gen: &GeneratorSpec, params: &CbmdParams, steps: usize) -> Result<IdentityReport> {
    let eta_max = check_psd(gen)?;
    if !params.admits(eta_max) {
        return Err(LabError::HypothesisViolation(format!(
            "eta_max = {eta_max} exceeds 2πa = {}",
            2.0 * PI * params.a
        )));
    }
    let series = build_series(params, true)?;
    let plan = PropagatorPlan::new(gen, steps)?;
    let target = plan.matrix(Complex64::new(1.0, 0.0))?;
    let parts = par::try_map_indexed(series.terms.len(), |j| {
        let t = series.terms[j];
        Ok::<_, LabError>(plan.matrix(t.multiplier())?.scale(t.coefficient))
    })?;
    let sum = par::pairwise_sum(&parts).expect("series is non-empty");
    let residual = ComplexMatrix::from_raw(target.inner() - sum.inner()).spectral_norm()?;
    Ok(IdentityReport {
        residual,
        bounds: error_bounds(params, eta_max),
        eta_max,
        main_terms: series.count(TermKind::Main),
        aux_terms: series.count(TermKind::AuxLine) + series.count(TermKind::Aux2i),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedRatio {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BoundedRatio {
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * self.value.abs().max(1.0);
        self.value >= self.lower - slack && self.value <= self.upper + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductInequality {
    /// `Π(r² + c²)/Π r² ∈ [1, sinh(πc)/(πc)]`.
    pub plus: BoundedRatio,
    /// `Π(r² − c²)/Π r² ∈ [sin(πc)/(πc), 1]`, evaluated for `0 ≤ c ≤ 1`.
    pub minus: Option<BoundedRatio>,
}

impl ProductInequality {
    pub fn lower_ok(&self) -> bool {
        self.plus.holds()
    }

    pub fn upper_ok(&self) -> bool {
        self.minus.map_or(true, |b| b.holds())
    }
}

fn sinc_like(f: fn(f64) -> f64, x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        f(x) / x
    }
}

pub fn product_inequality_check(m: usize, c: f64) -> ProductInequality {
    let c2 = c * c;
    let plus: f64 = (1..=m).map(|r| 1.0 + c2 / (r * r) as f64).product();
    let plus = BoundedRatio {
        value: plus,
        lower: 1.0,
        upper: sinc_like(f64::sinh, PI * c),
    };
    let minus = (0.0..=1.0).contains(&c).then(|| BoundedRatio {
        value: (1..=m).map(|r| 1.0 - c2 / (r * r) as f64).product(),
        lower: sinc_like(f64::sin, PI * c),
        upper: 1.0,
    });
    ProductInequality { plus, minus }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightBound {
    pub weight: f64,
    pub proof_bound: f64,
}

impl WeightBound {
    pub fn holds(&self) -> bool {
        self.weight <= self.proof_bound
    }
}

/// Compares `Σ|c_k|` with `(3 sinh(2π)/(2π²))·(1/a)·Σ_{|k|≤K} 1/((k/a)² + 1)`.
pub fn weight_bound_check(series: &LcuSeries, params: &CbmdParams) -> WeightBound {
    let a = params.a;
    let kk = params.k_max as i64;
    let lattice: Vec<f64> = (-kk..=kk)
        .map(|k| {
            let x = k as f64 / a;
            1.0 / (x * x + 1.0)
        })
        .collect();
    WeightBound {
        weight: series.total_weight,
        proof_bound: 3.0 * sinh_2pi() / (2.0 * PI * PI) / a * par::pairwise_sum_f64(&lattice),
    }
}

/// Integrand `(e^{−2πa} − 1)·U(iz) / ((z + i)·h₂(z)·(e^{−2πiaz} − 1))` of the
/// series identity, with `U(w) = T exp(∫(−iH − wL))`.
pub fn contour_integrand(plan: &PropagatorPlan, params: &CbmdParams, z: Complex64) -> nalgebra::DMatrix<Complex64> {
    let a = params.a;
    let h1 = (-2.0 * PI * a * I * z).exp() - 1.0;
    let den = (z + I) * ln_h2(params.m, z).exp() * h1;
    let scale = (-2.0 * PI * a).exp_m1() / den;
    match plan.matrix(I * z) {
        Ok(u) => u.into_inner() * scale,
        Err(_) => nalgebra::DMatrix::from_element(plan.dim(), plan.dim(), Complex64::new(f64::NAN, 0.0)),
    }
}

/// Residue-theorem check of the identity integrand on the square with
/// vertices `±R ± iR`, `R = (2N + 1)/(2a)`, against closed-form residues.
pub fn square_contour_check(
    gen: &GeneratorSpec,
    params: &CbmdParams,
    n: u64,
    nodes_per_unit_length: usize,
) -> Result<ResidueCheck> {
    let a = params.a;
    let r_half = (2 * n + 1) as f64 / (2.0 * a);
    if r_half <= (params.m as f64).hypot(1.0).max(2.0) {
        return Err(LabError::InvalidContour(format!(
            "square half-width {r_half} does not enclose the auxiliary poles"
        )));
    }
    let plan = PropagatorPlan::new(gen, 1)?;
    let contour = ContourSpec::rectangle(
        Complex64::new(-r_half, -r_half),
        Complex64::new(r_half, r_half),
        nodes_per_unit_length,
    );
    let mut residues = vec![plan.matrix(Complex64::new(1.0, 0.0))?];
    let nn = n as i64;
    for k in -nn..=nn {
        let u = plan.matrix(I * (k as f64 / a))?;
        residues.push(u.scale(-main_coefficient(params, k)));
    }
    let m = params.m as i64;
    for r in -m..=m {
        let u = plan.matrix(I * Complex64::new(r as f64, 1.0))?;
        residues.push(u.scale(-aux_line_coefficient(params, r)));
    }
    let u = plan.matrix(Complex64::new(-2.0, 0.0))?;
    residues.push(u.scale(-aux_2i_coefficient(params)));
    verify_with_residues(|z| contour_integrand(&plan, params, z), &contour, &residues)
}
