//! Lattice kernels sharing the `ℤ/a` poles: the contour series and three
//! linear-combination-of-Hamiltonian-simulation weights (original, improved,
//! optimal), their parameter rules and a scalar remainder oracle.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cbmd::{self, check_tolerance, CbmdParams};
use crate::error::{LabError, Result};
use crate::matrixcore::I;
use crate::series::{LcuSeries, LcuTerm, TermSource};

/// Upper limit on `K` accepted by the truncation search of the improved kernel.
const MAX_SEARCH_K: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Cbmd,
    LchsOriginal,
    LchsImproved,
    LchsOptimal,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Cbmd,
        KernelKind::LchsOriginal,
        KernelKind::LchsImproved,
        KernelKind::LchsOptimal,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn short_name(&self) -> &'static str {
        match self {
            KernelKind::Cbmd => "cbmd",
            KernelKind::LchsOriginal => "original",
            KernelKind::LchsImproved => "improved",
            KernelKind::LchsOptimal => "optimal",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for KernelKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbmd" => Ok(Self::Cbmd),
            "original" | "lchs_original" | "lchs-original" => Ok(Self::LchsOriginal),
            "improved" | "lchs_improved" | "lchs-improved" => Ok(Self::LchsImproved),
            "optimal" | "lchs_optimal" | "lchs-optimal" => Ok(Self::LchsOptimal),
            other => Err(LabError::InvalidKernelParam(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A kernel with all parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Cbmd {
        m: usize,
        a: f64,
        #[serde(rename = "K")]
        k_max: u64,
        epsilon1: f64,
    },
    LchsOriginal {
        a: f64,
        #[serde(rename = "K")]
        k_max: u64,
    },
    LchsImproved {
        a: f64,
        #[serde(rename = "K")]
        k_max: u64,
        beta: f64,
    },
    LchsOptimal {
        a: f64,
        #[serde(rename = "K")]
        k_max: u64,
        c: f64,
        gamma: f64,
    },
}

impl From<CbmdParams> for KernelConfig {
    fn from(p: CbmdParams) -> Self {
        KernelConfig::Cbmd {
            m: p.m,
            a: p.a,
            k_max: p.k_max,
            epsilon1: p.epsilon1,
        }
    }
}

impl KernelConfig {
    pub fn kind(&self) -> KernelKind {
        match self {
            KernelConfig::Cbmd { .. } => KernelKind::Cbmd,
            KernelConfig::LchsOriginal { .. } => KernelKind::LchsOriginal,
            KernelConfig::LchsImproved { .. } => KernelKind::LchsImproved,
            KernelConfig::LchsOptimal { .. } => KernelKind::LchsOptimal,
        }
    }

    pub fn a(&self) -> f64 {
        match *self {
            KernelConfig::Cbmd { a, .. }
            | KernelConfig::LchsOriginal { a, .. }
            | KernelConfig::LchsImproved { a, .. }
            | KernelConfig::LchsOptimal { a, .. } => a,
        }
    }

    pub fn k_max(&self) -> u64 {
        match *self {
            KernelConfig::Cbmd { k_max, .. }
            | KernelConfig::LchsOriginal { k_max, .. }
            | KernelConfig::LchsImproved { k_max, .. }
            | KernelConfig::LchsOptimal { k_max, .. } => k_max,
        }
    }

    pub fn with_k_max(&self, k: u64) -> Self {
        let mut out = *self;
        match &mut out {
            KernelConfig::Cbmd { k_max, .. }
            | KernelConfig::LchsOriginal { k_max, .. }
            | KernelConfig::LchsImproved { k_max, .. }
            | KernelConfig::LchsOptimal { k_max, .. } => *k_max = k,
        }
        out
    }

    pub fn term_count(&self) -> u64 {
        2 * self.k_max() + 1
    }

    pub fn max_abs_k(&self) -> f64 {
        self.k_max() as f64 / self.a()
    }

    pub fn cbmd_params(&self) -> Option<CbmdParams> {
        match *self {
            KernelConfig::Cbmd { m, a, k_max, epsilon1 } => Some(CbmdParams { m, a, k_max, epsilon1 }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.a();
        if !(a.is_finite() && a > 0.0) {
            return Err(LabError::InvalidKernelParam(format!("a must be positive, got {a}")));
        }
        match *self {
            KernelConfig::Cbmd { .. } => self.cbmd_params().expect("cbmd").validate(),
            KernelConfig::LchsOriginal { .. } => Ok(()),
            KernelConfig::LchsImproved { beta, .. } => check_beta(beta),
            KernelConfig::LchsOptimal { c, gamma, .. } => check_optimal(c, gamma),
        }
    }

    /// The shared hypothesis `η_max ≤ 2πa`.
    pub fn check_hypothesis(&self, eta_max: f64) -> Result<()> {
        if eta_max > 2.0 * PI * self.a() * (1.0 + 1e-14) {
            Err(LabError::HypothesisViolation(format!(
                "eta_max = {eta_max} exceeds 2πa = {}",
                2.0 * PI * self.a()
            )))
        } else {
            Ok(())
        }
    }

    /// Coefficient of the lattice term `k`.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        let a = self.a();
        let x = k as f64 / a;
        match *self {
            KernelConfig::Cbmd { .. } => cbmd::main_coefficient(&self.cbmd_params().expect("cbmd"), k),
            KernelConfig::LchsOriginal { .. } => Complex64::new(original_weight(a, x), 0.0),
            KernelConfig::LchsImproved { beta, .. } => improved_coefficient(a, beta, x),
            KernelConfig::LchsOptimal { c, gamma, .. } => {
                original_weight(a, x) * (Complex64::new(-(x * x + 1.0) / (4.0 * gamma * gamma) + c, -c * x)).exp()
            }
        }
    }

    /// Lazily evaluated main terms `|k| ≤ K`.
    pub fn source(&self) -> Result<KernelSource> {
        self.validate()?;
        Ok(KernelSource { config: *self })
    }

    pub fn series(&self) -> Result<LcuSeries> {
        LcuSeries::from_source(&self.source()?)
    }
}

fn original_weight(a: f64, x: f64) -> f64 {
    -(-2.0 * PI * a).exp_m1() / (a * PI * (1.0 + x * x))
}

fn improved_coefficient(a: f64, beta: f64, x: f64) -> Complex64 {
    let front = (-2.0 * PI * a).exp_m1() / (2.0 * PI * a * I * Complex64::new(x, 1.0));
    front * (2f64.powf(beta) - Complex64::new(1.0, x).powf(beta)).exp()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidKernelParam(format!("beta must lie in (0, 1), got {beta}")))
    }
}

fn check_optimal(c: f64, gamma: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(LabError::InvalidKernelParam(format!("c must be positive, got {c}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(LabError::InvalidKernelParam(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Main terms of a kernel generated on demand, ordered `k = −K..=K`.
#[derive(Debug, Clone, Copy)]
pub struct KernelSource {
    config: KernelConfig,
}

impl KernelSource {
    pub fn config(&self) -> &KernelConfig {
        &self.config
    }
}

impl TermSource for KernelSource {
    fn len(&self) -> usize {
        self.config.term_count() as usize
    }

    fn term(&self, j: usize) -> LcuTerm {
        let k = j as i64 - self.config.k_max() as i64;
        LcuTerm::main(self.config.coefficient(k), k as f64 / self.config.a())
    }

    fn max_abs_main_k(&self) -> f64 {
        self.config.max_abs_k()
    }
}

/// `c_k = (1 − e^{−2πa})/(aπ(1 + (k/a)²))`.
pub fn original_series(a: f64, k_max: u64) -> Result<LcuSeries> {
    KernelConfig::LchsOriginal { a, k_max }.series()
}

/// `c_k = (e^{−2πa} − 1)/(a·2πi·(k/a + i))·e^{2^β}·e^{−(1 + ik/a)^β}` on the principal branch.
pub fn improved_series(a: f64, beta: f64, k_max: u64) -> Result<LcuSeries> {
    KernelConfig::LchsImproved { a, k_max, beta }.series()
}

/// Original weights times `e^{−((k/a)² + 1)/(4γ²) + c(1 − ik/a)}`.
pub fn optimal_series(a: f64, c: f64, gamma: f64, k_max: u64) -> Result<LcuSeries> {
    KernelConfig::LchsOptimal { a, k_max, c, gamma }.series()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub beta: f64,
    pub c: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { beta: 0.8, c: 1.0 }
    }
}

/// Smallest `K` with `Σ_{|k|>K} |c_k| ≤ tail` for the improved kernel.
fn improved_truncation(a: f64, beta: f64, tail: f64) -> Result<u64> {
    let modulus = |k: u64| improved_coefficient(a, beta, k as f64 / a).norm();
    let head = modulus(0).max(1e-300);
    let mut mags = Vec::new();
    let mut k = 1u64;
    loop {
        let m = modulus(k);
        mags.push(m);
        if m < 1e-22 * head && m * (k as f64) < 1e-3 * tail {
            break;
        }
        k += 1;
        if k > MAX_SEARCH_K {
            return Err(LabError::ParamTooLarge(format!(
                "improved kernel with beta = {beta} needs K > {MAX_SEARCH_K}"
            )));
        }
    }
    let mut acc = 0.0;
    let mut kk = mags.len() as u64;
    for (i, m) in mags.iter().enumerate().rev() {
        if acc + 2.0 * m > tail {
            return Ok(i as u64 + 1);
        }
        acc += 2.0 * m;
        kk = i as u64;
    }
    Ok(kk)
}

/// Parameters for `kind` at tolerance `epsilon` on generators with `η_max`.
pub fn select_kernel_parameters(
    kind: KernelKind,
    eta_max: f64,
    epsilon: f64,
    options: KernelOptions,
) -> Result<KernelConfig> {
    check_tolerance(epsilon)?;
    if !(eta_max >= 0.0 && eta_max.is_finite()) {
        return Err(LabError::HypothesisViolation(format!("eta_max must be finite and ≥ 0, got {eta_max}")));
    }
    let log_inv = (1.0 / epsilon).ln();
    let cfg = match kind {
        KernelKind::Cbmd => cbmd::select_parameters(eta_max, epsilon)?.into(),
        KernelKind::LchsOriginal => {
            let a = eta_max + log_inv;
            KernelConfig::LchsOriginal {
                a,
                k_max: (a / epsilon).ceil() as u64,
            }
        }
        KernelKind::LchsImproved => {
            check_beta(options.beta)?;
            let a = eta_max + log_inv;
            KernelConfig::LchsImproved {
                a,
                k_max: improved_truncation(a, options.beta, 0.5 * epsilon)?,
                beta: options.beta,
            }
        }
        KernelKind::LchsOptimal => {
            let c = options.c;
            check_optimal(c, 1.0)?;
            let inner = c + (1.0 / (2.0 * PI * epsilon)).ln();
            if inner <= 0.0 {
                return Err(LabError::InvalidKernelParam(format!(
                    "c + ln(1/(2πε)) = {inner} must be positive"
                )));
            }
            let gamma = (inner.sqrt() / c).max(c.powf(-0.75));
            let a = eta_max + log_inv + 2.0 * c;
            let ratio = (2.0 * c * gamma * gamma).ceil();
            KernelConfig::LchsOptimal {
                a,
                k_max: (ratio * a).ceil() as u64,
                c,
                gamma,
            }
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Branch-cut remainder of the improved kernel for the scalar generator `λ = l + ih`:
///
/// `∫₀^∞ (e^{−2πa} − 1)·e^{(−ih + (1+z)l)T} / (π(z + 2)·e^{−2^β}·(e^{2πa(1+z)} − 1))
///        · e^{−z^β cos πβ}·sin(z^β sin πβ) dz`,
///
/// which equals `e^{−λT}` minus the untruncated lattice sum. Evaluated with
/// `z = u^q`, `q = 4/β`, composite Gauss–Legendre panels, and truncation where
/// the integrand drops below `1e−16` of its peak.
pub fn improved_remainder_scalar(a: f64, beta: f64, lambda: Complex64, t_final: f64) -> Result<Complex64> {
    check_beta(beta)?;
    if lambda.re < 0.0 {
        return Err(LabError::HypothesisViolation(format!("Re(lambda) = {} < 0", lambda.re)));
    }
    if !(a > 0.0 && t_final > 0.0) {
        return Err(LabError::InvalidKernelParam("a and T must be positive".into()));
    }
    let (l, h) = (lambda.re, lambda.im);
    let (sb, cb) = (PI * beta).sin_cos();
    let pref = (-2.0 * PI * a).exp_m1() * (2f64.powf(beta)).exp() / PI;
    let integrand = |z: f64| -> Complex64 {
        if z == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let zb = z.powf(beta);
        let log_mag = (1.0 + z) * l * t_final - 2.0 * PI * a * (1.0 + z) - (-(-2.0 * PI * a * (1.0 + z)).exp()).ln_1p()
            - zb * cb;
        let phase = Complex64::from_polar(1.0, -h * t_final);
        phase * (pref * log_mag.exp() * (zb * sb).sin() / (z + 2.0))
    };
    let mag = |z: f64| integrand(z).norm();

    let mut peak: f64 = 0.0;
    let mut z = 1e-3;
    while z < 1e6 {
        peak = peak.max(mag(z));
        z *= 1.05;
    }
    if peak == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut z_max = 1.0;
    let mut z = 1e6;
    while z > 1e-3 {
        if mag(z) > 1e-16 * peak {
            z_max = z * 1.05;
            break;
        }
        z /= 1.05;
    }

    let q = 4.0 / beta;
    let u_max = z_max.powf(1.0 / q);
    let panels = 200;
    let (nodes, weights) = gauss_legendre(20);
    let width = u_max / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        let mut part = Complex64::new(0.0, 0.0);
        for (x, w) in nodes.iter().zip(&weights) {
            let u = mid + 0.5 * width * x;
            let jac = q * u.powf(q - 1.0);
            part += integrand(u.powf(q)) * (w * jac);
        }
        total += part * (0.5 * width);
    }
    Ok(total)
}

/// Smallest `K` for which `max_λ |Σ_{|k|≤K} c_k e^{−i(h + (k/a)l)T} − e^{−λT}| ≤ ε`
/// over a family of scalar generators `λ = l + ih`. Scans `K` upward from 0
/// and returns the first hit, or `None` if `k_limit` is reached first.
pub fn minimal_truncation<F>(coefficient: F, a: f64, family: &[Complex64], t_final: f64, epsilon: f64, k_limit: u64) -> Option<u64>
where
    F: Fn(i64) -> Complex64,
{
    let targets: Vec<Complex64> = family.iter().map(|l| (-l * t_final).exp()).collect();
    let rot: Vec<Complex64> = family.iter().map(|l| Complex64::from_polar(1.0, -l.re * t_final / a)).collect();
    let base: Vec<Complex64> = family.iter().map(|l| Complex64::from_polar(1.0, -l.im * t_final)).collect();
    let mut sums: Vec<Complex64> = vec![coefficient(0); family.len()];
    let mut phase: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); family.len()];
    let err = |sums: &[Complex64]| {
        sums.iter()
            .zip(&base)
            .zip(&targets)
            .map(|((s, b), t)| (s * b - t).norm())
            .fold(0.0, f64::max)
    };
    if err(&sums) <= epsilon {
        return Some(0);
    }
    for k in 1..=k_limit {
        let (cp, cm) = (coefficient(k as i64), coefficient(-(k as i64)));
        for (i, r) in rot.iter().enumerate() {
            if k % 4096 == 0 {
                phase[i] = Complex64::from_polar(1.0, -family[i].re * t_final * k as f64 / a);
            } else {
                phase[i] *= r;
            }
            sums[i] += cp * phase[i] + cm * phase[i].conj();
        }
        if err(&sums) <= epsilon {
            return Some(k);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((m38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_names_parse() {
        for k in KernelKind::ALL {
            assert_eq!(k.short_name().parse::<KernelKind>().unwrap(), k);
        }
        assert!("fancy".parse::<KernelKind>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = select_kernel_parameters(KernelKind::LchsOptimal, 0.5, 1e-3, KernelOptions::default()).unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains(r#""kind":"lchs_optimal""#));
        assert_eq!(serde_json::from_str::<KernelConfig>(&s).unwrap(), cfg);
    }

    #[test]
    fn beta_validated() {
        assert!(improved_series(2.0, 1.0, 10).is_err());
        assert!(improved_series(2.0, 0.0, 10).is_err());
        assert!(select_kernel_parameters(KernelKind::LchsImproved, 0.0, 1e-2, KernelOptions { beta: 1.5, c: 1.0 }).is_err());
    }

    #[test]
    fn source_matches_materialized_series() {
        let cfg = select_kernel_parameters(KernelKind::LchsImproved, 0.0, 1e-2, KernelOptions::default()).unwrap();
        let src = cfg.source().unwrap();
        let s = cfg.series().unwrap();
        assert_eq!(src.len(), s.terms.len());
        assert_eq!(src.main_weight(), s.total_weight);
    }
}
