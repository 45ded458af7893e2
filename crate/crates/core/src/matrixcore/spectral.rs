use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GeneratorKind, GeneratorSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
    Midpoint,
}

impl std::str::FromStr for QuadratureRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "trapezoid" => Ok(Self::Trapezoid),
            "midpoint" => Ok(Self::Midpoint),
            other => Err(format!("unknown quadrature rule '{other}'")),
        }
    }
}

/// Extreme eigenvalues of `L(t)` on the grid and their time integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub times: Vec<f64>,
    pub alpha_a: f64,
    pub alpha_min_t: Vec<f64>,
    pub alpha_max_t: Vec<f64>,
    pub eta_min: f64,
    pub eta_max: f64,
    pub alpha_d: f64,
    pub rho_l: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

pub fn spectral_profile(gen: &GeneratorSpec, rule: QuadratureRule) -> Result<SpectralProfile> {
    let times = gen.times().to_vec();
    let mut alpha_min_t = Vec::with_capacity(times.len());
    let mut alpha_max_t = Vec::with_capacity(times.len());
    let mut alpha_a: f64 = 0.0;
    for (sample, split) in gen.samples().iter().zip(gen.splits()) {
        let (lo, hi) = split.l.hermitian_extremes()?;
        alpha_min_t.push(lo);
        alpha_max_t.push(hi);
        alpha_a = alpha_a.max(sample.spectral_norm()?);
    }

    let (eta_min, eta_max, rho_l) = if gen.kind() == GeneratorKind::Constant {
        let t = gen.t_final();
        (alpha_min_t[0] * t, alpha_max_t[0] * t, (alpha_max_t[0] - alpha_min_t[0]) * t)
    } else {
        match rule {
            QuadratureRule::Trapezoid => {
                let trap = |v: &[f64]| -> f64 {
                    times
                        .windows(2)
                        .zip(v.windows(2))
                        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
                        .sum()
                };
                let range: Vec<f64> = alpha_max_t.iter().zip(&alpha_min_t).map(|(h, l)| h - l).collect();
                (trap(&alpha_min_t), trap(&alpha_max_t), trap(&range))
            }
            QuadratureRule::Midpoint => {
                let (mut lo_sum, mut hi_sum, mut range_sum) = (0.0, 0.0, 0.0);
                for w in times.windows(2) {
                    let dt = w[1] - w[0];
                    let (lo, hi) = gen.split_at(0.5 * (w[0] + w[1])).l.hermitian_extremes()?;
                    lo_sum += dt * lo;
                    hi_sum += dt * hi;
                    range_sum += dt * (hi - lo);
                }
                (lo_sum, hi_sum, range_sum)
            }
        }
    };
    let alpha_d = alpha_max_t
        .iter()
        .zip(&alpha_min_t)
        .map(|(h, l)| h - l)
        .fold(0.0, f64::max);
    Ok(SpectralProfile {
        times,
        alpha_a,
        alpha_min_t,
        alpha_max_t,
        eta_min,
        eta_max,
        alpha_d,
        rho_l,
        gamma_min: eta_min.exp(),
        gamma_max: eta_max.exp(),
    })
}

/// Bound on `‖T exp(∫(iH(s) + zL(s)) ds)‖`: `exp(Re z · η_max)` for `Re z ≥ 0`,
/// `exp(Re z · η_min)` otherwise.
///
/// The propagator `U(w)` of [`super::time_ordered_exp`] has the form
/// `T exp(∫(−iH − wL))`, so it is bounded by `evolution_norm_bound(−w, profile)`.
pub fn evolution_norm_bound(z: Complex64, profile: &SpectralProfile) -> f64 {
    if z.re >= 0.0 {
        (z.re * profile.eta_max).exp()
    } else {
        (z.re * profile.eta_min).exp()
    }
}
