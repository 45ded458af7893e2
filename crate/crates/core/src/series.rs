//! Linear-combination series `Σ c_j U_j` where `U_j = T exp(−i∫(H + k'_j L))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrixcore::I;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermKind {
    #[serde(rename = "main")]
    Main,
    #[serde(rename = "aux_line")]
    AuxLine,
    #[serde(rename = "aux_2i")]
    Aux2i,
}

/// One term `c·T exp(−i∫(H + k'L))`. Main terms have real `k'`; auxiliary
/// terms carry a complex `k'` and are used only for identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcuTerm {
    #[serde(rename = "c")]
    pub coefficient: Complex64,
    #[serde(rename = "k")]
    pub k_re: f64,
    #[serde(rename = "k_im", default, skip_serializing_if = "is_zero")]
    pub k_im: f64,
    pub kind: TermKind,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl LcuTerm {
    pub fn main(coefficient: Complex64, k: f64) -> Self {
        Self {
            coefficient,
            k_re: k,
            k_im: 0.0,
            kind: TermKind::Main,
        }
    }

    pub fn aux(coefficient: Complex64, k: Complex64, kind: TermKind) -> Self {
        Self {
            coefficient,
            k_re: k.re,
            k_im: k.im,
            kind,
        }
    }

    pub fn k_param(&self) -> Complex64 {
        Complex64::new(self.k_re, self.k_im)
    }

    /// Multiplier `z = i·k'` of `L` in the propagator `T exp(∫(−iH − zL))`.
    pub fn multiplier(&self) -> Complex64 {
        I * self.k_param()
    }
}

/// Random access to the terms of a series, possibly generated on demand.
pub trait TermSource: Sync {
    fn len(&self) -> usize;
    fn term(&self, j: usize) -> LcuTerm;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ|c_j|` over main terms, summed pairwise in index order.
    fn main_weight(&self) -> f64 {
        const CHUNK: usize = 4096;
        let n = self.len();
        let parts = par::map_indexed(n.div_ceil(CHUNK), |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let v: Vec<f64> = (lo..hi)
                .map(|j| self.term(j))
                .filter(|t| t.kind == TermKind::Main)
                .map(|t| t.coefficient.norm())
                .collect();
            par::pairwise_sum_f64(&v)
        });
        par::pairwise_sum_f64(&parts)
    }

    fn max_abs_main_k(&self) -> f64 {
        (0..self.len())
            .map(|j| self.term(j))
            .filter(|t| t.kind == TermKind::Main)
            .map(|t| t.k_re.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcuSeries {
    pub terms: Vec<LcuTerm>,
    pub total_weight: f64,
    pub max_abs_k: f64,
}

impl LcuSeries {
    pub fn new(terms: Vec<LcuTerm>) -> Result<Self> {
        if let Some(i) = terms
            .iter()
            .position(|t| !(t.coefficient.re.is_finite() && t.coefficient.im.is_finite() && t.k_re.is_finite() && t.k_im.is_finite()))
        {
            return Err(LabError::InvalidSeries(format!("terms[{i}] is not finite")));
        }
        if let Some(i) = terms.iter().position(|t| t.kind == TermKind::Main && t.k_im != 0.0) {
            return Err(LabError::InvalidSeries(format!("terms[{i}]: main term with complex k")));
        }
        let mut s = Self {
            terms,
            total_weight: 0.0,
            max_abs_k: 0.0,
        };
        s.total_weight = s.main_weight();
        s.max_abs_k = s.max_abs_main_k();
        Ok(s)
    }

    pub fn from_source<S: TermSource + ?Sized>(source: &S) -> Result<Self> {
        Self::new(par::map_indexed(source.len(), |j| source.term(j)))
    }

    pub fn main_only(&self) -> Self {
        Self {
            terms: self.terms.iter().copied().filter(|t| t.kind == TermKind::Main).collect(),
            total_weight: self.total_weight,
            max_abs_k: self.max_abs_k,
        }
    }

    pub fn count(&self, kind: TermKind) -> usize {
        self.terms.iter().filter(|t| t.kind == kind).count()
    }

    /// Concatenation of two series.
    pub fn union(&self, other: &LcuSeries) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::new(terms)
    }
}

impl TermSource for LcuSeries {
    fn len(&self) -> usize {
        self.terms.len()
    }
    fn term(&self, j: usize) -> LcuTerm {
        self.terms[j]
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LcuSeriesJson {
    terms: Vec<LcuTerm>,
    total_weight: f64,
    #[serde(default)]
    max_abs_k: Option<f64>,
}

impl<'de> Deserialize<'de> for LcuSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = LcuSeriesJson::deserialize(d)?;
        let s = LcuSeries::new(raw.terms).map_err(|e| D::Error::custom(e.to_string()))?;
        if (s.total_weight - raw.total_weight).abs() > 1e-12 * s.total_weight.max(1e-300) {
            return Err(D::Error::custom(format!(
                "total_weight: {} does not match the terms ({})",
                raw.total_weight, s.total_weight
            )));
        }
        if let Some(k) = raw.max_abs_k {
            if (s.max_abs_k - k).abs() > 1e-12 * s.max_abs_k.max(1.0) {
                return Err(D::Error::custom(format!("max_abs_k: {k} does not match the terms ({})", s.max_abs_k)));
            }
        }
        Ok(s)
    }
}
