//! State-vector emulation of prepare-select-unprepare with post-selection.

use std::f64::consts::PI;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrixcore::{vector_json, ComplexVector, GeneratorSpec, PropagatorPlan};
use crate::par;
use crate::series::{TermKind, TermSource};

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcuOutcome {
    #[serde(with = "vector_json")]
    pub post_state: ComplexVector,
    pub success_prob: f64,
    pub amplification_rounds: u64,
    #[serde(with = "vector_json")]
    pub normalized_state: ComplexVector,
    pub total_weight: f64,
}

#[derive(Clone)]
struct Partial {
    state: ComplexVector,
    weight: f64,
}

impl Add for &Partial {
    type Output = Partial;
    fn add(self, rhs: &Partial) -> Partial {
        Partial {
            state: &self.state + &rhs.state,
            weight: self.weight + rhs.weight,
        }
    }
}

/// `Σ_j c_j U_j u0` and `Σ_j |c_j|` in one deterministic pass over the terms.
fn weighted_sum<S: TermSource + ?Sized>(source: &S, plan: &PropagatorPlan, u0: &ComplexVector) -> Result<Partial> {
    let total = par::chunked_sum(source.len(), CHUNK, |range| {
        let mut acc = par::Cascade::new();
        for j in range {
            let t = source.term(j);
            if t.kind != TermKind::Main {
                return Err(LabError::NonUnitarySelectTerm { index: j });
            }
            let v = plan.apply(t.multiplier(), u0)?;
            acc.push(Partial {
                state: v * t.coefficient,
                weight: t.coefficient.norm(),
            });
        }
        Ok(acc.finish())
    })?;
    total.ok_or_else(|| LabError::InvalidSeries("series has no terms".into()))
}

/// Rounds `⌈π/(4·arcsin √p)⌉` of amplitude amplification at success probability `p`.
pub fn amplification_rounds(success_prob: f64) -> u64 {
    if success_prob <= 0.0 {
        return u64::MAX;
    }
    (PI / (4.0 * success_prob.min(1.0).sqrt().asin())).ceil() as u64
}

/// Emulates the circuit on a prepared propagator plan.
pub fn emulate_with_plan<S: TermSource + ?Sized>(source: &S, plan: &PropagatorPlan, u0: &ComplexVector) -> Result<LcuOutcome> {
    let u0_norm = u0.norm();
    if u0_norm == 0.0 || !u0_norm.is_finite() {
        return Err(LabError::InvalidState("initial state must be nonzero and finite".into()));
    }
    if u0.len() != plan.dim() {
        return Err(LabError::InvalidState(format!(
            "state has length {}, generator has dimension {}",
            u0.len(),
            plan.dim()
        )));
    }
    let Partial { state, weight } = weighted_sum(source, plan, u0)?;
    if weight == 0.0 {
        return Err(LabError::InvalidSeries("series has zero total weight".into()));
    }
    let post_state = state / Complex64::new(weight, 0.0);
    let post_norm = post_state.norm();
    let success_prob = (post_norm / u0_norm).powi(2);
    let normalized_state = if post_norm > 0.0 {
        &post_state / Complex64::new(post_norm, 0.0)
    } else {
        post_state.clone()
    };
    Ok(LcuOutcome {
        amplification_rounds: amplification_rounds(success_prob),
        post_state,
        success_prob,
        normalized_state,
        total_weight: weight,
    })
}

/// `(1/Σ|c_j|)·Σ_j c_j·U_j·u0` with `U_j = T exp(−i∫(H + k'_j L))` and the
/// post-selection statistics of the ancilla register.
pub fn emulate<S: TermSource + ?Sized>(source: &S, gen: &GeneratorSpec, u0: &ComplexVector, steps: usize) -> Result<LcuOutcome> {
    emulate_with_plan(source, &PropagatorPlan::new(gen, steps)?, u0)
}

/// Preparation columns: right `√c_j/√W`, left `conj(√c_j)/√W`, `W = Σ|c_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepPair {
    pub left_column: ComplexVector,
    pub right_column: ComplexVector,
}

pub fn build_prep_pair<S: TermSource + ?Sized>(source: &S) -> Result<PrepPair> {
    let n = source.len();
    let weight = source.main_weight();
    if !(weight > 0.0) {
        return Err(LabError::InvalidSeries("series has zero total weight".into()));
    }
    let scale = Complex64::new(weight.sqrt().recip(), 0.0);
    let roots = ComplexVector::from_iterator(n, (0..n).map(|j| source.term(j).coefficient.sqrt() * scale));
    Ok(PrepPair {
        left_column: roots.map(|z| z.conj()),
        right_column: roots,
    })
}

/// `Σ|c_j|·‖u0‖/‖û(T)‖`.
pub fn rounds_overhead(u0_norm: f64, ut_norm: f64, total_weight: f64) -> f64 {
    total_weight * u0_norm / ut_norm
}
