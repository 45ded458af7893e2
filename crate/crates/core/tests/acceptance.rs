//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use cbmd_lab::catalog::{catalog, find, DEFAULT_SEED};
use cbmd_lab::cbmd::{
    build_series, contour_integrand, product_inequality_check, select_parameters, square_contour_check, verify_identity,
    weight_bound_check, CbmdParams,
};
use cbmd_lab::contour::{rational_catalog, verify_residue_theorem, ContourSpec, PoleSpec};
use cbmd_lab::lchs::{
    improved_remainder_scalar, minimal_truncation, optimal_series, original_series, select_kernel_parameters, KernelKind,
    KernelOptions,
};
use cbmd_lab::lcu::emulate;
use cbmd_lab::matrixcore::{
    evolution_norm_bound, spectral_profile, ComplexMatrix, ComplexVector, GeneratorSpec, PropagatorPlan, QuadratureRule,
};
use cbmd_lab::polydecomp::{apply_decomposition, choose_points, lagrange_weights, Polynomial};
use cbmd_lab::series::{LcuSeries, LcuTerm};
use cbmd_lab::solver::{
    compare, reference_solution, shift_generator, solve, write_csv, ShiftChoice, ShiftPlan, SolveOptions, SolveReport,
};
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lab<T>(r: cbmd_lab::error::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn psd_max_eig(l: &DMatrix<Complex64>) -> f64 {
    l.clone().symmetric_eigen().eigenvalues.max()
}

fn success_consistent(r: &SolveReport, u0: &ComplexVector) -> bool {
    let lcu = r.lcu.as_ref().expect("outcome");
    (lcu.success_prob - lcu.post_state.norm_squared() / u0.norm_squared()).abs() <= 1e-12
}

fn identity_residuals() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst_margin = f64::INFINITY;
    for i in 0..20 {
        let n = 1 + i % 6;
        let norm = r.gen_range(0.2..2.0);
        let (a, h, l) = random_psd_generator(&mut r, n, norm);
        let gen = lab(GeneratorSpec::constant(a, 1.0))?;
        let eps1 = [1e-3, 1e-6][i % 2];
        let p = lab(select_parameters(psd_max_eig(&l), eps1))?;
        let rep = lab(verify_identity(&gen, &p, 1))?;
        let limit = rep.bounds.trunc + 1e-9;
        ensure(rep.residual <= limit, || format!("draw {i}: residual {:e} > {limit:e}", rep.residual))?;
        let series = lab(build_series(&p, true))?;
        let mut acc = constant_propagator(&h, &l, c(1.0, 0.0), 1.0);
        for t in &series.terms {
            acc -= constant_propagator(&h, &l, t.multiplier(), 1.0) * t.coefficient;
        }
        let oracle = spectral_norm(&acc);
        ensure(oracle <= limit, || format!("draw {i}: Taylor-oracle residual {oracle:e} > {limit:e}"))?;
        worst_margin = worst_margin.min(limit / rep.residual.max(oracle).max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 30.0, || format!("runtime {secs:.1} s > 30 s"))?;
    Ok(format!("20 generators, min bound/residual ratio {worst_margin:.2e}, {secs:.2} s"))
}

fn truncated_series_error() -> Outcome {
    let mut cases: Vec<(String, DMatrix<Complex64>, DMatrix<Complex64>)> = vec![("scalar-1".into(), DMatrix::zeros(1, 1), DMatrix::identity(1, 1))];
    for name in ["diag-5-6", "diag-1-2", "damped-oscillator", "random-4", "jordan"] {
        let e = lab(find(name, DEFAULT_SEED))?;
        let gen = if e.needs_shift {
            lab(shift_generator(&e.gen, &lab(ShiftPlan::exact_min(&e.gen))?))?
        } else {
            e.gen.clone()
        };
        let t = gen.t_final();
        let a = gen.samples()[0].inner() * c(t, 0.0);
        let l = (&a + a.adjoint()) * c(0.5, 0.0);
        let h = (&a - a.adjoint()) * c(0.0, -0.5);
        cases.push((name.into(), h, l));
    }
    let mut weights = Vec::new();
    let mut worst: f64 = 0.0;
    for eps1 in [1e-2, 1e-4, 1e-6] {
        for (name, h, l) in &cases {
            let p = lab(select_parameters(psd_max_eig(l).max(0.0), eps1))?;
            let s = lab(build_series(&p, false))?;
            let mut acc = constant_propagator(h, l, c(1.0, 0.0), 1.0);
            for t in &s.terms {
                acc -= constant_propagator(h, l, t.multiplier(), 1.0) * t.coefficient;
            }
            let err = spectral_norm(&acc);
            ensure(err <= eps1, || format!("{name} eps1={eps1:e}: error {err:e}"))?;
            worst = worst.max(err / eps1);
            if name == "scalar-1" {
                let v = scalar_series_value(&s, c(1.0, 0.0), 1.0);
                ensure((v - 0.367879441).norm() <= eps1 + 1e-9, || format!("scalar value {v}"))?;
                let wb = weight_bound_check(&s, &p);
                ensure(wb.holds() && wb.proof_bound <= 130.0, || format!("weight {} bound {}", wb.weight, wb.proof_bound))?;
                weights.push(wb.weight);
            }
        }
    }
    let (lo, hi) = weights.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &w| (a.min(w), b.max(w)));
    ensure(hi / lo < 2.0, || format!("weights vary {lo}..{hi}"))?;
    Ok(format!("max error/eps1 {worst:.3}, weights {lo:.3}..{hi:.3}"))
}

fn scaling_shape() -> Outcome {
    let family: Vec<Complex64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&l| c(l, 0.0)).collect();
    let single = [c(1.0, 0.0)];
    let min_k = |kind: KernelKind, eps: f64, fam: &[Complex64]| -> Result<u64, String> {
        let cfg = lab(select_kernel_parameters(kind, 1.0, eps, KernelOptions::default()))?;
        minimal_truncation(|k| cfg.coefficient(k), cfg.a(), fam, 1.0, eps, 4 * cfg.k_max() + 100)
            .ok_or_else(|| format!("{kind} at {eps:e} never reached tolerance"))
    };
    let (c4, c6) = (min_k(KernelKind::Cbmd, 1e-4, &family)?, min_k(KernelKind::Cbmd, 1e-6, &family)?);
    let (o4, o6) = (min_k(KernelKind::LchsOriginal, 1e-4, &family)?, min_k(KernelKind::LchsOriginal, 1e-6, &family)?);
    let ro = o6 as f64 / o4 as f64;
    let rc = c6 as f64 / c4 as f64;
    let (s_c4, s_o4) = (min_k(KernelKind::Cbmd, 1e-4, &single)?, min_k(KernelKind::LchsOriginal, 1e-4, &single)?);
    let (s_c6, s_o6) = (min_k(KernelKind::Cbmd, 1e-6, &single)?, min_k(KernelKind::LchsOriginal, 1e-6, &single)?);
    let detail = format!(
        "uniform K: cbmd {c4}->{c6} (x{rc:.2}), original {o4}->{o6} (x{ro:.1}); lambda=1 only: cbmd {s_c4}->{s_c6}, original {s_o4}->{s_o6}"
    );
    ensure(ro >= 50.0 && rc <= 4.0 && c4 < o4, || detail.clone())?;
    Ok(detail)
}

fn oracle_original(a: f64, k: i64) -> f64 {
    let x = k as f64 / a;
    (1.0 - (-2.0 * PI * a).exp()) / (a * PI * (1.0 + x * x))
}

fn oracle_improved_full_sum(a: f64, beta: f64, lambda: Complex64) -> Complex64 {
    let coef = |k: i64| {
        let x = k as f64 / a;
        let den = c(0.0, 2.0 * PI * a) * c(x, 1.0) * (-(2f64.powf(beta))).exp() * c(1.0, x).powf(beta).exp();
        c((-2.0 * PI * a).exp() - 1.0, 0.0) / den
    };
    let mut s = coef(0) * (-I * lambda.im).exp();
    let mut k = 1i64;
    while coef(k).norm() >= 1e-22 {
        for kk in [k, -k] {
            s += coef(kk) * (-I * (lambda.im + kk as f64 / a * lambda.re)).exp();
        }
        k += 1;
    }
    s
}

fn kernel_validity() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [KernelKind::LchsOriginal, KernelKind::LchsImproved, KernelKind::LchsOptimal] {
        for eps in [1e-2, 1e-3, 1e-4] {
            for lambda in [c(1.0, 0.0), c(2.0, 1.0), c(0.5, 0.0)] {
                let gen = scalar_gen(lambda);
                let u0 = ComplexVector::from_element(1, c(1.0, 0.0));
                let r = lab(solve(&gen, &u0, &SolveOptions::new(kind, eps)))?;
                let series = lab(r.kernel.series())?;
                let direct = (scalar_series_value(&series, lambda, 1.0) - scalar_target(lambda, 1.0)).norm()
                    / scalar_target(lambda, 1.0).norm();
                ensure(r.rel_error <= eps && direct <= eps && success_consistent(&r, &u0), || {
                    format!("{kind} eps={eps:e} lambda={lambda}: rel {:e}, direct {direct:e}", r.rel_error)
                })?;
                worst = worst.max(r.rel_error / eps);
            }
        }
    }
    let a = 2.5;
    let opt = lab(optimal_series(a, 1e-16, 1e10, 300))?;
    let orig = lab(original_series(a, 300))?;
    let mut degen: f64 = 0.0;
    for (o, p) in opt.terms.iter().zip(&orig.terms) {
        let k = (p.k_re * a).round() as i64;
        ensure((p.coefficient.re - oracle_original(a, k)).abs() <= 1e-15, || format!("original coefficient k={k}"))?;
        degen = degen.max((o.coefficient - p.coefficient).norm() / p.coefficient.norm());
    }
    ensure(degen <= 1e-12, || format!("optimal degeneration {degen:e}"))?;
    let rem = lab(improved_remainder_scalar(3.0, 0.8, c(1.0, 0.0), 1.0))?;
    let lhs = (-1f64).exp() - oracle_improved_full_sum(3.0, 0.8, c(1.0, 0.0));
    let gap = (lhs - rem).norm();
    ensure(gap <= 1e-8, || format!("improved identity gap {gap:e}"))?;
    Ok(format!("max rel_error/eps {worst:.3}, degeneration {degen:.1e}, improved identity gap {gap:.1e} (remainder {:.3e})", rem.norm()))
}

fn eigenvalue_shifting() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut alpha_gap: f64 = 0.0;
    for e in lab(catalog(DEFAULT_SEED))? {
        let plan = lab(ShiftPlan::exact_min(&e.gen))?;
        let shifted = lab(shift_generator(&e.gen, &plan))?;
        let a = lab(reference_solution(&e.gen, &e.u0, 1))?;
        let b = lab(reference_solution(&shifted, &e.u0, 1))? * c(plan.rescale(), 0.0);
        worst = worst.max((a - b).norm() / e.u0.norm());
        let pa = lab(spectral_profile(&e.gen, QuadratureRule::Trapezoid))?;
        let pb = lab(spectral_profile(&shifted, QuadratureRule::Trapezoid))?;
        alpha_gap = alpha_gap.max((pa.alpha_d - pb.alpha_d).abs());
    }
    ensure(worst <= 1e-10, || format!("shift identity {worst:e}"))?;
    ensure(alpha_gap <= 1e-12, || format!("alpha_d changed by {alpha_gap:e}"))?;
    let p = lab(find("diag-5-6", DEFAULT_SEED))?;
    let plain = lab(solve(&p.gen, &p.u0, &SolveOptions::new(KernelKind::Cbmd, 1e-3)))?;
    let shifted = lab(solve(&p.gen, &p.u0, &SolveOptions::new(KernelKind::Cbmd, 1e-3).with_shift(ShiftChoice::ExactMin)))?;
    let detail = format!(
        "identity {worst:.1e}, alpha_d gap {alpha_gap:.1e}, terms {} vs {}, overhead {:.3} vs {:.3}",
        shifted.term_count, plain.term_count, shifted.rounds_overhead, plain.rounds_overhead
    );
    ensure(
        shifted.term_count < plain.term_count
            && shifted.rounds_overhead <= plain.rounds_overhead
            && success_consistent(&plain, &p.u0)
            && success_consistent(&shifted, &p.u0),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn residue_theorem() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in rational_catalog() {
        let r = lab(case.check())?;
        ensure(r <= 1e-8, || format!("{}: {r:e}", case.name))?;
        worst = worst.max(r);
    }
    let p = lab(CbmdParams::new(2, 1.0, 4, 0.5))?;
    let gen = scalar_gen(c(0.5, 0.3));
    let closed = lab(square_contour_check(&gen, &p, 8, 16))?.residual;
    let plan = lab(PropagatorPlan::new(&gen, 1))?;
    let r = 8.5;
    let contour = ContourSpec::rectangle(c(-r, -r), c(r, r), 16);
    let mut poles: Vec<PoleSpec> = (-8..=8).map(|k| PoleSpec::simple(c(k as f64, 0.0))).collect();
    poles.push(PoleSpec::simple(c(0.0, -1.0)));
    poles.extend(cbmd_pole_set(2).into_iter().map(PoleSpec::simple));
    let numeric = lab(verify_residue_theorem(|z| contour_integrand(&plan, &p, z), &contour, &poles))?.residual;
    ensure(closed <= 1e-6 && numeric <= 1e-6, || format!("square N=8: closed {closed:e}, numeric {numeric:e}"))?;
    Ok(format!("rational catalog max {worst:.1e}, square N=8 {:.1e}", closed.max(numeric)))
}

fn power_sum(p: &Polynomial, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = x.nrows();
    let mut pow = DMatrix::<Complex64>::identity(n, n);
    let mut sum = DMatrix::<Complex64>::zeros(n, n);
    for a in p.coeffs() {
        sum += &pow * *a;
        pow = &pow * x;
    }
    sum
}

fn polynomial_decomposition() -> Outcome {
    let mut r = rng(707);
    let (mut worst, mut weakest_control, mut worst_sum) = (0.0f64, f64::INFINITY, 0.0f64);
    for d in 0..=12usize {
        for n in [2usize, 5, 8] {
            let h = ComplexMatrix::new(with_norm(random_hermitian(&mut r, n), 1.0)).map_err(|e| e.to_string())?;
            let l = ComplexMatrix::new(with_norm(random_hermitian(&mut r, n), 1.0)).map_err(|e| e.to_string())?;
            let p = lab(Polynomial::new((0..=d).map(|_| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()))?;
            let exact = power_sum(&p, &(h.inner() * I + l.inner()));
            let scale = spectral_norm(&exact);
            let spread = lab(l.spectral_norm())?.max(1.0);
            let decomp = lab(lagrange_weights(&choose_points(d, spread)))?;
            let sum: Complex64 = decomp.weights.iter().sum();
            worst_sum = worst_sum.max((sum - 1.0).norm());
            let out = lab(apply_decomposition(&h, &l, &p, &decomp))?;
            let res = spectral_norm(&(out.inner() - &exact)) / scale;
            ensure(res <= 1e-9, || format!("D={d} dim={n}: residual {res:e}"))?;
            worst = worst.max(res);
            if d >= 1 {
                let under = lab(lagrange_weights(&choose_points(d - 1, spread)))?;
                let out = lab(apply_decomposition(&h, &l, &p, &under))?;
                let res = spectral_norm(&(out.inner() - &exact)) / scale;
                ensure(res > 1e-3, || format!("D={d} dim={n}: control residual {res:e}"))?;
                weakest_control = weakest_control.min(res);
            }
        }
    }
    ensure(worst_sum <= 1e-10, || format!("weight sum off by {worst_sum:e}"))?;
    Ok(format!("max residual {worst:.1e}, min control residual {weakest_control:.1e}, weight-sum error {worst_sum:.1e}"))
}

fn lcu_emulator() -> Outcome {
    let mut r = rng(808);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let norm = r.gen_range(0.5..2.0);
        let (a, h, l) = random_psd_generator(&mut r, 2, norm);
        let gen = lab(GeneratorSpec::constant(a, 1.0))?;
        let terms = (0..4)
            .map(|_| LcuTerm::main(c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)), r.gen_range(-3.0..3.0)))
            .collect();
        let s = lab(LcuSeries::new(terms))?;
        let unitaries: Vec<_> = s.terms.iter().map(|t| constant_propagator(&h, &l, t.multiplier(), 1.0)).collect();
        let u0 = ComplexVector::from_fn(2, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
        let brute = brute_force_lcu(&s, &unitaries, &u0);
        let out = lab(emulate(&s, &gen, &u0, 1))?;
        let gap = (&out.post_state - &brute).norm();
        ensure(gap <= 1e-12, || format!("post_state gap {gap:e}"))?;
        worst = worst.max(gap);
    }
    let mut solves = 0;
    for e in lab(catalog(DEFAULT_SEED))? {
        let shift = if e.needs_shift { ShiftChoice::ExactMin } else { ShiftChoice::None };
        for kind in KernelKind::ALL {
            let rep = lab(solve(&e.gen, &e.u0, &SolveOptions::new(kind, 1e-2).with_shift(shift.clone())))?;
            ensure(success_consistent(&rep, &e.u0), || format!("{} {kind}: success_prob inconsistent", e.name))?;
            ensure(rep.lcu.as_ref().unwrap().post_state.iter().all(|z| z.re.is_finite()), || "non-finite state".into())?;
            solves += 1;
        }
    }
    Ok(format!("brute-force gap {worst:.1e}, success_prob consistent on {solves} solves"))
}

fn inequalities_and_norms() -> Outcome {
    let mut checked = 0;
    for m in 1..=30usize {
        for j in 0..=200 {
            let cc = 5.0 * j as f64 / 200.0;
            let q = product_inequality_check(m, cc);
            let plus: f64 = (1..=m).map(|r| ((r * r) as f64 + cc * cc) / (r * r) as f64).product();
            let upper = if cc == 0.0 { 1.0 } else { (PI * cc).sinh() / (PI * cc) };
            ensure(plus >= 1.0 && plus <= upper * (1.0 + 1e-14) && q.lower_ok(), || format!("plus m={m} c={cc}"))?;
            if cc <= 1.0 {
                let minus: f64 = (1..=m).map(|r| ((r * r) as f64 - cc * cc) / (r * r) as f64).product();
                let lower = if cc == 0.0 { 1.0 } else { (PI * cc).sin() / (PI * cc) };
                ensure(minus <= 1.0 && minus >= lower - 1e-15 && q.upper_ok(), || format!("minus m={m} c={cc}"))?;
            }
            checked += 1;
        }
    }
    let mut r = rng(909);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = 1 + i % 5;
        let h = random_hermitian(&mut r, n);
        let l = random_hermitian(&mut r, n) * c(r.gen_range(0.1..1.5), 0.0);
        let z = c(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let t = r.gen_range(0.2..1.5);
        let gen = lab(GeneratorSpec::constant(ComplexMatrix::new(&l + &h * I).map_err(|e| e.to_string())?, t))?;
        let profile = lab(spectral_profile(&gen, QuadratureRule::Trapezoid))?;
        let u = spectral_norm(&constant_propagator(&h, &l, z, t));
        let bound = evolution_norm_bound(-z, &profile);
        ensure(u <= bound * (1.0 + 1e-10), || format!("draw {i}: {u} > {bound}"))?;
        worst = worst.max(u / bound);
    }
    Ok(format!("{checked} (m, c) pairs, max norm/bound {worst:.6}"))
}

fn determinism() -> Outcome {
    let problems: Vec<_> = ["random-4", "damped-oscillator", "scalar-complex"]
        .iter()
        .map(|n| find(n, 2024).map(|e| e.problem()))
        .collect::<cbmd_lab::error::Result<_>>()
        .map_err(|e| e.to_string())?;
    let run = || -> Result<Vec<u8>, String> {
        let rows = compare(&problems, &[1e-2, 1e-3], &KernelKind::ALL, &[false, true], KernelOptions::default());
        let mut buf = Vec::new();
        lab(write_csv(&rows, &mut buf))?;
        Ok(buf)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "library compare output differs between runs".into())?;
    let args = ["--seed", "2024", "compare", "--problems", "random-4,time-dep-rotating", "--eps-grid", "1e-2", "--shift", "both"];
    let exe = env!("CARGO_BIN_EXE_cbmd-lab");
    let first = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
    let second = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
    let single = Command::new(exe).args(args).env("CBMD_LAB_THREADS", "1").output().map_err(|e| e.to_string())?;
    ensure(first.status.success(), || String::from_utf8_lossy(&first.stderr).into_owned())?;
    ensure(first.stdout == second.stdout && first.stdout == single.stdout, || "CLI CSV differs between runs".into())?;
    Ok(format!("{} library bytes and {} CLI bytes identical across runs and thread counts", a.len(), first.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("identity residual on random dissipative generators", identity_residuals),
        ("truncated lattice series error and weight", truncated_series_error),
        ("truncation scaling versus the original kernel", scaling_shape),
        ("alternative kernels on scalar problems", kernel_validity),
        ("eigenvalue shifting", eigenvalue_shifting),
        ("residue theorem quadrature", residue_theorem),
        ("polynomial decomposition exactness", polynomial_decomposition),
        ("linear-combination circuit emulation", lcu_emulator),
        ("product inequalities and propagator norm bound", inequalities_and_norms),
        ("deterministic comparison output", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|d| if secs <= 60.0 { Ok(d) } else { Err(format!("{d}; runtime {secs:.1} s > 60 s")) });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
