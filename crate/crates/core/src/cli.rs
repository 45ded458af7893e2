//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, random_hermitian_pair, random_psd_problem, seeded_rng, DEFAULT_SEED};
use crate::cbmd::{
    build_series, check_psd, product_inequality_check, select_parameters, square_contour_check, verify_identity,
    weight_bound_check, CbmdParams,
};
use crate::contour::rational_catalog;
use crate::error::LabError;
use crate::lchs::{select_kernel_parameters, KernelKind, KernelOptions};
use crate::matrixcore::{
    evolution_norm_bound, spectral_profile, time_ordered_exp, vector_json, ComplexVector, GeneratorSpec, QuadratureRule,
};
use crate::polydecomp::{apply_decomposition, choose_points, default_spread, direct_evaluation, lagrange_weights, Polynomial};
use crate::solver::{compare, solve, write_csv, CompareProblem, KernelChoice, ShiftChoice, SolveOptions};

const THREADS_ENV: &str = "CBMD_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cbmd-lab", version, about = "Contour-based decompositions of non-unitary propagators")]
struct Cli {
    /// Seed for random catalog entries and suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and print the report as JSON.
    Solve(SolveArgs),
    /// Print the series of a kernel as JSON.
    Decompose(DecomposeArgs),
    /// Sweep kernels and tolerances and write CSV.
    Compare(CompareArgs),
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        suite: VerifySuite,
    },
    /// Inspect the built-in problems.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, default_value = "cbmd", value_parser = parse_kernel)]
    kernel: KernelKind,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
}

impl KernelArgs {
    fn options(&self) -> KernelOptions {
        KernelOptions { beta: self.beta, c: self.c }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Problem JSON file or catalog name.
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    eps: f64,
    /// `none`, `exact-min`, or a JSON file `{"alpha_shift_t": [...]}`.
    #[arg(long, default_value = "none")]
    shift: String,
    /// Include the emulated circuit outcome in the report.
    #[arg(long)]
    emit_lcu: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    eta_max: f64,
    /// Append the auxiliary terms (cbmd only).
    #[arg(long)]
    aux: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShiftSweep {
    Off,
    On,
    Both,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// `catalog`, comma-separated catalog names, or a JSON file of problems.
    #[arg(long, default_value = "catalog")]
    problems: String,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    eps_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_kernel, default_value = "cbmd,original,improved,optimal")]
    kernels: Vec<KernelKind>,
    #[arg(long, value_enum, default_value_t = ShiftSweep::Off)]
    shift: ShiftSweep,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum VerifySuite {
    /// Full identity residual on random dissipative generators.
    Identity {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Contour quadrature against residue sums.
    Residue {
        #[arg(long, default_value_t = 8)]
        n: u64,
        #[arg(long, default_value_t = 16)]
        density: usize,
    },
    /// Exactness of the polynomial decomposition.
    Poly {
        #[arg(long)]
        degree: usize,
        /// `auto` or a comma-separated list of real points.
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        points: String,
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Product inequalities, weight bounds and propagator norm bounds.
    Bounds {
        #[arg(long, default_value_t = 30)]
        m_max: usize,
        #[arg(long, default_value_t = 100)]
        draws: usize,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogAction {
    List,
    Show { name: String },
}

#[derive(Debug)]
enum CliError {
    Malformed(String),
    Failed(String),
    Lab(LabError),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    s.parse::<KernelKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(default)]
    name: Option<String>,
    gen: GeneratorSpec,
    #[serde(with = "vector_json")]
    u0: ComplexVector,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftFile {
    alpha_shift_t: Vec<f64>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path_str = e.path().to_string();
        let inner = e.into_inner();
        let line = inner.to_string().replace('\n', " ");
        if path_str == "." {
            CliError::Malformed(line)
        } else {
            CliError::Malformed(format!("{path_str}: {line}"))
        }
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Failed(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Failed(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_problem(spec: &str, seed: u64) -> CliResult<CompareProblem> {
    let path = Path::new(spec);
    if path.exists() {
        let f: ProblemFile = read_json(path)?;
        if f.u0.len() != f.gen.dim() {
            return Err(CliError::Malformed(format!(
                "u0: length {} does not match generator dimension {}",
                f.u0.len(),
                f.gen.dim()
            )));
        }
        Ok(CompareProblem {
            name: f.name.unwrap_or_else(|| path.file_stem().map_or("problem".into(), |s| s.to_string_lossy().into_owned())),
            gen: f.gen,
            u0: f.u0,
        })
    } else {
        Ok(catalog::find(spec, seed)?.problem())
    }
}

fn load_problems(spec: &str, seed: u64) -> CliResult<Vec<CompareProblem>> {
    if spec == "catalog" {
        return Ok(catalog::catalog(seed)?.iter().map(|e| e.problem()).collect());
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
        if text.trim_start().starts_with('[') {
            let files: Vec<ProblemFile> = read_json(path)?;
            return Ok(files
                .into_iter()
                .enumerate()
                .map(|(i, f)| CompareProblem {
                    name: f.name.unwrap_or_else(|| format!("problem-{i}")),
                    gen: f.gen,
                    u0: f.u0,
                })
                .collect());
        }
        return Ok(vec![load_problem(spec, seed)?]);
    }
    spec.split(',').map(|name| load_problem(name.trim(), seed)).collect()
}

fn run_solve(args: &SolveArgs, seed: u64) -> CliResult {
    let problem = load_problem(&args.problem, seed)?;
    let shift = match args.shift.as_str() {
        "none" => ShiftChoice::None,
        "exact-min" | "exact_min" => ShiftChoice::ExactMin,
        file => ShiftChoice::UserBound(read_json::<ShiftFile>(Path::new(file))?.alpha_shift_t),
    };
    let options = SolveOptions {
        kernel: KernelChoice::Auto(args.kernel.kernel),
        kernel_options: args.kernel.options(),
        epsilon: args.eps,
        shift,
    };
    let (mut report, failure) = match solve(&problem.gen, &problem.u0, &options) {
        Ok(r) => (r, None),
        Err(LabError::ToleranceNotMet(r)) => {
            let msg = format!("rel_error {:e} exceeds eps {:e}", r.rel_error, r.epsilon);
            (*r, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    if !args.emit_lcu {
        report.lcu = None;
    }
    emit(&args.out, &to_json(&report))?;
    match failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn run_decompose(args: &DecomposeArgs) -> CliResult {
    let cfg = select_kernel_parameters(args.kernel.kernel, args.eta_max, args.eps, args.kernel.options())?;
    let series = match cfg.cbmd_params() {
        Some(p) => build_series(&p, args.aux)?,
        None => cfg.series()?,
    };
    #[derive(Serialize)]
    struct Decomposition<'a> {
        kernel: crate::lchs::KernelConfig,
        #[serde(flatten)]
        series: &'a crate::series::LcuSeries,
    }
    emit(&args.out, &to_json(&Decomposition { kernel: cfg, series: &series }))
}

fn run_compare(args: &CompareArgs, seed: u64) -> CliResult {
    let problems = load_problems(&args.problems, seed)?;
    let shifts: &[bool] = match args.shift {
        ShiftSweep::Off => &[false],
        ShiftSweep::On => &[true],
        ShiftSweep::Both => &[false, true],
    };
    let rows = compare(&problems, &args.eps_grid, &args.kernels, shifts, KernelOptions { beta: args.beta, c: args.c });
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    emit(&args.out, &String::from_utf8(buf).expect("utf-8 csv"))?;
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}:{} eps={:e}: {e}", r.problem, r.kernel, r.eps)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        for f in &failed {
            eprintln!("{f}");
        }
        Err(CliError::Failed(format!("{} of {} rows failed", failed.len(), rows.len())))
    }
}

fn report_line(name: &str, value: f64, limit: f64, ok: bool) -> bool {
    println!("{} {name}: {value:.6e} (limit {limit:.3e})", if ok { "PASS" } else { "FAIL" });
    ok
}

fn run_verify(suite: &VerifySuite, seed: u64) -> CliResult {
    let mut ok = true;
    match *suite {
        VerifySuite::Identity { count, max_dim, eps } => {
            for i in 0..count {
                let n = 1 + i % max_dim.max(1);
                let (gen, _) = random_psd_problem(&mut seeded_rng(seed, i as u64), n, 2.0)?;
                let eta = check_psd(&gen)?;
                let params = select_parameters(eta, eps)?;
                let rep = verify_identity(&gen, &params, 1)?;
                let limit = rep.bounds.trunc + 1e-9;
                ok &= report_line(&format!("identity #{i} dim {n}"), rep.residual, limit, rep.residual <= limit);
            }
        }
        VerifySuite::Residue { n, density } => {
            for case in rational_catalog() {
                let r = case.check()?;
                ok &= report_line(&format!("residue {}", case.name), r, 1e-8, r <= 1e-8);
            }
            let params = CbmdParams::new(2, 1.0, 4, 0.5)?;
            let gen = GeneratorSpec::scalar(Complex64::new(0.5, 0.3), 1.0)?;
            let r = square_contour_check(&gen, &params, n, density)?.residual;
            ok &= report_line(&format!("identity integrand square N={n}"), r, 1e-6, r <= 1e-6);
        }
        VerifySuite::Poly {
            degree,
            ref points,
            dim,
            count,
        } => {
            let mut coeff_rng = seeded_rng(seed, 1_000);
            let p = Polynomial::new(
                (0..=degree)
                    .map(|_| {
                        use rand::Rng;
                        Complex64::new(coeff_rng.gen_range(-1.0..1.0), coeff_rng.gen_range(-1.0..1.0))
                    })
                    .collect(),
            )?;
            for i in 0..count {
                let (h, l) = random_hermitian_pair(&mut seeded_rng(seed, i as u64), dim)?;
                let pts = if points == "auto" {
                    choose_points(degree, default_spread(&l)?)
                } else {
                    points
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Malformed(format!("points: {e}"))))
                        .collect::<CliResult<Vec<f64>>>()?
                };
                let decomp = lagrange_weights(&pts)?;
                let approx = apply_decomposition(&h, &l, &p, &decomp)?;
                let exact = direct_evaluation(&h, &l, &p)?;
                let diff = crate::matrixcore::ComplexMatrix::new(approx.inner() - exact.inner())?.spectral_norm()?;
                let res = diff / exact.spectral_norm()?.max(f64::MIN_POSITIVE);
                let name = format!("poly D={degree} m={} draw {i}", pts.len());
                ok &= if pts.len() > degree {
                    report_line(&name, res, 1e-9, res <= 1e-9)
                } else {
                    report_line(&format!("{name} (under-determined, expects failure)"), res, 1e-3, res > 1e-3)
                };
            }
        }
        VerifySuite::Bounds { m_max, draws } => {
            let mut worst_fail = 0usize;
            for m in 1..=m_max {
                for j in 0..=100 {
                    let c = 5.0 * j as f64 / 100.0;
                    let q = product_inequality_check(m, c);
                    if !(q.lower_ok() && q.upper_ok()) {
                        worst_fail += 1;
                    }
                }
            }
            ok &= report_line("product inequalities violations", worst_fail as f64, 0.0, worst_fail == 0);
            for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
                let params = select_parameters(0.0, eps)?;
                let wb = weight_bound_check(&build_series(&params, false)?, &params);
                ok &= report_line(&format!("weight eps={eps:e}"), wb.weight, wb.proof_bound, wb.holds());
            }
            let mut worst = 0.0f64;
            for i in 0..draws {
                let mut rng = seeded_rng(seed, 5_000 + i as u64);
                let (gen, _) = random_psd_problem(&mut rng, 1 + i % 4, 2.0)?;
                let z = {
                    use rand::Rng;
                    Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0))
                };
                let profile = spectral_profile(&gen, QuadratureRule::Trapezoid)?;
                let u = time_ordered_exp(&gen, z, 1)?.spectral_norm()?;
                worst = worst.max(u / evolution_norm_bound(-z, &profile));
            }
            ok &= report_line("propagator norm / bound", worst, 1.0 + 1e-10, worst <= 1.0 + 1e-10);
        }
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("verification failed".into()))
    }
}

fn run_catalog(action: &CatalogAction, seed: u64) -> CliResult {
    match action {
        CatalogAction::List => {
            for e in catalog::catalog(seed)? {
                println!("{}\t{}\t{}", e.name, e.tags.join(","), e.description);
            }
            Ok(())
        }
        CatalogAction::Show { name } => emit(&None, &to_json(&catalog::find(name, seed)?)),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {
    let _ = THREADS_ENV;
}

/// Parses `args`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on a failed assertion or solve, 2 on malformed input.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a, cli.seed),
        Command::Decompose(a) => run_decompose(a),
        Command::Compare(a) => run_compare(a, cli.seed),
        Command::Verify { suite } => run_verify(suite, cli.seed),
        Command::Catalog { action } => run_catalog(action, cli.seed),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Malformed(msg)) => {
            eprintln!("error: malformed input: {msg}");
            2
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Lab(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
