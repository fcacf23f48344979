use clap::{Parser, Subcommand, ValueEnum};
use qrcp::changepoint::{detect_changepoints, SearchConfig, SegmentMethod};
use qrcp::io::{ingest_csv, render_fit, render_metrics, CliError, IoError, OutputFormat, SavedFit};
use qrcp::model::QuantileLevel;
use qrcp::simulation::{
    diag_expected_g_nonnegative, rng_stream, run_monte_carlo, ErrorLaw, McOptions, ScenarioTruth,
    COEF_SEGMENTS,
};
use qrcp::solver::{kkt_check_scad, kkt_check_weighted_l1, SolverConfig};
use rand_distr::{Distribution, StandardNormal};
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qrcp",
    about = "Change-point estimation in sparse quantile regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Scad,
    LassoType,
    Quantile,
}

impl MethodArg {
    fn build(self, tau: QuantileLevel) -> SegmentMethod {
        match self {
            MethodArg::Scad => SegmentMethod::scad(tau),
            MethodArg::LassoType => SegmentMethod::lasso_type(tau),
            MethodArg::Quantile => SegmentMethod::plain(tau),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Normal,
    Cauchy,
    Exp,
}

impl From<LawArg> for ErrorLaw {
    fn from(v: LawArg) -> Self {
        match v {
            LawArg::Normal => ErrorLaw::Normal01,
            LawArg::Cauchy => ErrorLaw::Cauchy,
            LawArg::Exp => ErrorLaw::ShiftedExp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(v: FormatArg) -> Self {
        match v {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Markdown => OutputFormat::Markdown,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a change-point model to a CSV dataset
    Fit {
        /// CSV file with a header row, a `y` column, and numeric covariates
        #[arg(long)]
        input: PathBuf,
        /// Number of change-points
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "lasso-type")]
        method: MethodArg,
        /// Quantile level
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Minimum segment length (default: max(p+2, 12))
        #[arg(long)]
        min_segment: Option<usize>,
        /// Break-candidate stride; > 1 adds a refinement pass
        #[arg(long, default_value_t = 1)]
        grid_step: usize,
        #[arg(long, value_enum, default_value = "markdown")]
        out: FormatArg,
        /// Also write the full fit as JSON to this path
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run the Monte Carlo study for one error law
    Simulate {
        #[arg(long, value_enum)]
        law: LawArg,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads for replications (0 = all cores)
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Comma-separated: scad,lasso-type,quantile
        #[arg(long, default_value = "lasso-type,scad", value_delimiter = ',')]
        methods: Vec<String>,
        /// Quantile level override (default: F(0) of the error law for
        /// scad/quantile, 1/2 for lasso-type)
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        min_segment: Option<usize>,
        #[arg(long)]
        grid_step: Option<usize>,
        /// Validation hook: zero out the noise
        #[arg(long, default_value_t = false)]
        noise_free: bool,
        #[arg(long, value_enum, default_value = "markdown")]
        out: FormatArg,
    },
    /// Re-certify a saved fit or run the expected-loss positivity sweep
    Check {
        /// Saved fit (JSON) to re-certify
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Run the positivity diagnostic over a random coefficient grid
        #[arg(long, default_value_t = false)]
        prop1: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_tau(tau: f64) -> Result<QuantileLevel, CliError> {
    QuantileLevel::new(tau)
        .map_err(|e| CliError::Io(IoError::EmptyFile(format!("invalid --tau: {e}"))))
}

fn cmd_fit(
    input: PathBuf,
    k: usize,
    method: MethodArg,
    tau: f64,
    min_segment: Option<usize>,
    grid_step: usize,
    out: FormatArg,
    save: Option<PathBuf>,
) -> Result<(), CliError> {
    let data = ingest_csv(&input)?;
    let tau = parse_tau(tau)?;
    let method = method.build(tau);
    let mut search = SearchConfig::for_dimension(data.p()).with_grid_step(grid_step);
    if let Some(m) = min_segment {
        search = search.with_min_segment(m);
    }
    let cfg = SolverConfig::default();
    let fit = detect_changepoints(&data, k, &method, &search, &cfg)?;
    print!(
        "{}",
        render_fit(&method, search.min_segment, &fit, &data, out.into())?
    );
    if let Some(path) = save {
        let saved = SavedFit::new(&method, search.min_segment, &fit, &data);
        fs::write(&path, saved.to_json()?).map_err(IoError::Io)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    law: LawArg,
    n: usize,
    reps: usize,
    seed: u64,
    threads: usize,
    methods: Vec<String>,
    tau: Option<f64>,
    min_segment: Option<usize>,
    grid_step: Option<usize>,
    noise_free: bool,
    out: FormatArg,
) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Io(IoError::EmptyFile("--reps must be >= 1".into())));
    }
    let truth = ScenarioTruth::new(law.into());
    // Default levels: SCAD and plain-quantile fits run at the error law's
    // zero-quantile index F(0); the LASSO-type weighting scheme is built
    // around the median, so it runs at tau = 1/2 unless overridden.
    let tau_star = parse_tau(tau.unwrap_or_else(|| truth.tau_star()))?;
    let tau_lasso = parse_tau(tau.unwrap_or(0.5))?;
    let methods: Vec<SegmentMethod> = methods
        .iter()
        .map(|m| match m.as_str() {
            "scad" => Ok(SegmentMethod::scad(tau_star)),
            "lasso-type" => Ok(SegmentMethod::lasso_type(tau_lasso)),
            "quantile" => Ok(SegmentMethod::plain(tau_star)),
            other => Err(CliError::Io(IoError::EmptyFile(format!(
                "unknown method {other:?} (expected scad, lasso-type, quantile)"
            )))),
        })
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Io(IoError::EmptyFile("--methods is empty".into())));
    }
    let mut opts = McOptions {
        threads,
        noise_free,
        grid_step,
        ..Default::default()
    };
    if let Some(m) = min_segment {
        opts.min_segment = m;
    }
    let report = run_monte_carlo(&truth, n, &methods, reps, seed, &opts);
    print!("{}", render_metrics(&report, out.into())?);
    if report.methods.iter().any(|m| m.invalid) {
        return Err(CliError::Invalid(
            "failure rate exceeded 5% for at least one method".into(),
        ));
    }
    Ok(())
}

/// KKT residual threshold for re-certification, scaled by segment length.
fn recertify(saved: &SavedFit) -> Result<(), CliError> {
    let n = saved.data.n();
    let tol = 1e-4 * n as f64;
    let cfg = SolverConfig::default();
    let tau = saved.method.tau();
    for seg_fit in &saved.segments {
        let (j1, j2) = seg_fit.range;
        if j2 > n || j1 >= j2 {
            return Err(CliError::Invalid(format!(
                "segment range ({j1}, {j2}] out of bounds for n={n}"
            )));
        }
        let seg = saved.data.slice(j1, j2);
        let m = (j2 - j1) as f64;
        let residual = match &saved.method {
            SegmentMethod::Scad { a, lambda_scale, .. } => {
                let lambda = lambda_scale * m.powf(-0.4);
                kkt_check_scad(seg_fit, &seg, tau, lambda, *a)
            }
            SegmentMethod::LassoType {
                weight_scale,
                pilot_scale,
                ..
            } => {
                let pilot_w = vec![pilot_scale * m.ln(); saved.data.p()];
                let pilot = qrcp::solver::solve_weighted_l1_qr(&seg, tau, &pilot_w, &cfg)
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                let weights: Vec<f64> =
                    qrcp::solver::adaptive_weights_lasso_type(&pilot, j2 - j1)
                        .into_iter()
                        .map(|w| w * weight_scale)
                        .collect();
                kkt_check_weighted_l1(seg_fit, &seg, tau, &weights)
            }
            SegmentMethod::PlainQuantile { .. } => {
                kkt_check_weighted_l1(seg_fit, &seg, tau, &vec![0.0; saved.data.p()])
            }
        };
        println!(
            "segment ({j1}, {j2}]: kkt residual {residual:.3e} (saved {:.3e}, tolerance {tol:.3e})",
            seg_fit.kkt_residual
        );
        if residual > tol {
            return Err(CliError::Invalid(format!(
                "KKT residual {residual:.3e} exceeds {tol:.3e} on segment ({j1}, {j2}]"
            )));
        }
    }
    println!("fit certified: all segments satisfy the stationarity conditions");
    Ok(())
}

fn prop1_sweep(samples: usize, grid_points: usize, seed: u64) -> Result<(), CliError> {
    let mut grid: Vec<Vec<f64>> = vec![COEF_SEGMENTS[0].to_vec()];
    let mut rng = rng_stream(seed, u64::MAX);
    for g in 1..grid_points.max(1) {
        let scale = 0.1 + 2.0 * (g as f64) / (grid_points as f64);
        let phi: Vec<f64> = COEF_SEGMENTS[0]
            .iter()
            .map(|&c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + scale * z
            })
            .collect();
        grid.push(phi);
    }
    let mut all_ok = true;
    for law in [ErrorLaw::Normal01, ErrorLaw::Cauchy, ErrorLaw::ShiftedExp] {
        let truth = ScenarioTruth::new(law);
        let report = diag_expected_g_nonnegative(&truth, samples, &grid, seed);
        let worst = report
            .entries
            .iter()
            .map(|e| {
                if e.std_error > 0.0 {
                    e.estimate / e.std_error
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min);
        println!(
            "law {:>6}: {} grid points, min estimate/SE = {:.2}, ok = {}",
            law.name(),
            report.entries.len(),
            worst,
            report.ok
        );
        all_ok &= report.ok;
    }
    if !all_ok {
        return Err(CliError::Invalid(
            "expected loss difference dipped below -3 SE".into(),
        ));
    }
    println!("positivity diagnostic passed on all laws");
    Ok(())
}

fn cmd_check(
    fit: Option<PathBuf>,
    prop1: bool,
    samples: usize,
    grid_points: usize,
    seed: u64,
) -> Result<(), CliError> {
    if fit.is_none() && !prop1 {
        return Err(CliError::Io(IoError::EmptyFile(
            "nothing to check: pass --fit PATH and/or --prop1".into(),
        )));
    }
    if let Some(path) = fit {
        let file = fs::File::open(&path).map_err(IoError::Io)?;
        let saved = SavedFit::from_reader(file)?;
        recertify(&saved)?;
    }
    if prop1 {
        prop1_sweep(samples, grid_points, seed)?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            input,
            k,
            method,
            tau,
            min_segment,
            grid_step,
            out,
            save,
        } => cmd_fit(input, k, method, tau, min_segment, grid_step, out, save),
        Command::Simulate {
            law,
            n,
            reps,
            seed,
            threads,
            methods,
            tau,
            min_segment,
            grid_step,
            noise_free,
            out,
        } => cmd_simulate(
            law,
            n,
            reps,
            seed,
            threads,
            methods,
            tau,
            min_segment,
            grid_step,
            noise_free,
            out,
        ),
        Command::Check {
            fit,
            prop1,
            samples,
            grid_points,
            seed,
        } => cmd_check(fit, prop1, samples, grid_points, seed),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
