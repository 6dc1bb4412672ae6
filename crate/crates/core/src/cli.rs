//! Command-line front end: bounds, numerical searches, figure sweeps and the
//! Jacobi validation suite, with CSV output for sweeps.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    figure_sweep, format_float, jacobi_validation, numerical_hmax, soundness_violations, theory_bound, Example,
    GridSpec, SweepRow, SweepSettings, DEFAULT_EPSILONS, DEFAULT_H_HI, DEFAULT_H_LO, DEFAULT_TOL_H,
};

/// Environment variable capping the number of sweep threads.
pub const THREADS_ENV: &str = "GEOSTAB_THREADS";
/// Slack allowed in `h_theory ≤ h_numeric` before a row is reported.
pub const SOUNDNESS_SLACK: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geostab", version, about = "Step-size bounds and expansivity sweeps for geodesic Euler integrators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified step-size bound and the constants behind it.
    Bound(PointArgs),
    /// Numerically largest non-expansive step from a direction sweep.
    Search(SearchArgs),
    /// Sweep theory against numerics over a base-point grid and write CSV.
    Figure(FigureArgs),
    /// Check closed-form Jacobi norms against finite differences.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// One of s2, h2, h2-singular, s3, euclid.
    #[arg(long, value_parser = parse_example)]
    pub example: Example,
    /// Field parameter ε.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Cocoercivity constant of the flat example `X(p) = −p/α`.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Base point parameters: φ₀ (s2), y₀ (h2), ψ₀,θ₀ (s3), x₀,y₀ (euclid).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Directions per sweep; defaults to 512 in 2D and 2048 in 3D.
    #[arg(long)]
    pub n_dirs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL_H)]
    pub tol_h: f64,
    #[arg(long, default_value_t = DEFAULT_H_LO)]
    pub h_lo: f64,
    #[arg(long, default_value_t = DEFAULT_H_HI)]
    pub h_hi: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(long, value_parser = parse_example)]
    pub example: Example,
    /// Comma-separated field parameters; defaults to 0.5,1,2.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    /// Grid of the first base parameter as start:stop:count.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    /// Fixed θ₀ of the s3 sweep.
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub n_dirs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL_H)]
    pub tol_h: f64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Example to validate; all examples when absent.
    #[arg(long, value_parser = parse_example)]
    pub example: Option<Example>,
    #[arg(long, default_value_t = 200)]
    pub n_cases: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn parse_example(s: &str) -> std::result::Result<Example, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl PointArgs {
    fn param(&self) -> f64 {
        match self.example {
            Example::Euclid => self.alpha,
            _ => self.epsilon,
        }
    }

    fn base(&self) -> Result<(f64, Option<f64>)> {
        let (d1, d2) = self.example.default_base();
        match self.point.as_slice() {
            [] => Ok((d1, d2)),
            [b1] => Ok((*b1, d2)),
            [b1, b2] => Ok((*b1, Some(*b2))),
            more => Err(Error::InvalidArgument(format!("--point takes at most two values, got {}", more.len()))),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")))
    }
}

fn default_dirs(example: Example, n_dirs: Option<usize>) -> SweepSettings {
    let mut s = SweepSettings::for_example(example);
    if let Some(n) = n_dirs {
        s.n_dirs = n;
    }
    s
}

fn run_bound(args: &PointArgs, out: &mut dyn Write) -> Result<i32> {
    let param = args.param();
    let (b1, b2) = args.base()?;
    let p = args.example.point(b1, b2)?;
    let (k, b) = theory_bound(args.example, param, &p)?;
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_else(|| "undefined".into());
    let lines = [
        format!("example     {}", args.example),
        format!("point       {:?}", p.coords.as_slice()),
        format!("alpha       {}", format_float(k.alpha)),
        format!("mu_plus     {}", opt(k.mu_plus)),
        format!("mu_minus    {}", opt(k.mu_minus)),
        format!("sigma       {}", format_float(k.sigma)),
        format!("C           {}", format_float(k.c)),
        format!("rho         {}", format_float(k.rho)),
        format!("theorem     {:?}", b.theorem),
        format!("binding     {}", b.binding),
        format!("kappa_at_h  {}", format_float(b.kappa_at_h)),
        if b.is_unconditional() {
            "h_theory    unconditional".to_string()
        } else {
            format!("h_theory    {}", format_float(b.h_max))
        },
    ];
    for l in lines {
        writeln!(out, "{l}").map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn run_search(args: &SearchArgs, out: &mut dyn Write) -> Result<i32> {
    let ex = args.point.example;
    let (b1, b2) = args.point.base()?;
    positive("--tol-h", args.tol_h)?;
    let field = ex.field(args.point.param())?;
    let p = ex.point(b1, b2)?;
    let s = default_dirs(ex, args.n_dirs);
    let r = numerical_hmax(&field, &p, s.n_dirs, args.h_lo, args.h_hi, args.tol_h)?;
    writeln!(out, "example     {ex}").map_err(io_err)?;
    writeln!(out, "point       {:?}", p.coords.as_slice()).map_err(io_err)?;
    writeln!(out, "n_dirs      {}", s.n_dirs).map_err(io_err)?;
    if r.unconditional {
        writeln!(out, "h_numeric   unconditional (no expansive step up to {})", format_float(r.h)).map_err(io_err)?;
    } else {
        writeln!(out, "h_numeric   {}", format_float(r.h)).map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

/// Writes rows with the fixed header, LF line endings and 17-digit floats.
pub fn write_rows<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush().map_err(io_err)
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(|e| Error::Io(e.to_string()))
}

fn run_figure(args: &FigureArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ex = args.example;
    positive("--tol-h", args.tol_h)?;
    let eps = if args.epsilon.is_empty() { DEFAULT_EPSILONS.to_vec() } else { args.epsilon.clone() };
    for e in &eps {
        positive("--epsilon", *e)?;
    }
    let grid = args.grid.unwrap_or_else(|| ex.default_grid()).values();
    let settings = default_dirs(ex, args.n_dirs);
    let base2 = if ex == Example::S3 { args.theta0.or(Some(crate::experiments::DEFAULT_S3_THETA)) } else { args.theta0 };
    let rows = with_thread_pool(|| figure_sweep(ex, &eps, &grid, base2, &settings))??;
    match &args.output {
        Some(path) => write_rows(&rows, File::create(path).map_err(io_err)?)?,
        None => write_rows(&rows, &mut *out)?,
    }
    let bad = soundness_violations(&rows, SOUNDNESS_SLACK);
    if bad.is_empty() {
        return Ok(EXIT_OK);
    }
    for r in bad {
        writeln!(
            err,
            "soundness violated: {} eps={} base1={} h_theory={} > h_numeric={}",
            r.example,
            r.epsilon,
            r.base1,
            format_float(r.h_theory),
            format_float(r.h_numeric)
        )
        .map_err(io_err)?;
    }
    Ok(EXIT_INVARIANT)
}

fn run_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32> {
    let examples: Vec<Example> = match args.example {
        Some(e) => vec![e],
        None => Example::ALL.to_vec(),
    };
    let mut status = EXIT_OK;
    for ex in examples {
        let r = jacobi_validation(ex, args.n_cases, args.seed)?;
        writeln!(
            out,
            "{:<12} cases {:>5}  max deviation {:.3e}  {}",
            ex.as_str(),
            r.n_cases,
            r.max_deviation,
            if r.passed { "pass" } else { "FAIL" }
        )
        .map_err(io_err)?;
        if !r.passed {
            status = EXIT_INVARIANT;
        }
    }
    Ok(status)
}

/// Runs `f` in a pool sized by [`THREADS_ENV`] when it is set.
pub fn with_thread_pool<T: Send, F: FnOnce() -> T + Send>(f: F) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Io(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

fn io_err(e: io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Executes a parsed command, returning the process exit status.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Bound(a) => run_bound(a, out),
        Command::Search(a) => run_search(a, out),
        Command::Figure(a) => run_figure(a, out, err),
        Command::Validate(a) => run_validate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Domain { .. } | Error::Dimension { .. } => EXIT_USAGE,
                _ => EXIT_INVARIANT,
            }
        }
    }
}

/// Parses `args` and runs; usage errors exit with status 2.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            code
        }
    }
}
