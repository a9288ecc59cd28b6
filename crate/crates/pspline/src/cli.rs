//! Command-line front end: fitting, kernel and boundary-kernel tables,
//! identity certification, and simulation studies.
//!
//! Exit codes are a stable contract: 0 success, 1 I/O failure, 2
//! usage/validation error, 3 certification failure. No subcommand
//! mutates its inputs; all output goes to `--out` or stdout. CSV is
//! written with 17 significant digits so outputs round-trip exactly.

use crate::lab::{self, rep_record_header, RepRecord, SimScenario, StudyReport};
use crate::{boundary, fit, kernel, penalty, CertCheck};
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pspline",
    version,
    about = "Penalized-spline smoothing, equivalent kernels, and simulation studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file; stdout when omitted. Relative paths resolve against
    /// $PSPLINE_OUT_DIR when it is set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for tables (simulation reports are always JSON)
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a penalized spline to a dataset (CSV: `t,y` rows with
    /// t_i = i/n, or a single `y` column)
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// number of knot intervals K_n (must divide n)
        #[arg(long)]
        kn: usize,
        /// spline degree
        #[arg(long)]
        p: usize,
        /// difference-penalty order
        #[arg(long)]
        m: usize,
        /// penalty weight lambda*
        #[arg(long)]
        lambda: f64,
        /// number of evaluation points for the fitted curve
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
    /// Tabulate the interior equivalent kernel on [-T, T]
    Kernel {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        /// append the moment certificate (orders 0..2m-1)
        #[arg(long)]
        moments: bool,
    },
    /// Tabulate the boundary-corrected kernel K_b(t, .) on [0, 1]
    Boundary {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        beta: f64,
        /// estimation point
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        /// add the two-boundary finite-sample kernel column (m = 2)
        #[arg(long)]
        finite_sample: bool,
    },
    /// Run the identity certificates and print one line per check
    Certify {
        #[arg(long)]
        m: usize,
    },
    /// Run a simulation study from a JSON scenario file
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// RNG seed (overrides any seed in the scenario file)
        #[arg(long)]
        seed: u64,
        /// optional CSV of per-replication records
        #[arg(long)]
        reps: Option<PathBuf>,
    },
}

/// Failures carrying their exit code.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Usage(String),
    Certification,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Certification => EXIT_CERTIFICATION,
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            CliError::Io(msg) | CliError::Usage(msg) => Some(msg),
            CliError::Certification => None,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { ref data, kn, p, m, lambda, grid } => {
            let output = cmd_fit(data, kn, p, m, lambda, grid, cli.format)?;
            write_output(cli.out.as_deref(), &output)
        }
        Command::Kernel { m, beta, points, moments } => {
            let output = cmd_kernel(m, beta, points, moments, cli.format)?;
            write_output(cli.out.as_deref(), &output)
        }
        Command::Boundary { m, beta, t, points, finite_sample } => {
            let output = cmd_boundary(m, beta, t, points, finite_sample, cli.format)?;
            write_output(cli.out.as_deref(), &output)
        }
        Command::Certify { m } => {
            let (output, all_pass) = cmd_certify(m)?;
            write_output(cli.out.as_deref(), &output)?;
            if all_pass {
                Ok(())
            } else {
                Err(CliError::Certification)
            }
        }
        Command::Simulate { ref scenario, seed, ref reps } => {
            let (report, records) = cmd_simulate(scenario, seed)?;
            if let Some(path) = reps {
                let csv = rep_records_csv(report.study, &records);
                write_file(path, &csv)?;
            }
            write_output(cli.out.as_deref(), &(report.to_json() + "\n"))
        }
    }
}

/// 17 significant digits: round-trips f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => write_file(path, content),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    let resolved = match std::env::var_os("PSPLINE_OUT_DIR") {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    };
    std::fs::write(&resolved, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", resolved.display())))
}

fn read_data_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut y = Vec::new();
    let mut t = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::Usage(format!("line {}: `{s}` is not a number", lineno + 1))
            })
        };
        match fields.as_slice() {
            [value] => y.push(parse(value)?),
            [ti, value] => {
                // skip an optional header row
                if lineno == 0 && (parse(ti).is_err() || parse(value).is_err()) {
                    continue;
                }
                t.push(parse(ti)?);
                y.push(parse(value)?);
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "line {}: expected 1 or 2 comma-separated columns",
                    lineno + 1
                )))
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::Usage("data file contains no observations".into()));
    }
    if !t.is_empty() {
        // the model is pinned to the equally spaced design t_i = i/n
        let n = t.len() as f64;
        for (i, ti) in t.iter().enumerate() {
            let want = (i + 1) as f64 / n;
            if (ti - want).abs() > 1e-9 {
                return Err(CliError::Usage(format!(
                    "t column must be the equally spaced design i/n; row {} has {} (expected {})",
                    i + 1,
                    ti,
                    want
                )));
            }
        }
    }
    Ok(y)
}

fn cmd_fit(
    data: &Path,
    kn: usize,
    p: usize,
    m: usize,
    lambda: f64,
    grid: usize,
    format: Format,
) -> Result<String, CliError> {
    let y = read_data_file(data)?;
    let config = fit::FitConfig::new(y.len(), kn, p, m, lambda)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let fitted = fit::fit(&y, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!(
        "n = {}, K_n = {kn}, M_n = {}, alpha = {:.6e}, beta = {:.6e}",
        y.len(),
        config.points_per_interval(),
        config.alpha(),
        config.beta()
    );
    let spline = fitted.spline();
    let grid = grid.clamp(2, 1_000_001);
    let xs: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let values: Vec<f64> = xs.iter().map(|x| spline.eval(*x).expect("grid in [0,1]")).collect();
    match format {
        Format::Csv => {
            let mut out = String::from("x,fitted\n");
            for (x, v) in xs.iter().zip(&values) {
                let _ = writeln!(out, "{},{}", fmt(*x), fmt(*v));
            }
            out.push('\n');
            out.push_str("index,coefficient\n");
            for (k, b) in fitted.coeffs().iter().enumerate() {
                let _ = writeln!(out, "{},{}", k + 1, fmt(*b));
            }
            Ok(out)
        }
        Format::Json => {
            let doc = serde_json::json!({
                "n": y.len(),
                "kn": kn,
                "p": p,
                "m": m,
                "lambda_star": lambda,
                "alpha": config.alpha(),
                "beta": config.beta(),
                "m_n": config.points_per_interval(),
                "grid": xs,
                "fitted": values,
                "coefficients": fitted.coeffs(),
            });
            Ok(serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
        }
    }
}

fn cmd_kernel(
    m: usize,
    beta: f64,
    points: usize,
    moments: bool,
    format: Format,
) -> Result<String, CliError> {
    if !(1..=kernel::MAX_ORDER).contains(&m) {
        return Err(CliError::Usage(format!(
            "kernel order must be between 1 and {}, got {m}",
            kernel::MAX_ORDER
        )));
    }
    if !(beta > 0.0) {
        return Err(CliError::Usage(format!("beta must be positive, got {beta}")));
    }
    let spec = kernel::solve_kernel_coefficients(m).map_err(|e| CliError::Usage(e.to_string()))?;
    let half_width = 40f64.max(40.0 / spec.min_decay()) / beta;
    let points = points.clamp(3, 1_000_001);
    let taus: Vec<f64> = (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect();
    let values: Vec<f64> = taus.iter().map(|tau| spec.value(beta, tau.abs())).collect();
    let moment_rows: Vec<(usize, f64)> = if moments {
        (0..2 * m).map(|order| (order, kernel::kernel_moment(&spec, order))).collect()
    } else {
        Vec::new()
    };
    match format {
        Format::Csv => {
            let mut out = String::from("tau,kernel\n");
            for (tau, v) in taus.iter().zip(&values) {
                let _ = writeln!(out, "{},{}", fmt(*tau), fmt(*v));
            }
            if moments {
                out.push('\n');
                out.push_str("order,moment\n");
                for (order, value) in &moment_rows {
                    let _ = writeln!(out, "{order},{}", fmt(*value));
                }
            }
            Ok(out)
        }
        Format::Json => {
            let mut doc = serde_json::json!({
                "m": m,
                "beta": beta,
                "tau": taus,
                "kernel": values,
            });
            if moments {
                doc["moments"] = serde_json::json!(moment_rows
                    .iter()
                    .map(|(order, value)| serde_json::json!({"order": order, "value": value}))
                    .collect::<Vec<_>>());
            }
            Ok(serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
        }
    }
}

fn cmd_boundary(
    m: usize,
    beta: f64,
    t: f64,
    points: usize,
    finite_sample: bool,
    format: Format,
) -> Result<String, CliError> {
    if finite_sample && m != 2 {
        return Err(CliError::Usage(format!(
            "--finite-sample is only available for m = 2, got m = {m}"
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(CliError::Usage(format!("t must lie in [0, 1], got {t}")));
    }
    let bk = boundary::BoundaryKernelSpec::new(m, beta)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(warning) = &bk.warning {
        eprintln!("warning: {warning}");
    }
    let points = points.clamp(2, 1_000_001);
    let ss: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let kb: Vec<f64> = ss.iter().map(|s| bk.eval(t, *s)).collect();
    let fs: Option<Vec<f64>> = if finite_sample {
        Some(
            ss.iter()
                .map(|s| boundary::finite_sample_kernel(2, beta, t, *s).expect("m = 2 checked"))
                .collect(),
        )
    } else {
        None
    };
    match format {
        Format::Csv => {
            let mut out = String::new();
            if fs.is_some() {
                out.push_str("s,kernel_b,finite_sample\n");
            } else {
                out.push_str("s,kernel_b\n");
            }
            for (i, s) in ss.iter().enumerate() {
                match &fs {
                    Some(fs) => {
                        let _ = writeln!(out, "{},{},{}", fmt(*s), fmt(kb[i]), fmt(fs[i]));
                    }
                    None => {
                        let _ = writeln!(out, "{},{}", fmt(*s), fmt(kb[i]));
                    }
                }
            }
            Ok(out)
        }
        Format::Json => {
            let mut doc = serde_json::json!({
                "m": m,
                "beta": beta,
                "t": t,
                "s": ss,
                "kernel_b": kb,
            });
            if let Some(fs) = fs {
                doc["finite_sample"] = serde_json::json!(fs);
            }
            Ok(serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
        }
    }
}

fn cmd_certify(m: usize) -> Result<(String, bool), CliError> {
    if !(1..=kernel::MAX_ORDER).contains(&m) {
        return Err(CliError::Usage(format!(
            "certification order must be between 1 and {}, got {m}",
            kernel::MAX_ORDER
        )));
    }
    let mut checks: Vec<CertCheck> = Vec::new();
    checks.extend(penalty::certify(m, 2 * m + 6, 100, 20260809));
    checks.extend(kernel::certify(m).map_err(|e| CliError::Usage(e.to_string()))?);
    checks.extend(boundary::certify(m).map_err(|e| CliError::Usage(e.to_string()))?);
    let mut out = String::new();
    let mut all_pass = true;
    for check in &checks {
        let status = if check.pass() { "PASS" } else { "FAIL" };
        all_pass &= check.pass();
        let _ = writeln!(
            out,
            "{status}  {}  (max error {:.3e}, tolerance {:.1e})",
            check.name, check.max_error, check.tolerance
        );
    }
    let _ = writeln!(
        out,
        "{} of {} checks passed",
        checks.iter().filter(|c| c.pass()).count(),
        checks.len()
    );
    Ok((out, all_pass))
}

fn cmd_simulate(path: &Path, seed: u64) -> Result<(StudyReport, Vec<RepRecord>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let scenario: SimScenario = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid scenario file: {e}")))?;
    let scenario = scenario.with_seed(seed);
    let started = std::time::Instant::now();
    let result = lab::run_study(&scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!("study completed in {:.2}s", started.elapsed().as_secs_f64());
    Ok(result)
}

fn rep_records_csv(kind: lab::StudyKind, records: &[RepRecord]) -> String {
    let mut out = rep_record_header(kind).join(",");
    out.push('\n');
    for record in records {
        out.push_str(&record.rep.to_string());
        for v in &record.values {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_table_matches_closed_form() {
        let out = cmd_kernel(1, 1.0, 11, true, Format::Csv).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("tau,kernel"));
        // middle row is tau = 0, kernel = 1/2
        let mid = out.lines().nth(6).unwrap();
        let fields: Vec<&str> = mid.split(',').collect();
        assert!(fields[0].parse::<f64>().unwrap().abs() < 1e-12);
        assert!((fields[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-15);
        // moment section present
        assert!(out.contains("order,moment"));
        let last = out.trim_end().lines().last().unwrap();
        assert!(last.starts_with("1,"));
    }

    #[test]
    fn kernel_rejects_bad_order() {
        assert!(matches!(cmd_kernel(0, 1.0, 11, false, Format::Csv), Err(CliError::Usage(_))));
        assert!(matches!(cmd_kernel(13, 1.0, 11, false, Format::Csv), Err(CliError::Usage(_))));
    }

    #[test]
    fn boundary_requires_m2_for_finite_sample() {
        assert!(matches!(
            cmd_boundary(3, 10.0, 0.2, 11, true, Format::Csv),
            Err(CliError::Usage(_))
        ));
        let out = cmd_boundary(2, 10.0, 0.2, 11, true, Format::Csv).unwrap();
        assert!(out.starts_with("s,kernel_b,finite_sample"));
    }

    #[test]
    fn certify_passes_for_small_orders() {
        for m in [1usize, 2] {
            let (out, pass) = cmd_certify(m).unwrap();
            assert!(pass, "{out}");
            assert!(!out.contains("FAIL"));
        }
    }

    #[test]
    fn csv_floats_round_trip() {
        let v = 0.1 + 0.2;
        let s = fmt(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn data_file_errors() {
        assert!(matches!(
            read_data_file(Path::new("/nonexistent/file.csv")),
            Err(CliError::Io(_))
        ));
    }
}
