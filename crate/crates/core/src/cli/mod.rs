//! The `telesim` commands: `run`, `sweep`, `loss` and `check`.
//!
//! Exit codes: 0 success, 1 usage or parse error (including I/O), 2 invariant
//! violation, 3 numerical divergence.

pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::loss::{coefficients_corrected, coefficients_paper, fmt17, LossMode, LossProfile};
use crate::sim::checks::{all_passed, model_checks, output_checks, run_checks, CheckResult, CheckStatus};
use crate::sim::{run, CsvSink, RunOutput, Scenario, ScenarioConfig, SimError};

pub use config::{parse_config, render_config, ParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Environment variable bounding the number of concurrent sweep runs.
pub const THREADS_ENV: &str = "TELESIM_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::Io(source) => CliError::Io {
            path: PathBuf::from("<trace>"),
            source,
        },
        other => CliError::Divergence(other.to_string()),
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|e| {
        CliError::Usage(format!("{}: {e}", path.display()))
    })
}

/// `<dir>/<stem>.<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Run `cfg` with the trace going to `out`, plus `.summary.txt` and
/// `.summary.json` files beside it.
fn run_to_files<const N: usize>(scenario: &Scenario<N>, out: &Path) -> Result<RunOutput, CliError> {
    let file = File::create(out).map_err(io_err(out))?;
    let mut sink = CsvSink::new(BufWriter::new(file));
    let result = run(scenario, &mut sink);
    // keep the partial trace on failure
    let flushed = sink.into_inner().flush();
    let output = result.map_err(sim_err)?;
    flushed.map_err(io_err(out))?;

    let txt = sibling(out, "summary.txt");
    fs::write(&txt, output.summary.to_text()).map_err(io_err(&txt))?;
    let json = sibling(out, "summary.json");
    let body = serde_json::to_string_pretty(&output).expect("summary serializes");
    fs::write(&json, body + "\n").map_err(io_err(&json))?;
    Ok(output)
}

fn dispatch<T>(
    cfg: &ScenarioConfig,
    one: impl FnOnce(&Scenario<1>) -> Result<T, CliError>,
    two: impl FnOnce(&Scenario<2>) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match cfg.dof() {
        1 => one(&cfg.build::<1>().map_err(ParseError::from)?),
        2 => two(&cfg.build::<2>().map_err(ParseError::from)?),
        n => Err(CliError::Usage(format!("`robot.model`: unsupported joint count {n}"))),
    }
}

fn failures(results: &[CheckResult]) -> Vec<String> {
    results
        .iter()
        .filter(|r| r.status == CheckStatus::Fail)
        .map(|r| format!("{} ({})", r.name, r.detail))
        .collect()
}

/// `run --config <path> --out <path> [--strict]`.
///
/// Without `--strict` only unbounded signals count as a violation; with it
/// every invariant of [`output_checks`] must hold over the whole run.
pub fn cmd_run(config: &Path, out: &Path, strict: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    fn go<const N: usize>(
        s: &Scenario<N>,
        out: &Path,
        strict: bool,
        stdout: &mut dyn Write,
    ) -> Result<(), CliError> {
        let output = run_to_files(s, out)?;
        let _ = write!(stdout, "{}", output.summary.to_text());
        let mut bad = Vec::new();
        if !output.report.bounded() {
            bad.push(format!("bounded signals ({})", output.report.flagged.join("; ")));
        }
        if strict {
            let mut results = model_checks(s);
            results.extend(output_checks(s, &output));
            bad.extend(failures(&results).into_iter().filter(|f| !f.starts_with("bounded signals")));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invariant(bad.join(", ")))
        }
    }
    match cfg.dof() {
        1 => go(&cfg.build::<1>().map_err(ParseError::from)?, out, strict, stdout),
        2 => go(&cfg.build::<2>().map_err(ParseError::from)?, out, strict, stdout),
        n => Err(CliError::Usage(format!("`robot.model`: unsupported joint count {n}"))),
    }
}

/// Parse a comma-separated list of loss rates, dropping duplicates.
pub fn parse_rates(list: &str, warn: &mut dyn Write) -> Result<Vec<f64>, CliError> {
    let mut rates: Vec<f64> = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let r: f64 = item
            .parse()
            .map_err(|_| CliError::Usage(format!("`--rates`: `{item}` is not a number")))?;
        if !(r.is_finite() && (0.0..1.0).contains(&r)) {
            return Err(CliError::Usage(format!("`--rates`: {r} is outside [0, 1)")));
        }
        if rates.contains(&r) {
            let _ = writeln!(warn, "warning: duplicate loss rate {r} ignored");
        } else {
            rates.push(r);
        }
    }
    if rates.is_empty() {
        return Err(CliError::Usage("`--rates`: at least one loss rate is required".into()));
    }
    Ok(rates)
}

pub fn thread_limit() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Outcome of one sweep member.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub loss_rate: f64,
    pub result: Result<RunOutput, String>,
    pub exit: i32,
}

/// The combined table: `loss_rate,final_error,max_V_increase,settled,status`.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("loss_rate,final_error,max_V_increase,settled,status\n");
    for row in rows {
        match &row.result {
            Ok(o) => out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(row.loss_rate),
                fmt17(o.summary.final_error),
                o.summary.max_v_increase.map_or("nan".to_string(), fmt17),
                o.summary.settled,
                if row.exit == EXIT_OK { "ok" } else { "unbounded" }
            )),
            Err(_) => out.push_str(&format!("{},nan,nan,false,diverged\n", fmt17(row.loss_rate))),
        }
    }
    out
}

/// `sweep --config <path> --rates r1,r2,... --out-dir <dir>`.
pub fn cmd_sweep(
    config: &Path,
    rates: &str,
    out_dir: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Vec<SweepRow>, CliError> {
    let base = load_config(config)?;
    let rates = parse_rates(rates, stderr)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    // validate every member up front so a bad rate fails before any run starts
    let configs: Vec<ScenarioConfig> = rates
        .iter()
        .map(|&r| {
            let mut c = base.clone();
            c.loss.alpha = r * c.loss.period;
            if c.loss.backward_alpha.is_some() {
                c.loss.backward_alpha = Some(c.loss.alpha);
            }
            c.validate().map_err(ParseError::from)?;
            Ok(c)
        })
        .collect::<Result<_, CliError>>()?;

    let rows: Vec<Mutex<Option<SweepRow>>> = rates.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread_limit().min(rates.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let out = out_dir.join(format!("trace_rate_{}.csv", rates[i]));
                let result = dispatch(
                    &configs[i],
                    |s| run_to_files(s, &out),
                    |s| run_to_files(s, &out),
                );
                let row = match result {
                    Ok(o) => SweepRow {
                        loss_rate: rates[i],
                        exit: if o.report.bounded() { EXIT_OK } else { EXIT_INVARIANT },
                        result: Ok(o),
                    },
                    Err(e) => SweepRow {
                        loss_rate: rates[i],
                        exit: e.exit_code(),
                        result: Err(e.to_string()),
                    },
                };
                *rows[i].lock().unwrap() = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = rows
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every rate ran"))
        .collect();

    let table = sweep_table(&rows);
    let path = out_dir.join("sweep_summary.csv");
    fs::write(&path, &table).map_err(io_err(&path))?;
    let _ = write!(stdout, "{table}");
    for row in &rows {
        if let Err(e) = &row.result {
            let _ = writeln!(stderr, "rate {}: {e}", row.loss_rate);
        }
    }
    Ok(rows)
}

/// Worst exit code over a sweep.
pub fn sweep_exit(rows: &[SweepRow]) -> i32 {
    rows.iter().map(|r| r.exit).max().unwrap_or(EXIT_OK)
}

/// Samples per period in the loss CSV.
pub const LOSS_SAMPLES: usize = 2000;

/// `loss --alpha <s> --period <s> --harmonics <N> --out <path>`.
///
/// Writes `t,L_ideal,L_paper,L_corrected,d1,d2` over one period (derivatives
/// of the quoted-coefficient series) and the coefficient table
/// `n,a_n_paper,b_n_paper,a_n_corr,b_n_corr,l2_error` for `n = 0..N` to
/// `<stem>.coefficients.csv`, where `l2_error` is the RMS error of the
/// `n`-harmonic corrected series against the ideal pulse.
pub fn cmd_loss(alpha: f64, period: f64, harmonics: u32, out: &Path) -> Result<(), CliError> {
    let usage = |e: crate::loss::LossError| {
        let flag = match e {
            crate::loss::LossError::InvalidPeriod(_) => "--period",
            crate::loss::LossError::InvalidWidth { .. } => "--alpha",
            _ => "--harmonics",
        };
        CliError::Usage(format!("`{flag}`: {e}"))
    };
    let paper = LossProfile::new(period, alpha, harmonics, LossMode::FourierPaper).map_err(usage)?;
    let corrected = paper.with_mode(LossMode::FourierCorrected);

    let mut csv = String::from("t,L_ideal,L_paper,L_corrected,d1,d2\n");
    for k in 0..=LOSS_SAMPLES {
        let t = period * k as f64 / LOSS_SAMPLES as f64;
        let row = [
            t,
            paper.eval_ideal(t),
            paper.eval(t),
            corrected.eval(t),
            paper.eval_series_d1(t).map_err(usage)?,
            paper.eval_series_d2(t).map_err(usage)?,
        ];
        csv.push_str(&row.map(fmt17).join(","));
        csv.push('\n');
    }
    fs::write(out, csv).map_err(io_err(out))?;

    let mut table = String::from("n,a_n_paper,b_n_paper,a_n_corr,b_n_corr,l2_error\n");
    for n in 0..=harmonics {
        let (ap, bp) = if n == 0 {
            // the quoted coefficients carry no constant term
            (0.0, 0.0)
        } else {
            let p = coefficients_paper(n, &paper).map_err(usage)?;
            (p.a, p.b)
        };
        let c = coefficients_corrected(n, &paper);
        let err = crate::loss::truncation_error_inner(&corrected, n);
        table.push_str(&format!(
            "{n},{},{},{},{},{}\n",
            fmt17(ap),
            fmt17(bp),
            fmt17(c.a),
            fmt17(c.b),
            fmt17(err)
        ));
    }
    let path = sibling(out, "coefficients.csv");
    fs::write(&path, table).map_err(io_err(&path))?;
    Ok(())
}

/// `check --config <path>`: prints one line per invariant.
pub fn cmd_check(config: &Path, stdout: &mut dyn Write) -> Result<Vec<CheckResult>, CliError> {
    let cfg = load_config(config)?;
    let results = dispatch(
        &cfg,
        |s| run_checks(s).map_err(sim_err),
        |s| run_checks(s).map_err(sim_err),
    )?;
    for r in &results {
        let _ = writeln!(stdout, "{r}");
    }
    if all_passed(&results) {
        Ok(results)
    } else {
        Err(CliError::Invariant(failures(&results).join(", ")))
    }
}
