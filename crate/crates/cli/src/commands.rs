use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use walkrange_core::acceptance::{self, Tier};
use walkrange_core::analytic::{self, AnalyticResult};
use walkrange_core::estimators::{regular_variation_fit, run_experiment, FitResult};
use walkrange_core::Error;

use crate::config::{AnalyticArgs, Command, FitArgs, Quantity, RunConfig, SimulateArgs, TierArg, VerifyArgs};
use crate::output::{self, number};

/// Runs a validated configuration, writing results to `out`. Returns the
/// process exit code.
pub fn execute<W: Write>(config: &RunConfig, out: &mut W) -> Result<i32, Error> {
    match &config.command {
        Command::Simulate(s) => simulate(s, config, out),
        Command::Analytic(a) => analytic(a, out),
        Command::Fit(f) => fit(f, out),
        Command::Verify(v) => verify(v, config, out),
    }
}

fn write_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        message: e.to_string(),
    }
}

fn usage(e: crate::config::UsageError) -> Error {
    Error::Usage(e.to_string())
}

fn simulate<W: Write>(args: &SimulateArgs, config: &RunConfig, out: &mut W) -> Result<i32, Error> {
    let plan = args.plan(config.threads).map_err(usage)?;
    if config.verbose > 0 {
        eprintln!(
            "plan {}: {} reps, checkpoints {:?}",
            plan.hash(),
            plan.reps,
            plan.schedule()
        );
    }
    let report = run_experiment(&plan)?;
    for f in &report.failures {
        eprintln!("trajectory {} failed: {}", f.trajectory, f.message);
    }
    match &args.out {
        Some(path) => output::emit(&report, path)?,
        None => output::write_csv(&report, &mut *out)?,
    }
    Ok(0)
}

fn record<W: Write>(out: &mut W, quantity: &str, element: &str, r: &AnalyticResult) -> Result<(), Error> {
    writeln!(
        out,
        "{quantity},{},{},{},{}",
        csv_field(element),
        number(r.value),
        number(r.error),
        r.method
    )
    .map_err(write_err)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

fn analytic<W: Write>(args: &AnalyticArgs, out: &mut W) -> Result<i32, Error> {
    let req = args.request().map_err(usage)?;
    let label = req.element.as_ref().map(|g| g.to_string()).unwrap_or_default();
    let g = || req.element.as_ref().expect("validated");
    let s = &req.settings;
    match req.quantity {
        Quantity::Green => record(out, "green", &label, &analytic::green(&req.law, g(), s)?)?,
        Quantity::Akernel => {
            record(out, "akernel", &label, &analytic::potential_kernel(&req.law, g(), s)?)?
        }
        Quantity::Taboo2 => {
            let (hj, h0) = analytic::two_point_taboo(&req.law, g(), s)?;
            record(out, "taboo2.j", &label, &hj)?;
            record(out, "taboo2.0", &label, &h0)?;
        }
        Quantity::Gamma => record(out, "gamma", "", &analytic::gamma_constant(&req.law, s)?)?,
        Quantity::Hitconst => {
            let (c, d) = analytic::hitting_constants(&req.law, g(), s)?;
            record(out, "hitconst.c", &label, &c)?;
            record(out, "hitconst.d", &label, &d)?;
        }
    }
    Ok(0)
}

#[derive(Deserialize)]
struct CsvRow {
    n: u64,
    statistic: String,
    element: String,
    mean: f64,
}

/// `(n, mean)` of one statistic from a CSV written by `simulate`.
pub fn read_series(path: &Path, name: &str, element: &str, window: (u64, u64)) -> Result<Vec<(u64, f64)>, Error> {
    let io = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    let mut series = Vec::new();
    for row in reader.deserialize() {
        let row: CsvRow = row.map_err(io)?;
        if row.statistic == name && row.element == element && row.n >= window.0 && row.n <= window.1 {
            series.push((row.n, row.mean));
        }
    }
    series.sort_by_key(|p| p.0);
    if series.is_empty() {
        return Err(Error::Usage(format!(
            "no rows for statistic `{name}` element `{element}` in {}",
            path.display()
        )));
    }
    Ok(series)
}

pub fn fit_file(args: &FitArgs) -> Result<FitResult, Error> {
    let (name, element, window) = args.selection().map_err(usage)?;
    regular_variation_fit(&read_series(&args.input, &name, &element, window)?)
}

fn fit<W: Write>(args: &FitArgs, out: &mut W) -> Result<i32, Error> {
    let f = fit_file(args)?;
    writeln!(
        out,
        "{},{},{},{}",
        number(f.index),
        number(f.uncertainty),
        number(f.intercept),
        number(f.residual)
    )
    .map_err(write_err)?;
    Ok(0)
}

fn verify<W: Write>(args: &VerifyArgs, config: &RunConfig, out: &mut W) -> Result<i32, Error> {
    let tier = match args.tier {
        TierArg::Quick => Tier::Quick,
        TierArg::Full => Tier::Full,
    };
    let mut checks = Vec::new();
    for &(id, _) in acceptance::CRITERIA.iter() {
        let c = acceptance::run(id, tier, config.threads);
        writeln!(out, "{c}").map_err(write_err)?;
        out.flush().map_err(write_err)?;
        checks.push(c);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(out, "{passed}/{} checks passed ({tier} tier)", checks.len()).map_err(write_err)?;
    if let Some(path) = &args.out {
        let mut buf = Vec::new();
        output::write_json(&checks, &mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(if passed == checks.len() { 0 } else { 1 })
}
