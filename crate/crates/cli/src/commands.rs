use std::fs;
use std::io::Write;
use std::path::Path;

use ffnt_core::mathkit::suites::{run_all, SuiteOptions};
use ffnt_core::sim::{compare_variants, metrics, Metrics, Trace, Variant, SETTLE_THRESHOLD};

use crate::config::{Overrides, Resolved, ScenarioConfig};
use crate::svg::{line_plot, Series};
use crate::CliError;

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::invalid(format!("cannot {what} {}: {e}", path.display()))
}

fn resolve(config: Option<&Path>, overrides: &Overrides) -> Result<Resolved, CliError> {
    let mut cfg = ScenarioConfig::load(config)?;
    cfg.apply(overrides);
    cfg.resolve()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err("write", path, e))
}

fn write_trace(dir: &Path, trace: &Trace) -> Result<(), CliError> {
    let path = dir.join("trace.csv");
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf)
        .map_err(|e| io_err("write", &path, e))?;
    write_file(&path, &buf)
}

fn write_plots(dir: &Path, trace: &Trace) -> Result<(), CliError> {
    let t: Vec<f64> = trace.times().collect();
    let per_step =
        |f: &dyn Fn(usize, &ffnt_core::sim::TraceSample) -> f64, name: &str| -> Vec<Series> {
            trace
                .estimator_steps
                .iter()
                .enumerate()
                .map(|(j, step)| {
                    Series::new(
                        format!("{name}_{step}"),
                        trace.samples.iter().map(|s| (s.t, f(j, s))).collect(),
                    )
                })
                .collect()
        };
    let tracking = vec![Series::new(
        "xi_1",
        t.iter()
            .zip(&trace.samples)
            .map(|(t, s)| (*t, s.xi[0]))
            .collect(),
    )];
    let approx = per_step(&|j, s| s.steps[j].e_f, "e_F");
    let switch = per_step(&|j, s| s.steps[j].w, "w");
    for (file, title, series) in [
        (
            "tracking.svg",
            "tracking error xi_1 = eta_1 - y_d",
            tracking,
        ),
        (
            "approx.svg",
            "approximation error F_i - w_i * estimate",
            approx,
        ),
        ("switch.svg", "switching signal w_i", switch),
    ] {
        write_file(
            &dir.join(file),
            line_plot(title, "t [s]", &series).as_bytes(),
        )?;
    }
    Ok(())
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6e}")
    }
}

fn describe(label: &str, m: &Metrics) -> String {
    format!(
        "{label}: rms_tracking={} rms_approx_error={} max_abs_state={} switch_duty={} settle_time={}",
        fmt_metric(m.rms_tracking),
        fmt_metric(m.rms_approx_error),
        fmt_metric(m.max_abs_state),
        fmt_metric(m.switch_duty),
        fmt_metric(m.settle_time)
    )
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

/// Simulates one variant and writes `trace.csv` plus, unless disabled,
/// `tracking.svg`, `approx.svg` and `switch.svg`. On divergence the samples
/// logged before the abort are still written.
pub fn cmd_run(
    config: Option<&Path>,
    overrides: &Overrides,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let r = resolve(config, overrides)?;
    fs::create_dir_all(&r.out_dir).map_err(|e| io_err("create", &r.out_dir, e))?;
    let trace = match r.setup.run(r.variant, &r.run) {
        Ok(t) => t,
        Err(ffnt_core::Error::Diverged {
            t,
            quantity,
            limit,
            trace,
        }) => {
            write_trace(&r.out_dir, &trace)?;
            return Err(CliError::diverged(format!(
                "run aborted at t = {t}: |{quantity}| exceeded {limit:e}; {} samples written to {}",
                trace.len(),
                r.out_dir.join("trace.csv").display()
            )));
        }
        Err(e) => return Err(CliError::from_core(e)),
    };
    write_trace(&r.out_dir, &trace)?;
    if r.plots {
        write_plots(&r.out_dir, &trace)?;
    }
    let whole =
        metrics(&trace, (0.0, r.run.t_final), SETTLE_THRESHOLD).map_err(CliError::from_core)?;
    let steady = metrics(&trace, r.steady_window, SETTLE_THRESHOLD).map_err(CliError::from_core)?;
    say(
        out,
        format!(
            "variant {} on {}: {} samples",
            r.variant,
            r.setup.scenario.model.name,
            trace.len()
        ),
    );
    say(out, describe(&format!("[0, {}]", r.run.t_final), &whole));
    say(
        out,
        describe(
            &format!("[{}, {}]", r.steady_window.0, r.steady_window.1),
            &steady,
        ),
    );
    say(out, format!("wrote {}", r.out_dir.display()));
    Ok(())
}

/// Runs every requested variant (all three when `variants` is empty) and
/// writes `comparison.csv` and `comparison.txt`.
///
/// Columns: rms_tracking and settle_time over the whole run,
/// rms_approx_error and switch_duty over the steady window.
pub fn cmd_compare(
    config: Option<&Path>,
    overrides: &Overrides,
    variants: &[String],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let variants: Vec<Variant> = if variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        variants
            .iter()
            .map(|v| v.parse().map_err(CliError::from_core))
            .collect::<Result<_, _>>()?
    };
    if variants.len() < 2 {
        return Err(CliError::invalid(format!(
            "variant: comparison needs at least 2 variants, got {}",
            variants.len()
        )));
    }
    let r = resolve(config, overrides)?;
    for v in &variants {
        r.setup.controller(*v).map_err(CliError::from_core)?;
    }
    fs::create_dir_all(&r.out_dir).map_err(|e| io_err("create", &r.out_dir, e))?;
    let rows = compare_variants(&r.setup, &variants, &r.run, Some(r.steady_window))
        .map_err(CliError::from_core)?;

    let (lo, hi) = r.steady_window;
    let header = [
        "variant".to_string(),
        "status".into(),
        "rms_tracking".into(),
        format!("rms_approx_error[{lo},{hi}]"),
        "settle_time".into(),
        format!("switch_duty[{lo},{hi}]"),
    ];
    let mut table: Vec<[String; 6]> = Vec::new();
    let mut failures = Vec::new();
    for row in &rows {
        let cells = match &row.outcome {
            Ok(o) => [
                row.variant.tag().to_string(),
                "ok".into(),
                fmt_metric(o.whole.rms_tracking),
                fmt_metric(o.steady.rms_approx_error),
                fmt_metric(o.whole.settle_time),
                fmt_metric(o.steady.switch_duty),
            ],
            Err(e) => {
                failures.push(format!("{}: {e}", row.variant));
                let na = || "nan".to_string();
                [
                    row.variant.tag().to_string(),
                    "failed".into(),
                    na(),
                    na(),
                    na(),
                    na(),
                ]
            }
        };
        table.push(cells);
    }

    let csv_path = r.out_dir.join("comparison.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header)
        .map_err(|e| io_err("write", &csv_path, e))?;
    for cells in &table {
        w.write_record(cells)
            .map_err(|e| io_err("write", &csv_path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err("write", &csv_path, e))?;
    write_file(&csv_path, &bytes)?;

    let widths: Vec<usize> = (0..6)
        .map(|c| {
            table
                .iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let render = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut text = render(&header) + "\n";
    for cells in &table {
        text += &render(cells);
        text.push('\n');
    }
    write_file(&r.out_dir.join("comparison.txt"), text.as_bytes())?;
    let _ = out.write_all(text.as_bytes());

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::diverged(failures.join("; ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    /// Absolute slack of the inequality suites.
    pub tolerance: f64,
    /// Relative-error threshold of the gradient check.
    pub grad_tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        let d = SuiteOptions::default();
        Self {
            samples: d.samples,
            tolerance: d.slack,
            grad_tolerance: d.grad_rel_tol,
        }
    }
}

/// Runs the inequality suites and the network gradient check, one report
/// line per suite.
pub fn cmd_verify(opts: &VerifyOptions, out: &mut dyn Write) -> Result<(), CliError> {
    if opts.samples == 0 {
        return Err(CliError::invalid("samples: must be >= 1"));
    }
    for (name, v) in [
        ("tolerance", opts.tolerance),
        ("grad-tolerance", opts.grad_tolerance),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::invalid(format!(
                "{name}: must be a finite value >= 0, got {v}"
            )));
        }
    }
    let suite = SuiteOptions {
        samples: opts.samples,
        slack: opts.tolerance,
        grad_rel_tol: opts.grad_tolerance,
        ..SuiteOptions::default()
    };
    let reports = run_all(&suite);
    for r in &reports {
        say(out, r.to_string());
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::verify(format!(
            "failed suites: {}",
            failed.join(", ")
        )))
    }
}
