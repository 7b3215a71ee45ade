//! Command-line front end: configured experiment runs, named verification
//! suites, refinement sweeps, and report format conversion. Exit code 0
//! means every asserted check passed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sheat::harness::{
    self, convergence_study, emit_report, read_report, run_lemma_suite, run_main_estimate,
    ExperimentConfig, SuiteReport, SUITE_NAMES,
};
use sheat::{Error, Result};

#[derive(Parser)]
#[command(name = "sheat", version, about = "numerical laboratory for the stochastic heat equation on planar polygons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write report.json (+ report.csv)
    Run {
        /// JSON experiment configuration
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's `output`, then ".")
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one named lemma-verification suite, or `all`
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Rerun the configured experiment across refinement levels and write
    /// sweep.csv
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated NxM levels, e.g. "64x128,128x256"
        #[arg(long)]
        levels: String,
    },
    /// Re-emit a stored report.json in another format
    Report {
        /// Directory holding report.json
        #[arg(long = "in")]
        input: PathBuf,
        /// Target format: csv or json
        #[arg(long)]
        format: String,
    },
}

fn parse_levels(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut levels = Vec::new();
    for part in text.split(',') {
        let mut it = part.trim().split('x');
        let (a, b) = (it.next(), it.next());
        match (a, b, it.next()) {
            (Some(n), Some(m), None) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad level '{part}': N not an integer")))?;
                let m: usize = m
                    .parse()
                    .map_err(|_| Error::Config(format!("bad level '{part}': M not an integer")))?;
                levels.push((n, m));
            }
            _ => {
                return Err(Error::Config(format!(
                    "bad level '{part}': expected NxM like 64x128"
                )))
            }
        }
    }
    Ok(levels)
}

fn print_suite(report: &SuiteReport) {
    for check in &report.checks {
        println!(
            "[{}] {:<36} lhs {:>12.5e}  rhs {:>12.5e}  {}",
            report.suite,
            check.lemma,
            check.lhs,
            check.rhs,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    println!(
        "[{}] {}",
        report.suite,
        if report.pass { "suite passed" } else { "SUITE FAILED" }
    );
}

fn out_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let config = ExperimentConfig::from_path(&config)?;
            let report = run_main_estimate(&config)?;
            let dir = out_dir(&config, out);
            emit_report(&report, &dir, true)?;
            match report.c_meas {
                Some(c) => println!(
                    "{} mode, {} samples: lhs {:.6e}, rhs {:.6e}, c_meas {:.6}",
                    report.mode,
                    report.samples.len(),
                    report.lhs,
                    report.rhs,
                    c
                ),
                None => println!(
                    "{} mode, {} samples: both sides zero — estimate trivially satisfied",
                    report.mode,
                    report.samples.len()
                ),
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(report.c_meas.map_or(report.trivially_satisfied, f64::is_finite))
        }
        Command::Verify { suite } => {
            let names: Vec<&str> = if suite == "all" {
                SUITE_NAMES.to_vec()
            } else {
                vec![suite.as_str()]
            };
            let mut all_pass = true;
            for name in names {
                let report = run_lemma_suite(name)?;
                print_suite(&report);
                all_pass &= report.pass;
            }
            Ok(all_pass)
        }
        Command::Sweep { config, levels } => {
            let config = ExperimentConfig::from_path(&config)?;
            let levels = parse_levels(&levels)?;
            let study = convergence_study(&config, &levels)?;
            let dir = out_dir(&config, None);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("sweep.csv");
            std::fs::write(&path, harness::study_to_csv(&study))?;
            for (i, row) in study.levels.iter().enumerate() {
                println!(
                    "level ({}, {}): c_meas {}  eigen {:.3e}  duhamel {:.3e}  mass {:.3e}{}",
                    row.n,
                    row.m,
                    row.c_meas.map_or("-".into(), |c| format!("{c:.5}")),
                    row.eigen_error,
                    row.duhamel_error,
                    row.kernel_mass_defect,
                    if i > 0 {
                        format!(
                            "  orders: eigen {:.2}, duhamel {:.2}",
                            study.eigen_orders[i - 1],
                            study.duhamel_orders[i - 1]
                        )
                    } else {
                        String::new()
                    }
                );
            }
            println!("sweep written to {}", path.display());
            Ok(true)
        }
        Command::Report { input, format } => {
            let report = read_report(&input.join("report.json"))?;
            match format.as_str() {
                "csv" => {
                    let path = input.join("report.csv");
                    std::fs::write(&path, harness::report_to_csv(&report))?;
                    println!("csv written to {}", path.display());
                }
                "json" => {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown format '{other}' (available: csv, json)"
                    )))
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn level_strings_parse() {
        assert_eq!(parse_levels("64x128,128x256").unwrap(), vec![(64, 128), (128, 256)]);
        assert_eq!(parse_levels(" 32x16 ").unwrap(), vec![(32, 16)]);
        assert!(parse_levels("64").is_err());
        assert!(parse_levels("64x128x2").is_err());
        assert!(parse_levels("axb").is_err());
    }

    #[test]
    fn out_dir_prefers_the_flag() {
        let mut config = ExperimentConfig::from_json_str(
            r#"{
                "domain": {"preset": "unit_square"},
                "grid": {"n": 32, "l": 2.0},
                "time": {"m": 8, "t": 0.5},
                "exponents": {"p": 2.0, "k": 0.75},
                "ensemble": {"base_seed": 1, "count": 1}
            }"#,
        )
        .unwrap();
        assert_eq!(out_dir(&config, None), Path::new("."));
        config.output = Some("runs/a".into());
        assert_eq!(out_dir(&config, None), Path::new("runs/a"));
        assert_eq!(out_dir(&config, Some("else".into())), Path::new("else"));
    }
}
