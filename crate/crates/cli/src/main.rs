//! Command-line front end: `list`, `verify`, `scan`, `profile`, `report`.
//!
//! Exit codes: 0 when every gated check passes, 1 when a gate fails,
//! 2 on usage or config errors, 3 when the pipeline itself fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hopfluid::error::Error;
use hopfluid::profile::{
    profile_samples, solve_coupled_h, solve_profile, ProfileProblem, ScaledMetric, DEFAULT_GRID,
};
use hopfluid::runner::{
    configure_threads, list_cases, parse_params, parse_range, potential_from_name, profile_csv,
    resolve_case, run_scan, run_verify, scan_csv, to_json, write_report, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "hopfluid",
    version,
    about = "Verify energies, criticality and dual Euler flows of Hopf-type maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in cases.
    List {
        /// `manifold=S3`, `manifold=R2xS1` or `name=<substring>`.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the verification pipeline of a built-in case or a TOML case file.
    Verify {
        /// Built-in name or path to a case file.
        case: String,
        /// Case parameters, e.g. `--param k=2 --param l=1` or `--param k=2,l=1`.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include wall-clock timing in the report.
        #[arg(long)]
        timing: bool,
        /// Print the resolved case config as TOML and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Energy, charge and scaling ratio over a parameter range, as CSV.
    Scan {
        /// s3_harmonic_k, s3_squashed_kl, s3_conformal_kl, s3_oldbaby_profile or derrick.
        family: String,
        /// `k=1..8`, `k=1,2,4` or `lambda=0.5..2:0.25`.
        #[arg(long = "param")]
        param: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a profile and print `(s, alpha, alpha')` as CSV.
    Profile {
        family: ProfileFamily,
        #[arg(long, default_value_t = 2)]
        k: i32,
        #[arg(long, default_value_t = 1)]
        l: i32,
        /// new_baby, old_baby, quartic_sixteenth, charge_dependent or zero.
        #[arg(long, default_value = "new_baby")]
        potential: String,
        #[arg(long, default_value_t = 257)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the report suite and write JSON and CSV files into a directory.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileFamily {
    #[value(name = "s3_squashed_kl")]
    Squashed,
    #[value(name = "s3_conformal_kl")]
    Conformal,
    #[value(name = "s3_oldbaby_profile")]
    OldBaby,
}

enum Outcome {
    Pass,
    Fail,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    configure_threads()?;
    match cli.command {
        Command::List { filter, json } => {
            let cases = list_cases(filter.as_deref())?;
            if json {
                print!("{}", to_json(&cases)?);
            } else {
                for c in cases {
                    let params = if c.parameters.is_empty() {
                        String::new()
                    } else {
                        format!(" [{}]", c.parameters.join(", "))
                    };
                    println!(
                        "{:<20} {:<6} {}{}",
                        c.name, c.manifold, c.description, params
                    );
                }
            }
            Ok(Outcome::Pass)
        }
        Command::Verify {
            case,
            params,
            out,
            timing,
            dump_config,
        } => {
            let cfg = resolve_case(&case, &parse_params(&params)?)?;
            if dump_config {
                print!("{}", cfg.to_toml()?);
                return Ok(Outcome::Pass);
            }
            let report = run_verify(&cfg, RunOptions { timing })?;
            emit(&to_json(&report)?, out.as_ref())?;
            for g in report.gates.iter().filter(|g| !g.passed) {
                eprintln!("gate {} failed: {:e} > {:e}", g.name, g.value, g.tolerance);
            }
            Ok(if report.pass {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
        Command::Scan { family, param, out } => {
            let (_, values) = parse_range(&param)?;
            let scan = run_scan(&family, &values)?;
            emit(&scan_csv(&scan)?, out.as_ref())?;
            Ok(if scan.rows.iter().all(|r| r.status == "ok") {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
        Command::Profile {
            family,
            k,
            l,
            potential,
            points,
            out,
        } => {
            let profile = match family {
                ProfileFamily::OldBaby => {
                    if potential != "old_baby" && potential != "new_baby" {
                        return Err(Error::Config(
                            "s3_oldbaby_profile is defined for the old baby potential".into(),
                        ));
                    }
                    solve_coupled_h(k)?.alpha
                }
                ProfileFamily::Squashed | ProfileFamily::Conformal => {
                    let metric = match family {
                        ProfileFamily::Squashed => ScaledMetric::Squashed,
                        _ => ScaledMetric::Conformal,
                    };
                    let mut problem = ProfileProblem::new_baby(metric, k, l);
                    problem.potential = potential_from_name(&potential, k)?;
                    let sol = solve_profile(&problem, DEFAULT_GRID)?;
                    eprintln!("a = {:.17e}", sol.a);
                    sol.profile
                }
            };
            emit(
                &profile_csv(&profile_samples(&profile, points.max(2)))?,
                out.as_ref(),
            )?;
            Ok(Outcome::Pass)
        }
        Command::Report { out, timing } => {
            let summary = write_report(&out, RunOptions { timing })?;
            for c in &summary.cases {
                let status = if c.pass { "PASS" } else { "FAIL" };
                match &c.error {
                    Some(e) => println!("{status} {} ({e})", c.case),
                    None => println!("{status} {}", c.case),
                }
            }
            Ok(if summary.pass {
                Outcome::Pass
            } else {
                Outcome::Fail
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
