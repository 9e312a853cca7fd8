//! Command-line front end for the max/minPPS solver.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 on internal-invariant
//! panics; errors print one machine-parsable line on stderr.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ppsolve::bmdp::{bmdp_to_system, parse_bmdp};
use ppsolve::bssg;
use ppsolve::gnm::{self, SolveOptions};
use ppsolve::parse::{canonicalize, parse_system, parse_system_with_options, to_text};
use ppsolve::policy::{epsilon_policy_max_with, epsilon_policy_min_with, EpsilonPolicyReport};
use ppsolve::qualitative;
use ppsolve::rational::{
    ceil_log2, certified_digits, decimal_string, fraction_string, parse_rational, Rational,
};
use ppsolve::snf::to_snf;
use ppsolve::system::{ChoiceOp, EquationSystem, Flavor, Policy};
use ppsolve::Error;

#[derive(Parser)]
#[command(
    name = "ppsolve",
    version,
    about = "Exact least-fixed-point solver for probabilistic max/min polynomial systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Human,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Objective {
    #[default]
    Max,
    Min,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate the least fixed point to within 2^-j.
    Solve {
        /// Precision exponent (guarantee ‖q* - v‖∞ ≤ 2^-j).
        #[arg(long, default_value_t = 20)]
        j: u64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Also print the exact rational iterate.
        #[arg(long)]
        exact: bool,
        /// Use the LP operator even on pure PPS (differential testing).
        #[arg(long)]
        differential_lp: bool,
        input: PathBuf,
    },
    /// Report which variables have q*_i = 0 or 1 and the reduced system.
    Qualitative {
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        input: PathBuf,
    },
    /// Extract an ε-optimal pure policy.
    Policy {
        /// Additive optimality gap, e.g. 1/1024 or 0.001.
        #[arg(long)]
        epsilon: String,
        /// Override the sound default precision exponent (certificate is
        /// downgraded to heuristic).
        #[arg(long)]
        override_precision: Option<u64>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        input: PathBuf,
    },
    /// Exhaustively solve a max-min system by guess-and-check.
    Bssg {
        #[arg(long)]
        epsilon: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        input: PathBuf,
    },
    /// Convert a BMDP file into equation text.
    Convert {
        /// Whether the controller maximizes or minimizes extinction.
        #[arg(long, value_enum, default_value_t)]
        objective: Objective,
        input: PathBuf,
    },
    /// Emit the simple-normal-form system.
    Normalize { input: PathBuf },
}

fn read_input(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn policy_json(sys: &EquationSystem, policy: &Policy) -> serde_json::Value {
    let map: BTreeMap<&str, &str> = policy
        .choices
        .iter()
        .map(|(&i, &c)| (sys.name(i), sys.name(c)))
        .collect();
    json!(map)
}

fn values_json(sys: &EquationSystem, values: &[Rational], digits: usize) -> serde_json::Value {
    let map: BTreeMap<&str, String> = sys
        .var_names()
        .iter()
        .zip(values)
        .map(|(name, v)| (name.as_str(), decimal_string(v, digits)))
        .collect();
    json!(map)
}

fn run_solve(
    input: PathBuf,
    j: u64,
    format: Format,
    exact: bool,
    differential_lp: bool,
) -> Result<(), Error> {
    if j < 1 {
        return Err(Error::Invalid("j must be at least 1".into()));
    }
    let sys = parse_system(&read_input(&input)?)?;
    let opts = SolveOptions { force_lp: differential_lp };
    let report = gnm::solve_with(&sys, j, opts)?;
    let digits = certified_digits(j);
    match format {
        Format::Human => {
            for (name, v) in sys.var_names().iter().zip(&report.approximation) {
                let mut line = format!("{name} ≈ {}", decimal_string(v, digits));
                if exact {
                    line.push_str(&format!(" = {}", fraction_string(v)));
                }
                println!("{line}");
            }
            println!(
                "# certified |error| <= 2^-{j}; h = {} iterations; reduced |P| = {}",
                report.h, report.reduced_size
            );
        }
        Format::Json => {
            let mut doc = json!({
                "j": report.j,
                "h": report.h,
                "reduced_size": report.reduced_size,
                "operator_steps": report.operator_steps,
                "variables": values_json(&sys, &report.approximation, digits),
            });
            if exact {
                let exact_map: BTreeMap<&str, String> = sys
                    .var_names()
                    .iter()
                    .zip(&report.approximation)
                    .map(|(n, v)| (n.as_str(), fraction_string(v)))
                    .collect();
                doc["exact"] = json!(exact_map);
            }
            println!("{doc}");
        }
    }
    Ok(())
}

fn run_qualitative(input: PathBuf, format: Format) -> Result<(), Error> {
    let sys = parse_system(&read_input(&input)?)?;
    let (snf, _) = to_snf(&sys);
    let report = qualitative::reduce(&snf)?;
    let names = |set: &std::collections::BTreeSet<usize>| -> Vec<&str> {
        set.iter().map(|&i| snf.name(i)).collect()
    };
    let reduced_text = to_text(&canonicalize(&report.reduced));
    match format {
        Format::Human => {
            println!("zero: {}", names(&report.zero_set).join(", "));
            println!("one:  {}", names(&report.one_set).join(", "));
            println!("reduced system ({} variables):", report.reduced.n());
            print!("{reduced_text}");
        }
        Format::Json => {
            let doc = json!({
                "zero": names(&report.zero_set),
                "one": names(&report.one_set),
                "reduced": reduced_text,
            });
            println!("{doc}");
        }
    }
    Ok(())
}

fn run_policy(
    input: PathBuf,
    epsilon: &str,
    override_precision: Option<u64>,
    format: Format,
) -> Result<(), Error> {
    let eps = parse_rational(epsilon).map_err(Error::Invalid)?;
    let sys = parse_system(&read_input(&input)?)?;
    let (snf, _) = to_snf(&sys);
    let report: EpsilonPolicyReport = match snf.flavor() {
        Flavor::Max => epsilon_policy_max_with(&snf, &eps, override_precision)?,
        Flavor::Min | Flavor::Pps => epsilon_policy_min_with(&snf, &eps, override_precision)?,
        Flavor::MaxMin => return Err(Error::UnsupportedFlavor(Flavor::MaxMin.name())),
    };
    let digits = certified_digits(ceil_log2(&eps.recip()) + 4);
    match format {
        Format::Human => {
            if report.policy.is_empty() {
                println!("policy: (no max/min equations)");
            }
            for (&i, &c) in &report.policy.choices {
                println!("{} -> {}", snf.name(i), snf.name(c));
            }
            for (name, v) in snf.var_names().iter().zip(&report.value_under_policy) {
                println!("value {name} ≈ {}", decimal_string(v, digits));
            }
            println!(
                "# epsilon = {}; certificate j = {}{}; repair switches = {}",
                fraction_string(&report.epsilon),
                report.certificate_j,
                if report.heuristic { " (heuristic override)" } else { "" },
                report.repair_switches
            );
        }
        Format::Json => {
            let doc = json!({
                "policy": policy_json(&snf, &report.policy),
                "epsilon": fraction_string(&report.epsilon),
                "value": values_json(&snf, &report.value_under_policy, digits),
                "certificate": {
                    "j": report.certificate_j,
                    "heuristic": report.heuristic,
                    "repair_switches": report.repair_switches,
                },
            });
            println!("{doc}");
        }
    }
    Ok(())
}

fn run_bssg(input: PathBuf, epsilon: &str, format: Format) -> Result<(), Error> {
    let eps = parse_rational(epsilon).map_err(Error::Invalid)?;
    let sys = parse_system_with_options(&read_input(&input)?, true)?;
    let (snf, _) = to_snf(&sys);
    let (value, sigma, tau) = bssg::solve_exhaustive(&snf, &eps)?;
    let digits = certified_digits(ceil_log2(&eps.recip()));
    let routes = |p: &Policy| -> Vec<String> {
        p.choices
            .iter()
            .map(|(&i, &c)| format!("{} -> {}", snf.name(i), snf.name(c)))
            .collect()
    };
    match format {
        Format::Human => {
            println!("max policy: {}", routes(&sigma).join(", "));
            println!("min policy: {}", routes(&tau).join(", "));
            for (name, v) in snf.var_names().iter().zip(&value) {
                println!("value {name} ≈ {}", decimal_string(v, digits));
            }
            println!("# accepted certificate at epsilon = {}", fraction_string(&eps));
        }
        Format::Json => {
            let doc = json!({
                "epsilon": fraction_string(&eps),
                "sigma": policy_json(&snf, &sigma),
                "tau": policy_json(&snf, &tau),
                "value": values_json(&snf, &value, digits),
            });
            println!("{doc}");
        }
    }
    Ok(())
}

fn run_convert(input: PathBuf, objective: Objective) -> Result<(), Error> {
    let bmdp = parse_bmdp(&read_input(&input)?)?;
    let op = match objective {
        Objective::Max => ChoiceOp::Max,
        Objective::Min => ChoiceOp::Min,
    };
    let sys = bmdp_to_system(&bmdp, op)?;
    print!("{}", to_text(&sys));
    Ok(())
}

fn run_normalize(input: PathBuf) -> Result<(), Error> {
    let sys = parse_system_with_options(&read_input(&input)?, true)?;
    let (snf, _) = to_snf(&sys);
    print!("{}", to_text(&snf));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve { j, format, exact, differential_lp, input } => {
            run_solve(input, j, format, exact, differential_lp)
        }
        Command::Qualitative { format, input } => run_qualitative(input, format),
        Command::Policy { epsilon, override_precision, format, input } => {
            run_policy(input, &epsilon, override_precision, format)
        }
        Command::Bssg { epsilon, format, input } => run_bssg(input, &epsilon, format),
        Command::Convert { objective, input } => run_convert(input, objective),
        Command::Normalize { input } => run_normalize(input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(move || dispatch(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            eprintln!("panic: {msg}");
            ExitCode::from(2)
        }
    }
}
