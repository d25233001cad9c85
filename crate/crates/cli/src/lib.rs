//! Command-line front end: causality audits, interferometer simulations,
//! Bell-bound reports, and common-cause model fits.

pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bellaudit::bell::{
    chained_expression_capped, chsh, critical_visibility, quantum_chained_value, DEFAULT_ENUM_CAP,
};
use bellaudit::correlations::CorrelationTable;
use bellaudit::franson::postselect::DEFAULT_PAIR_CAP;
use bellaudit::franson::{
    fringe_from_summary, search_postselected_bound_capped, write_fringe_csv, PathStrategy,
    StrategyClass,
};
use bellaudit::lhv::{
    build_single_setting_model, local_polytope_membership_capped, InfeasibilityCertificate,
    LocalModel, Membership, DEFAULT_STRATEGY_CAP,
};
use bellaudit::spacetime::{audit_experiment, AuditReport, FindingCode};
use bellaudit::{Error, Result};
use config::ToolConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNEXPECTED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FINDINGS: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bellaudit",
    version,
    about = "Audit the causal structure of two-station correlation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify event-pair intervals and report Bell-test preconditions
    Audit {
        /// Configuration file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Also write the report here (default: the config's output.audit_json)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the interferometer run; write a fringe CSV and a summary JSON
    Simulate {
        /// Configuration file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Fringe CSV path (default: the config's output.fringe_csv)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Summary JSON path (default: the config's output.summary_json)
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: BELLAUDIT_WORKERS, then the CPU count)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Report local bound, quantum value, and critical visibility
    Bounds {
        /// Chained inequality with N settings per side
        #[arg(long, value_name = "N", conflicts_with = "chsh")]
        chained: Option<usize>,
        /// The 2x2 CHSH inequality
        #[arg(long)]
        chsh: bool,
        /// Also search the postselected bound for this strategy class
        #[arg(long, value_enum, value_name = "CLASS")]
        postselected: Option<PostselectedClass>,
        /// Refinement restarts for the postselected search
        #[arg(long, default_value_t = 200)]
        budget: u64,
        /// Also write the report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a common-cause model to a correlation-table file
    LhvFit {
        /// Correlation table (JSON)
        #[arg(long)]
        table: PathBuf,
        /// Also write the result here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Strategy class for the postselected-bound search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PostselectedClass {
    /// Interferometer paths may depend on the local setting
    SettingDependent,
    /// Paths are fixed per run, independent of the settings
    FixedPath,
}

impl From<PostselectedClass> for StrategyClass {
    fn from(class: PostselectedClass) -> Self {
        match class {
            PostselectedClass::SettingDependent => StrategyClass::SettingDependentPath,
            PostselectedClass::FixedPath => StrategyClass::FixedPath,
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Audit { config, out } => cmd_audit(&config, out.as_deref()),
        Command::Simulate {
            config,
            csv,
            summary,
            seed,
            workers,
        } => cmd_simulate(&config, csv.as_deref(), summary.as_deref(), seed, workers),
        Command::Bounds {
            chained,
            chsh,
            postselected,
            budget,
            out,
        } => cmd_bounds(chained, chsh, postselected, budget, out.as_deref()),
        Command::LhvFit { table, out } => cmd_lhv_fit(&table, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::TooLarge(_) => EXIT_CAP,
        _ => EXIT_UNEXPECTED,
    }
}

/// Audit report as emitted: the master seed plus the report fields.
#[derive(Debug, Serialize)]
pub struct AuditOutput {
    pub seed: u64,
    #[serde(flatten)]
    pub report: AuditReport,
}

fn cmd_audit(config_path: &Path, out: Option<&Path>) -> Result<i32> {
    let config = ToolConfig::load(config_path)?;
    let experiment = config.experiment()?;
    let schedule = experiment.schedule()?;
    let mut report = audit_experiment(&schedule)?;
    if experiment.inherent_postselection {
        report.add_finding(
            FindingCode::PostselectionPresentChshInvalid,
            "config declares coincidence postselection; standard two-setting Bell bounds \
             do not apply to a kept subensemble that can depend on the local settings",
        );
    }
    let output = AuditOutput {
        seed: config.seed,
        report,
    };
    let text = to_pretty_json(&output)?;
    println!("{text}");
    let destination = out
        .map(PathBuf::from)
        .or_else(|| config.output().audit_json);
    if let Some(path) = destination {
        std::fs::write(&path, text + "\n")?;
        eprintln!("audit report written to {}", path.display());
    }
    Ok(if output.report.has(FindingCode::Ok) {
        EXIT_OK
    } else {
        EXIT_FINDINGS
    })
}

fn cmd_simulate(
    config_path: &Path,
    csv: Option<&Path>,
    summary_path: Option<&Path>,
    seed_override: Option<u64>,
    workers_flag: Option<usize>,
) -> Result<i32> {
    let config = ToolConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(config.seed);
    let franson = config.franson()?.to_franson_config(seed)?;
    let workers = resolve_workers(workers_flag)?;
    let summary = bellaudit::franson::simulate_run(&franson, workers)?;

    if franson.phases_b.len() == 1 {
        let points = fringe_from_summary(&summary);
        let mut buffer = Vec::new();
        write_fringe_csv(&points, &mut buffer)?;
        let csv_path = csv
            .map(PathBuf::from)
            .or_else(|| config.output().fringe_csv)
            .unwrap_or_else(|| PathBuf::from("fringe.csv"));
        std::fs::write(&csv_path, &buffer)?;
        println!("fringe csv: {}", csv_path.display());
    } else if csv.is_some() {
        return Err(Error::Config(format!(
            "--csv needs a single fixed phase on side B, got {}",
            franson.phases_b.len()
        )));
    }

    let summary_file = summary_path
        .map(PathBuf::from)
        .or_else(|| config.output().summary_json)
        .unwrap_or_else(|| PathBuf::from("summary.json"));
    std::fs::write(&summary_file, to_pretty_json(&summary)? + "\n")?;
    println!("summary json: {}", summary_file.display());
    println!(
        "kept {} of {} pairs (fraction {:.6}), seed {}",
        summary.kept_pairs, summary.total_pairs, summary.kept_fraction, seed
    );
    Ok(EXIT_OK)
}

/// Bound report as emitted.
#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub expression: String,
    pub settings_per_side: usize,
    pub local_bound: f64,
    pub quantum_value: f64,
    pub critical_visibility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postselected: Option<PostselectedSection>,
}

/// Postselected-bound search result as emitted.
#[derive(Debug, Serialize)]
pub struct PostselectedSection {
    pub class: StrategyClass,
    pub bound: f64,
    pub witness: Vec<WitnessComponent>,
}

#[derive(Debug, Serialize)]
pub struct WitnessComponent {
    pub weight: f64,
    pub strategy: PathStrategy,
}

fn cmd_bounds(
    chained: Option<usize>,
    use_chsh: bool,
    postselected: Option<PostselectedClass>,
    budget: u64,
    out: Option<&Path>,
) -> Result<i32> {
    let (expression, name) = match (chained, use_chsh) {
        (Some(n), false) => {
            let expr =
                chained_expression_capped(n, enum_cap(DEFAULT_ENUM_CAP)?).map_err(|e| match e {
                    Error::TooLarge(_) => e,
                    other => Error::Config(format!("--chained {n}: {other}")),
                })?;
            (expr, format!("chained-{n}"))
        }
        (None, true) => (chsh(), "chsh".to_string()),
        _ => {
            return Err(Error::Config(
                "choose exactly one of --chained N or --chsh".into(),
            ))
        }
    };
    let n = expression.settings_a();
    let postselected = match postselected {
        Some(class) => {
            let outcome = search_postselected_bound_capped(
                &expression,
                class.into(),
                budget,
                enum_cap(DEFAULT_PAIR_CAP)?,
            )?;
            Some(PostselectedSection {
                class: class.into(),
                bound: outcome.value,
                witness: outcome
                    .witness
                    .into_iter()
                    .map(|(weight, strategy)| WitnessComponent { weight, strategy })
                    .collect(),
            })
        }
        None => None,
    };
    let report = BoundsReport {
        expression: name,
        settings_per_side: n,
        local_bound: expression.declared_local_bound,
        quantum_value: quantum_chained_value(n)?,
        critical_visibility: critical_visibility(n)?,
        postselected,
    };
    let text = to_pretty_json(&report)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text + "\n")?;
    }
    Ok(EXIT_OK)
}

/// Model-fit result as emitted: either a common-cause model (with its
/// re-prediction error against the input table) or a separating certificate.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub result: &'static str,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<LocalModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reprediction_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<InfeasibilityCertificate>,
}

fn cmd_lhv_fit(table_path: &Path, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(table_path)
        .map_err(|e| Error::Config(format!("{}: {e}", table_path.display())))?;
    let table = CorrelationTable::from_json(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", table_path.display())))?;

    let report = if table.settings_a() == 1 || table.settings_b() == 1 {
        let model = build_single_setting_model(&table)?;
        let predicted = model.predict(table.outcomes_a(), table.outcomes_b())?;
        FitReport {
            result: "model",
            method: "single_setting_construction",
            reprediction_error: Some(predicted.max_abs_difference(&table)?),
            model: Some(model),
            certificate: None,
        }
    } else {
        match local_polytope_membership_capped(&table, enum_cap(DEFAULT_STRATEGY_CAP)?)? {
            Membership::Feasible(model) => {
                let predicted = model.predict(table.outcomes_a(), table.outcomes_b())?;
                FitReport {
                    result: "model",
                    method: "lp_membership",
                    reprediction_error: Some(predicted.max_abs_difference(&table)?),
                    model: Some(model),
                    certificate: None,
                }
            }
            Membership::Infeasible(certificate) => FitReport {
                result: "infeasible",
                method: "lp_membership",
                model: None,
                reprediction_error: None,
                certificate: Some(certificate),
            },
        }
    };
    let text = to_pretty_json(&report)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text + "\n")?;
    }
    Ok(EXIT_OK)
}

/// Worker-count resolution: flag, then BELLAUDIT_WORKERS, then the CPU count.
fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let workers = match flag {
        Some(w) => w,
        None => match std::env::var("BELLAUDIT_WORKERS") {
            Ok(value) => value.parse().map_err(|_| {
                Error::Config(format!("BELLAUDIT_WORKERS={value:?} is not a worker count"))
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    Ok(workers)
}

/// Enumeration-cap resolution: BELLAUDIT_ENUM_CAP overrides the default.
fn enum_cap(default: u64) -> Result<u64> {
    match std::env::var("BELLAUDIT_ENUM_CAP") {
        Ok(value) => value
            .parse()
            .map_err(|_| Error::Config(format!("BELLAUDIT_ENUM_CAP={value:?} is not a cap value"))),
        Err(_) => Ok(default),
    }
}

fn to_pretty_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_the_documented_subcommands() {
        let cli = Cli::try_parse_from([
            "bellaudit",
            "bounds",
            "--chained",
            "3",
            "--postselected",
            "setting-dependent",
        ])
        .unwrap();
        match cli.command {
            Command::Bounds {
                chained,
                chsh,
                postselected,
                ..
            } => {
                assert_eq!(chained, Some(3));
                assert!(!chsh);
                assert_eq!(postselected, Some(PostselectedClass::SettingDependent));
            }
            other => panic!("parsed the wrong command: {other:?}"),
        }
    }

    #[test]
    fn chained_and_chsh_flags_conflict() {
        assert!(Cli::try_parse_from(["bellaudit", "bounds", "--chained", "3", "--chsh"]).is_err());
    }

    #[test]
    fn exit_codes_map_the_documented_error_classes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::TooLarge("x".into())), EXIT_CAP);
        assert_eq!(exit_code_for(&Error::Domain("x".into())), EXIT_UNEXPECTED);
    }

    #[test]
    fn bounds_report_matches_the_closed_forms_for_chained_3() {
        let code = cmd_bounds(Some(3), false, None, 1, None).unwrap();
        assert_eq!(code, EXIT_OK);
    }
}
