use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crsim::io::{
    parse_censoring, parse_cohorts, parse_grid, scan_result_json, test_report_json, write_cohorts,
    write_study_csv, RunConfig, StudyConfig, SCHEMA_VERSION,
};
use crsim::rng::{tag, RngStream};
use crsim::scan::{default_grid, min_epsilon, ScanConfig};
use crsim::simulate::{draw_cohort, Group};
use crsim::study::{
    run_scenario, threshold_table, CellConfig, CensoringSetting, Scenario, ScenarioName,
};
use crsim::testkit::{run_similarity_test, Measure, TestConfig};
use crsim::{Censoring, Error, Params};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "crsim",
    version,
    about = "Similarity tests for competing-risks models"
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether two groups are similar at a fixed threshold
    Test(TestArgs),
    /// Find the smallest threshold at which similarity is established
    Scan(ScanArgs),
    /// Draw two cohorts and write them as CSV
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study described by a TOML file
    Study(StudyArgs),
    /// Print the similarity thresholds of the built-in scenarios
    Thresholds(ThresholdArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV with columns group,time,state
    #[arg(long)]
    data: PathBuf,
    /// TOML run configuration; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    measure: Option<Measure>,
    /// adm:<T> or exp, applied to both groups
    #[arg(long)]
    censoring: Option<String>,
    /// Censoring of group 2 when it differs from group 1
    #[arg(long)]
    censoring2: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Time horizon (defaults to the administrative horizon)
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of causes (defaults to the largest state in the data)
    #[arg(long)]
    k: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    data: DataArgs,
    /// lo:hi:step (default 0.01:0.30:0.01)
    #[arg(long)]
    grid: Option<String>,
    /// Narrow the result by bisection between grid points
    #[arg(long)]
    refine: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario (Margin, Null, Alt1..Alt5)
    #[arg(long, conflicts_with_all = ["rates1", "rates2"])]
    scenario: Option<ScenarioName>,
    /// Comma-separated intensities of group 1
    #[arg(long, requires = "rates2")]
    rates1: Option<String>,
    #[arg(long, requires = "rates1")]
    rates2: Option<String>,
    /// adm:<T> or exp:<rate> (default adm:90)
    #[arg(long)]
    censoring: Option<String>,
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Emit JSON instead of a table
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            })
        }
    }
}

fn dispatch(cli: Cli) -> crsim::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.or_else(|| config_threads(&cli.command)) {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Study(a) => cmd_study(a),
        Command::Thresholds(a) => cmd_thresholds(a),
    })
}

fn config_threads(command: &Command) -> Option<usize> {
    let path = match command {
        Command::Test(a) => a.data.config.as_deref(),
        Command::Scan(a) => a.data.config.as_deref(),
        Command::Study(a) => return StudyConfig::load(&a.config).ok()?.threads,
        _ => None,
    };
    RunConfig::load(path?).ok()?.threads
}

/// Flags merged over the optional config file.
struct Resolved {
    cfg: RunConfig,
    censoring1: Censoring,
    censoring2: Censoring,
    tau: f64,
}

fn resolve(
    d: &DataArgs,
    epsilon: Option<f64>,
    grid: Option<String>,
    refine: bool,
) -> crsim::Result<Resolved> {
    let mut cfg = match &d.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = Some(v);
            }
        };
    }
    set!(measure, d.measure);
    set!(censoring, d.censoring.clone());
    set!(censoring2, d.censoring2.clone());
    set!(alpha, d.alpha);
    set!(bootstrap, d.bootstrap);
    set!(tau, d.tau);
    set!(seed, d.seed);
    set!(k, d.k);
    set!(out, d.out.as_ref().map(|p| p.display().to_string()));
    if epsilon.is_some() {
        cfg.grid = None;
    }
    if grid.is_some() {
        cfg.epsilon = None;
    }
    set!(epsilon, epsilon);
    set!(grid, grid);
    if refine {
        cfg.refine = Some(true);
    }
    cfg.check()?;

    let text1 = cfg
        .censoring
        .clone()
        .ok_or_else(|| Error::InvalidConfig("--censoring is required (adm:<T> or exp)".into()))?;
    let censoring1 = parse_censoring(&text1)?;
    let censoring2 = match &cfg.censoring2 {
        Some(t) => parse_censoring(t)?,
        None => censoring1,
    };
    let tau = match (cfg.tau, censoring1, censoring2) {
        (Some(t), ..) => t,
        (None, Censoring::Administrative { horizon }, _)
        | (None, _, Censoring::Administrative { horizon }) => horizon,
        _ => {
            return Err(Error::InvalidConfig(
                "--tau is required under exponential censoring".into(),
            ))
        }
    };
    Ok(Resolved {
        cfg,
        censoring1,
        censoring2,
        tau,
    })
}

fn cmd_test(a: TestArgs) -> crsim::Result<()> {
    let r = resolve(&a.data, a.epsilon, None, false)?;
    let epsilon = r
        .cfg
        .epsilon
        .ok_or_else(|| Error::InvalidConfig("--epsilon is required".into()))?;
    let (c1, c2) = parse_cohorts(&a.data.data, r.cfg.k)?;
    let cfg = TestConfig {
        epsilon,
        alpha: r.cfg.alpha.unwrap_or(0.05),
        bootstrap: r.cfg.bootstrap.unwrap_or(1000),
        tau: r.tau,
        measure: r.cfg.measure.unwrap_or(Measure::TransitionProbabilities),
        seed: r.cfg.seed.unwrap_or(0),
    };
    let report = run_similarity_test(&c1, &c2, &r.censoring1, &r.censoring2, &cfg)?;
    eprintln!(
        "d_hat = {:.6}  q_alpha = {:.6}  p = {:.4}  {}",
        report.d_hat,
        report.q_alpha,
        report.p_value,
        if report.reject {
            "similar (H0 rejected)"
        } else {
            "not shown similar"
        }
    );
    write_text(
        r.cfg.out.as_deref().map(Path::new),
        &test_report_json(&report)?,
    )
}

fn cmd_scan(a: ScanArgs) -> crsim::Result<()> {
    let r = resolve(&a.data, None, a.grid, a.refine)?;
    let grid = match &r.cfg.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let (c1, c2) = parse_cohorts(&a.data.data, r.cfg.k)?;
    let cfg = ScanConfig {
        alpha: r.cfg.alpha.unwrap_or(0.05),
        bootstrap: r.cfg.bootstrap.unwrap_or(1000),
        tau: r.tau,
        measure: r.cfg.measure.unwrap_or(Measure::TransitionProbabilities),
        seed: r.cfg.seed.unwrap_or(0),
        refine: r.cfg.refine.unwrap_or(false),
    };
    let result = min_epsilon(&c1, &c2, &r.censoring1, &r.censoring2, &grid, &cfg)?;
    eprintln!("{:>8} {:>8} {:>10}", "epsilon", "p", "q_alpha");
    for i in 0..result.grid.len() {
        eprintln!(
            "{:>8.4} {:>8.4} {:>10.6}{}",
            result.grid[i],
            result.p_values[i],
            result.q_alphas[i],
            if result.rejections[i] { "  *" } else { "" }
        );
    }
    if !result.monotone {
        eprintln!("warning: rejections are not monotone along the grid; epsilon_hat follows the step-down sequence");
    }
    match result.epsilon_hat {
        Some(e) => match result.epsilon_hat_refined {
            Some(r) => eprintln!(
                "d_hat = {:.6}  epsilon_hat = {e}  refined = {r:.4}",
                result.d_hat
            ),
            None => eprintln!("d_hat = {:.6}  epsilon_hat = {e}", result.d_hat),
        },
        None => eprintln!("d_hat = {:.6}  no rejection on the grid", result.d_hat),
    }
    write_text(
        r.cfg.out.as_deref().map(Path::new),
        &scan_result_json(&result)?,
    )
}

fn parse_rates(s: &str) -> crsim::Result<Params> {
    let rates = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad intensity {x:?}")))
        })
        .collect::<crsim::Result<Vec<_>>>()?;
    Params::new(rates)
}

fn cmd_simulate(a: SimulateArgs) -> crsim::Result<()> {
    let censoring = parse_censoring(a.censoring.as_deref().unwrap_or("adm:90"))?;
    let (p1, p2) = match (a.scenario, &a.rates1, &a.rates2) {
        (Some(name), ..) => {
            let (g1, g2) = name.intensities();
            (Params::new(g1.to_vec())?, Params::new(g2.to_vec())?)
        }
        (None, Some(r1), Some(r2)) => (parse_rates(r1)?, parse_rates(r2)?),
        _ => {
            return Err(Error::InvalidConfig(
                "give --scenario or both --rates1 and --rates2".into(),
            ))
        }
    };
    if p1.k() != p2.k() {
        return Err(Error::CauseCountMismatch {
            left: p1.k(),
            right: p2.k(),
        });
    }
    let c1 = draw_cohort(
        &p1,
        &censoring,
        a.n1,
        Group::First,
        &mut RngStream::keyed(a.seed, &[tag::DATA, 0, 1]),
    )?;
    let c2 = draw_cohort(
        &p2,
        &censoring,
        a.n2,
        Group::Second,
        &mut RngStream::keyed(a.seed, &[tag::DATA, 0, 2]),
    )?;
    match &a.out {
        Some(p) => write_cohorts(BufWriter::new(File::create(p)?), &c1, &c2),
        None => write_cohorts(io::stdout().lock(), &c1, &c2),
    }
}

fn cmd_study(a: StudyArgs) -> crsim::Result<()> {
    let cfg = StudyConfig::load(&a.config)?;
    let names = cfg.scenario_names()?;
    let settings: Vec<CensoringSetting> = cfg.censoring_settings()?;
    if names.is_empty() || settings.is_empty() || cfg.sizes.is_empty() || cfg.measures.is_empty() {
        return Err(Error::InvalidConfig(
            "scenarios, censorings, sizes and measures must be non-empty".into(),
        ));
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut results = Vec::new();
    for &name in &names {
        for &setting in &settings {
            let scenario = Scenario::new(name, setting);
            for &[n1, n2] in &cfg.sizes {
                for &measure in &cfg.measures {
                    let cell = CellConfig {
                        n1,
                        n2,
                        n_sim: a.n_sim.unwrap_or(cfg.n_sim),
                        bootstrap: a.bootstrap.unwrap_or(cfg.bootstrap),
                        alpha: a.alpha.unwrap_or(cfg.alpha),
                        measure,
                        seed,
                    };
                    let r = run_scenario(&scenario, &cell)?;
                    eprintln!(
                        "{:<7} {:<11} {:>4}/{:<4} {:<4} rate {:.4}  ({:.1}s)",
                        name.label(),
                        r.censoring,
                        n1,
                        n2,
                        measure.label(),
                        r.rejection_rate,
                        r.wall_time
                    );
                    results.push(r);
                }
            }
        }
    }
    let out = a.out.or_else(|| cfg.out.clone().map(PathBuf::from));
    match out {
        Some(p) => write_study_csv(BufWriter::new(File::create(p)?), &results),
        None => write_study_csv(io::stdout().lock(), &results),
    }
}

fn cmd_thresholds(a: ThresholdArgs) -> crsim::Result<()> {
    let rows = threshold_table();
    let text = if a.json {
        serde_json::to_string_pretty(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "thresholds",
            "rows": rows,
        }))?
    } else {
        let mut s = format!(
            "{:<11} {:>9} {:>9} {:>9} {:>5}\n",
            "censoring", "eps_int", "eps_inf", "t_max", "cause"
        );
        for r in &rows {
            s.push_str(&format!(
                "{:<11} {:>9.5} {:>9.5} {:>9.3} {:>5}\n",
                r.censoring, r.epsilon_int, r.epsilon_inf, r.arg_time, r.arg_cause
            ));
        }
        s.pop();
        s
    };
    write_text(a.out.as_deref(), &text)
}

fn write_text(out: Option<&Path>, text: &str) -> crsim::Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n"))?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}
