use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use explore_core::error::HarnessError;
use explore_core::harness::{
    replay_verify, report, run_sweep, AncovaRequest, Metric, Report, SweepSpec,
};
use explore_core::metrics::GroupBy;

const EXIT_PARTIAL: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(
    name = "explore",
    version,
    about = "Run and analyse rule-discovery exploration sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a config file or a named preset.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Run the reference policies on a named preset (e.g. construction-lab).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Episodes per condition; overrides the config file.
        #[arg(long)]
        episodes: Option<usize>,
        /// Base seed for preset runs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only conditions with this policy.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Re-simulate every trajectory in a run directory.
    ReplayVerify {
        dir: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Rewrite summary tables, optionally with an ANCOVA comparison.
    Report {
        dir: PathBuf,
        /// Comma-separated groups; the first is the reference.
        #[arg(long, value_delimiter = ',')]
        ancova: Vec<String>,
        #[arg(long, value_enum, default_value_t = By::Policy)]
        by: By,
        #[arg(long, value_enum, default_value_t = MetricArg::Steps)]
        metric: MetricArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum By {
    Policy,
    Condition,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Steps,
    Accuracy,
}

fn print_report(report: &Report) {
    println!(
        "{:<32} {:>6} {:>16} {:>9} {:>8} {:>16}",
        "condition", "n", "steps", "censored", "aborted", "accuracy"
    );
    for row in &report.rows {
        println!(
            "{:<32} {:>6} {:>8.3} ± {:<5.3} {:>9} {:>8} {:>8.3} ± {:<5.3}",
            row.key.get("condition").map_or("", String::as_str),
            row.n,
            row.steps.mean,
            row.steps.sem,
            row.censored,
            row.aborted,
            row.accuracy.mean,
            row.accuracy.sem,
        );
    }
    if let Some(a) = &report.ancova {
        let o = &a.omnibus;
        println!(
            "ANCOVA ({:?}, covariate n_colors): F({}, {}) = {:.4}, p = {:.4e}",
            a.request.metric, o.df1, o.df2, o.f, o.p
        );
        for c in &a.pairwise {
            println!(
                "  {} vs {}: F({}, {}) = {:.4}, p = {:.4e}, corrected p = {:.4e}",
                c.reference,
                c.other,
                c.result.df1,
                c.result.df2,
                c.result.f,
                c.result.p,
                c.p_adjusted
            );
        }
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Run {
            config,
            preset,
            out,
            jobs,
            episodes,
            seed,
            policy,
        } => {
            let mut spec = match (&config, &preset) {
                (Some(path), _) => SweepSpec::load(path)?,
                (None, Some(name)) => SweepSpec::for_preset(name, episodes.unwrap_or(1000), seed)?,
                (None, None) => {
                    return Err(
                        HarnessError::InvalidConfig("pass --config or --preset".into()).into(),
                    )
                }
            };
            if let Some(p) = &policy {
                spec.conditions.retain(|c| &c.policy == p);
            }
            if let Some(n) = episodes {
                spec.conditions.iter_mut().for_each(|c| c.episodes = n);
            }
            if let Some(j) = jobs {
                spec.jobs = j;
            }
            let Some(out) = out.or_else(|| spec.out.clone()) else {
                return Err(
                    HarnessError::InvalidConfig("no output directory (--out)".into()).into(),
                );
            };
            spec.validate()?;
            let summary = run_sweep(&spec, &out)?;
            print_report(&report(&out, None)?);
            for c in summary.conditions.iter().filter(|c| c.wholly_failed()) {
                eprintln!(
                    "condition {} failed: {}",
                    c.name,
                    c.error.as_deref().unwrap_or("every episode aborted")
                );
            }
            println!("wrote {}", out.display());
            Ok(if summary.any_failed() {
                EXIT_PARTIAL
            } else {
                0
            })
        }
        Command::ReplayVerify { dir, json } => {
            let r = replay_verify(&dir)?;
            if r.files == 0 {
                bail!("no trajectory files in {}", dir.display());
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                for m in &r.mismatches {
                    println!(
                        "{} episode {} step {}: {} recorded {} replayed {}",
                        m.file,
                        m.episode,
                        m.step.map_or("-".to_string(), |s| s.to_string()),
                        m.field,
                        m.recorded,
                        m.replayed
                    );
                }
                for e in &r.errors {
                    println!("{}:{}: {}", e.file, e.line, e.message);
                }
                println!(
                    "{} files, {} trajectories, {} steps: {} mismatches, {} errors",
                    r.files,
                    r.trajectories,
                    r.steps,
                    r.mismatches.len(),
                    r.errors.len()
                );
            }
            Ok(if r.is_clean() { 0 } else { EXIT_PARTIAL })
        }
        Command::Report {
            dir,
            ancova,
            by,
            metric,
        } => {
            let request = (!ancova.is_empty()).then_some(AncovaRequest {
                by: match by {
                    By::Policy => GroupBy::Policy,
                    By::Condition => GroupBy::Condition,
                },
                groups: ancova,
                metric: match metric {
                    MetricArg::Steps => Metric::Steps,
                    MetricArg::Accuracy => Metric::Accuracy,
                },
            });
            let r = report(&dir, request.as_ref())
                .with_context(|| format!("reporting on {}", dir.display()))?;
            print_report(&r);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<HarnessError>(),
                    Some(HarnessError::InvalidConfig(_) | HarnessError::Env(_))
                )
            });
            ExitCode::from(if invalid { EXIT_INVALID } else { EXIT_PARTIAL })
        }
    }
}
