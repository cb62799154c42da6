//! Command-line front end.

use std::fs::File;
use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use decomp::error::{Error, Result};
use decomp::ingest;
use decomp::model::{AnalysisConfig, DependencyMode, FilePath};
use decomp::planted::{generate_planted, recovery_report, PlantedSpec};
use decomp::recommend::{
    detect_large_active, ensemble_redraw, ensemble_split, file_activity_stats,
};
use decomp::report;

#[derive(Parser)]
#[command(name = "decomp", version, about = "Recommends decompositions of large, frequently changing source files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Transitive,
    Cochange,
    Union,
}

impl From<ModeArg> for DependencyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => DependencyMode::Direct,
            ModeArg::Transitive => DependencyMode::TransitiveWithinTarget,
            ModeArg::Cochange => DependencyMode::CoChange,
            ModeArg::Union => DependencyMode::Union,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

#[derive(Args)]
struct AnalysisArgs {
    /// Facts document (JSON).
    #[arg(long)]
    facts: PathBuf,
    /// Change document (JSON).
    #[arg(long)]
    changes: PathBuf,
    /// Repository-relative path of the target file.
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value = "transitive")]
    mode: ModeArg,
    #[arg(long, default_value_t = 3)]
    qmax: usize,
    #[arg(long, default_value_t = 2)]
    min_cluster_size: usize,
    /// Keep only the first N recommendations.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore commits before this unix timestamp.
    #[arg(long)]
    since: Option<i64>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            dependency_mode: self.mode.into(),
            q_max: self.qmax,
            min_cluster_size: self.min_cluster_size,
            seed: self.seed,
            since: self.since,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Rank files by combined fan-in and change activity.
    Detect {
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        changes: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
    },
    /// Recommend function groups to extract from the target file.
    Split(AnalysisArgs),
    /// Recommend cross-boundary groups of target and client functions.
    Redraw(AnalysisArgs),
    /// Convert a raw log stream plus a span document into a change document.
    Mine {
        /// Raw log path, or `-` for standard input.
        #[arg(long)]
        log: String,
        /// Span document (JSON).
        #[arg(long)]
        spans: PathBuf,
    },
    /// Sweep planted fixtures and report recovery quality.
    Eval {
        #[arg(long, default_value_t = 4)]
        responsibilities: usize,
        #[arg(long, default_value_t = 5)]
        funcs: usize,
        #[arg(long, default_value_t = 6)]
        clients: usize,
        #[arg(long, default_value_t = 10)]
        commits: usize,
        /// Comma-separated noise rates.
        #[arg(long, default_value = "0.0,0.05,0.1")]
        noise: String,
        /// Seeds 1..=N per noise rate.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

fn open(path: &PathBuf) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Detect {
            facts,
            changes,
            top,
            format,
        } => {
            let db = ingest::load_facts(open(&facts)?)?;
            let history = ingest::load_changes(open(&changes)?)?;
            let stats = file_activity_stats(&db, &history);
            let candidates = detect_large_active(&stats, top);
            let doc = report::build_detect_report(&candidates);
            match format {
                FormatArg::Json => print!("{}", report::render_json(&doc)),
                FormatArg::Table => print!("{}", report::render_detect_table(&doc)),
            }
        }
        Command::Split(args) => {
            let db = ingest::load_facts(open(&args.facts)?)?;
            let history = ingest::load_changes(open(&args.changes)?)?;
            let target = FilePath::new(args.target.clone());
            if !db.contains_file(&target) {
                return Err(Error::Argument(format!("unknown target file {target}")));
            }
            let ranked = ensemble_split(&db, Some(&history), &target, &args.config())?;
            let doc = report::build_report(&db, &ranked, args.top);
            match args.format {
                FormatArg::Json => print!("{}", report::render_json(&doc)),
                FormatArg::Table => print!("{}", report::render_table(&doc)),
            }
        }
        Command::Redraw(args) => {
            let db = ingest::load_facts(open(&args.facts)?)?;
            let history = ingest::load_changes(open(&args.changes)?)?;
            let target = FilePath::new(args.target.clone());
            if !db.contains_file(&target) {
                return Err(Error::Argument(format!("unknown target file {target}")));
            }
            let ranked = ensemble_redraw(&db, &history, &target, &args.config())?;
            let doc = report::build_report(&db, &ranked, args.top);
            match args.format {
                FormatArg::Json => print!("{}", report::render_json(&doc)),
                FormatArg::Table => print!("{}", report::render_table(&doc)),
            }
        }
        Command::Mine { log, spans } => {
            let commits = if log == "-" {
                let mut buf = String::new();
                io::stdin().read_to_string(&mut buf)?;
                ingest::parse_git_log_stream(buf.as_bytes())?
            } else {
                ingest::parse_git_log_stream(open(&PathBuf::from(log))?)?
            };
            let span_table = ingest::load_spans(open(&spans)?)?;
            let build = ingest::build_change_history(&commits, &span_table)?;
            for (commit, file) in &build.fallbacks {
                eprintln!("warning: no spans for {file} at {commit}; file-level attribution only");
            }
            let doc = ingest::changes_to_document(&build.history);
            print!("{}", report::render_json(&doc));
        }
        Command::Eval {
            responsibilities,
            funcs,
            clients,
            commits,
            noise,
            seeds,
        } => {
            let noise_rates: Vec<f64> = noise
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Argument(format!("bad noise rate: {s}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            for &rate in &noise_rates {
                for seed in 1..=seeds {
                    let spec = PlantedSpec {
                        n_responsibilities: responsibilities,
                        funcs_per_responsibility: funcs,
                        clients_per_responsibility: clients,
                        commits_per_responsibility: commits,
                        noise_rate: rate,
                        seed,
                    };
                    let data = generate_planted(&spec)?;
                    let config = AnalysisConfig::default();
                    let split_ari = ensemble_split(
                        &data.facts,
                        Some(&data.history),
                        &data.target_file,
                        &config,
                    )
                    .and_then(|r| recovery_report(&r.recommendations, &data.split_truth))
                    .map(|r| r.best_match_ari)
                    .unwrap_or(0.0);
                    let redraw_truth: Vec<_> = data
                        .redraw_truth
                        .iter()
                        .map(|(t, c)| t.union(c).cloned().collect())
                        .collect();
                    let redraw_ari =
                        ensemble_redraw(&data.facts, &data.history, &data.target_file, &config)
                            .and_then(|r| recovery_report(&r.recommendations, &redraw_truth))
                            .map(|r| r.best_match_ari)
                            .unwrap_or(0.0);
                    rows.push(report::SweepRow {
                        noise: format!("{rate:.6}"),
                        seed,
                        split_ari: format!("{split_ari:.6}"),
                        redraw_ari: format!("{redraw_ari:.6}"),
                    });
                }
            }
            print!("{}", report::render_sweep_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
