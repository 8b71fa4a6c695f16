use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use aotmpc::scenario::{run_all, stats_table, verify_transcript, ScenarioConfig};
use aotmpc::transcript::Transcript;

/// Deterministic simulator for multiparty computation over anonymous oblivious transfer.
#[derive(Parser)]
#[command(name = "aotsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for each of its seeds.
    Run {
        config: PathBuf,
        /// Directory for one transcript per seed (`<name>-<seed>.txt`).
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Check a recorded transcript against its scenario.
    Verify { transcript: PathBuf, config: PathBuf },
    /// Run every scenario matching a glob and print a TSV summary.
    Stats { pattern: String },
}

fn run(config: &Path, transcripts: Option<&Path>) -> Result<bool> {
    let cfg = ScenarioConfig::load(config)?;
    let reports = run_all(&cfg)?;
    if let Some(dir) = transcripts {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut all_ok = true;
    for r in &reports {
        let status = if r.ok() { "ok" } else { "FAIL" };
        println!("{} seed={} outcome={} {status}", cfg.name, r.seed, r.outcome);
        for f in &r.findings {
            println!("  {f}");
        }
        if let Some(dir) = transcripts {
            let path = dir.join(format!("{}-{}.txt", cfg.name, r.seed));
            fs::write(&path, r.transcript.to_text()).with_context(|| format!("writing {}", path.display()))?;
        }
        all_ok &= r.ok();
    }
    Ok(all_ok)
}

fn verify(transcript: &Path, config: &Path) -> Result<bool> {
    let cfg = ScenarioConfig::load(config)?;
    let text = fs::read_to_string(transcript).with_context(|| format!("reading {}", transcript.display()))?;
    let t = Transcript::parse(&text).with_context(|| format!("parsing {}", transcript.display()))?;
    let findings = verify_transcript(&t, &cfg);
    for f in &findings {
        println!("{f}");
    }
    if findings.is_empty() {
        println!("{}: {} events verified", transcript.display(), t.len());
    }
    Ok(findings.is_empty())
}

fn stats(pattern: &str) -> Result<bool> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad pattern {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no scenario matches {pattern:?}");
    }
    let mut runs = Vec::with_capacity(paths.len());
    for p in &paths {
        let cfg = ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
        let reports = run_all(&cfg).with_context(|| format!("running {}", p.display()))?;
        runs.push((cfg, reports));
    }
    print!("{}", stats_table(&runs));
    Ok(runs.iter().all(|(_, rs)| rs.iter().all(|r| r.ok())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, transcripts } => run(config, transcripts.as_deref()),
        Command::Verify { transcript, config } => verify(transcript, config),
        Command::Stats { pattern } => stats(pattern),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
