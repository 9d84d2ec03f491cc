use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use guidesyn::llm::{BackendConfig, BackendKind};
use guidesyn::par::Exec;
use guidesyn::pipeline::{aggregate, bench, solve_file, Aggregate, Config, Mode, RunRecord, Status};

#[derive(Parser)]
#[command(name = "guidesyn", version, about = "Enumerative SyGuS solver with language-model guidance")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one SyGuS file.
    Solve {
        file: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Run modes over every .sl file below a directory.
    Bench {
        dir: PathBuf,
        /// Comma-separated list of modes.
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<Mode>,
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Global time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the mock backend with this script.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Rule weights for the pCFG modes.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// SMT solver executable.
    #[arg(long)]
    solver: Option<String>,
    /// Run records, one JSON object per line.
    #[arg(long, default_value = "results.jsonl")]
    results: PathBuf,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            resolve(base, &mut cfg.weights);
            if let Some(llm) = &mut cfg.llm {
                resolve(base, &mut llm.script);
                resolve(base, &mut llm.transcript);
            }
            cfg
        }
        None => Config::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.timeout {
        if !(t >= 0.0) {
            bail!("timeout must be non-negative");
        }
        cfg.timeout_s = t;
    }
    if let Some(w) = &c.weights {
        cfg.weights = Some(w.clone());
    }
    if let Some(s) = &c.solver {
        cfg.solver.path = s.clone();
    }
    if let Some(script) = &c.script {
        let llm = cfg.llm.get_or_insert_with(BackendConfig::default);
        llm.kind = BackendKind::Mock;
        llm.script = Some(script.clone());
    }
    Ok(cfg)
}

fn table(rows: &[Aggregate]) -> String {
    let mut out = format!("{:<22} {:<9} {:>5} {:>7} {:>12}\n", "mode", "category", "runs", "solved", "time(s)");
    for r in rows {
        let t = r.mean_time_s.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<22} {:<9} {:>5} {:>7} {:>12}\n",
            r.mode.name(),
            r.category,
            r.runs,
            r.solved,
            t
        ));
    }
    out.push_str("time(s): mean over solved runs only\n");
    out
}

fn write_records(path: &Path, records: &[RunRecord], append: bool) -> Result<()> {
    let mut f: File = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    for r in records {
        writeln!(f, "{}", r.to_json_line())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve { file, mode, common } => {
            let cfg = load_config(&common)?;
            let run = solve_file(&file, mode, &cfg)?;
            let rec = &run.record;
            write_records(&common.results, std::slice::from_ref(rec), true)?;
            match &run.solution {
                Some(def) => println!("{}", def.to_smtlib_line()),
                None => eprintln!("{}: {:?}{}", rec.benchmark, rec.status, rec.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()),
            }
            eprintln!(
                "{} {}: {:.2}s, {} candidates, {} verifier calls, {} LLM calls",
                rec.benchmark, rec.mode, rec.elapsed_s, rec.candidates, rec.verifier_calls, rec.llm_calls
            );
            Ok(match rec.status {
                Status::Solved => ExitCode::SUCCESS,
                Status::Failed | Status::Error => ExitCode::from(1),
                Status::Timeout | Status::Unsolved => ExitCode::from(2),
            })
        }
        Cmd::Bench {
            dir,
            modes,
            repeats,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(k) = repeats {
                cfg.repeats = k;
            }
            let records = bench(&dir, &modes, &cfg, Exec::auto())?;
            write_records(&common.results, &records, false)?;
            for r in records.iter().filter(|r| r.error.is_some()) {
                log::warn!("{} [{}]: {}", r.benchmark, r.mode, r.error.as_deref().unwrap_or(""));
            }
            print!("{}", table(&aggregate(&records)));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
