use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perpetua::law::CATALOGUE;
use perpetua::parallel::with_threads;
use perpetua_cli::record::{read_records, write_records};
use perpetua_cli::report::{render, Format};
use perpetua_cli::scenario::{threads_from_env, PolicyFile, Scenario, ScenarioFile, EXPERIMENTS};
use perpetua_cli::suites::{render_table, run_suite};
use perpetua_cli::{experiments, CliError, CliResult};

#[derive(Parser)]
#[command(name = "perpetua", version, about = "Perpetuities, branching random walks and their spine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and append JSONL records.
    Run(RunArgs),
    /// Run a fixed-seed check suite and print a pass/fail table.
    Verify {
        /// rvkit, perpetuity, ladder, brw, spine, inequalities or all.
        suite: String,
        /// Reduce replicate counts tenfold.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render CSV tables and SVG plots from JSONL results.
    Report {
        results: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// csv, svg or all.
        #[arg(long, default_value = "all")]
        format: String,
    },
    /// List law families in their text form.
    ListLaws,
}

#[derive(Args)]
struct RunArgs {
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    law: Option<String>,
    /// Regularly varying function, e.g. `power:alpha=1`.
    #[arg(long = "b")]
    bspec: Option<String>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    pop_cap: Option<usize>,
    #[arg(long)]
    gen_cap: Option<usize>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Worker threads; falls back to PERPETUA_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Generation or step horizon for experiments that take one.
    #[arg(long)]
    horizon: Option<usize>,
    /// JSONL file to append to (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill `elapsed_ms`; timed output is not reproducible.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn into_scenario(self) -> CliResult<Scenario> {
        let file = match &self.scenario {
            Some(p) => ScenarioFile::load(p)?,
            None => ScenarioFile::default(),
        };
        let flags = ScenarioFile {
            seed: self.seed,
            replicates: self.reps,
            law: self.law,
            bspec: self.bspec,
            experiment: self.experiment,
            horizon: self.horizon,
            output: self.out,
            threads: self.threads,
            policy: PolicyFile {
                eps: self.eps,
                nmax: self.nmax,
                pop_cap: self.pop_cap,
                gen_cap: self.gen_cap,
                confidence: self.confidence,
            },
        };
        Scenario::resolve(flags.over(file), self.timing)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let sc = args.into_scenario()?;
            let records = experiments::run(&sc)?;
            write_records(&records, sc.output.as_deref())?;
            let failed = records.iter().filter(|r| r.failed()).count();
            if failed > 0 {
                return Err(CliError::Failed(failed));
            }
        }
        Command::Verify { suite, quick, threads } => {
            let threads = match threads {
                Some(t) => t,
                None => threads_from_env()?,
            };
            let checks = with_threads(threads, || run_suite(&suite, quick))?;
            let _ = write!(std::io::stdout().lock(), "{}", render_table(&checks));
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Failed(failed));
            }
        }
        Command::Report { results, out, format } => {
            let format: Format = format.parse()?;
            let records = read_records(&results)?;
            let mut stdout = std::io::stdout().lock();
            for p in render(&records, &out, format)? {
                let _ = writeln!(stdout, "{}", p.display());
            }
        }
        Command::ListLaws => {
            // Write errors (a closed pipe) are not worth a failure here.
            let mut stdout = std::io::stdout().lock();
            for (spec, about) in CATALOGUE {
                let _ = writeln!(stdout, "{spec:<44} {about}");
            }
            let _ = writeln!(stdout, "\nexperiments: {}", EXPERIMENTS.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perpetua: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
