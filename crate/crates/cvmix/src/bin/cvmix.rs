use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvmix::program::{CircuitProgram, ProgramError, RunOptions};
use cvmix::scenarios::{run_scenario, ScenarioError, ScenarioOptions, SCENARIOS};

const EXIT_SCHEMA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Gaussian-mixture simulator for continuous-variable circuits.
#[derive(Parser, Debug)]
#[command(name = "cvmix", version)]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, env = "CVMIX_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, env = "CVMIX_OUT_DIR", default_value = ".", global = true)]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "CVMIX_THREADS", default_value_t = 0, global = true)]
    threads: usize,
    /// Peaks whose sup-magnitude falls below this fraction of the largest are
    /// dropped after each conditioning step.
    #[arg(long, env = "CVMIX_PRUNE_TOL", default_value_t = 1e-12, global = true)]
    prune_tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a JSON circuit program and write its declared outputs.
    Run { program: PathBuf },
    /// Run a built-in scenario and write `<name>.json` to the output directory.
    Scenario {
        name: String,
        /// Parameter overrides as inline JSON.
        #[arg(long, conflicts_with = "params_file")]
        params: Option<String>,
        /// Parameter overrides from a JSON file.
        #[arg(long)]
        params_file: Option<PathBuf>,
        /// Output file name; defaults to `<name>.json`.
        #[arg(long)]
        output: Option<String>,
    },
    /// Check a program without running it.
    Validate { program: PathBuf },
    /// List the built-in scenarios.
    Scenarios,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn program_code(e: &ProgramError) -> u8 {
    if e.is_schema() {
        EXIT_SCHEMA
    } else {
        EXIT_RUNTIME
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if !(cli.prune_tol >= 0.0 && cli.prune_tol < 1.0) {
        return fail(EXIT_SCHEMA, format!("--prune-tol {} must lie in [0, 1)", cli.prune_tol));
    }
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            return fail(EXIT_RUNTIME, e);
        }
    }
    match &cli.command {
        Command::Run { program } => {
            let p = match CircuitProgram::load(program) {
                Ok(p) => p,
                Err(e) => return fail(program_code(&e), e),
            };
            let opts = RunOptions {
                seed: cli.seed,
                prune_tol: cli.prune_tol,
                out_dir: cli.out_dir.clone(),
            };
            match p.run(&opts) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(program_code(&e), e),
            }
        }
        Command::Validate { program } => match CircuitProgram::load(program) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(program_code(&e), e),
        },
        Command::Scenario {
            name,
            params,
            params_file,
            output,
        } => {
            let raw = match (params, params_file) {
                (Some(s), _) => s.clone(),
                (None, Some(f)) => match fs::read_to_string(f) {
                    Ok(s) => s,
                    Err(e) => return fail(EXIT_SCHEMA, format!("{}: {e}", f.display())),
                },
                (None, None) => "{}".to_string(),
            };
            let value: serde_json::Value = match serde_json::from_str(&raw) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_SCHEMA, format!("scenario parameters: {e}")),
            };
            let opts = ScenarioOptions {
                seed: cli.seed,
                prune_tol: cli.prune_tol,
            };
            let result = match run_scenario(name, &value, &opts) {
                Ok(r) => r,
                Err(e @ (ScenarioError::Unknown(_) | ScenarioError::Params(_))) => return fail(EXIT_SCHEMA, e),
                Err(e) => return fail(EXIT_RUNTIME, e),
            };
            if let Err(e) = fs::create_dir_all(&cli.out_dir) {
                return fail(EXIT_RUNTIME, format!("{}: {e}", cli.out_dir.display()));
            }
            let file = cli.out_dir.join(output.clone().unwrap_or_else(|| format!("{name}.json")));
            let body = serde_json::to_string_pretty(&result).expect("result serializes") + "\n";
            if let Err(e) = fs::write(&file, body) {
                return fail(EXIT_RUNTIME, format!("{}: {e}", file.display()));
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "file": file.display().to_string(),
                    "runs": result.runs.len(),
                    "aggregate": result.aggregate,
                }))
                .expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Command::Scenarios => {
            for s in SCENARIOS {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
    }
}
