use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use emscat_cli::run::report_error;
use emscat_cli::{emit_config, parse_config, run, RunError, RunOptions, Task};

/// Weak-drive photon scattering from multi-level emitters.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Validate the configuration and exit.
    #[arg(long)]
    check: bool,
    /// Print the normalized configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Override the task named in the configuration.
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Worker threads; 1 disables parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn fail(err: RunError) -> ExitCode {
    let code = err.exit_code();
    report_error(&err, std::io::stderr());
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(source) => return fail(RunError::Io { path: args.config, source }),
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(issues) => return fail(RunError::Config(issues)),
    };
    if let Some(task) = args.task {
        config.task = task;
        let issues = emscat_cli::config::validate(&config);
        if !issues.is_empty() {
            return fail(RunError::Config(issues));
        }
    }
    if args.print_config {
        println!("{}", emit_config(&config));
        return ExitCode::SUCCESS;
    }
    if args.check {
        println!("ok");
        return ExitCode::SUCCESS;
    }
    let opts = RunOptions { threads: args.threads, output_dir: args.output_dir };
    match run(&config, &opts) {
        Ok(summary) => {
            println!("{}", summary.csv.display());
            println!("{}", summary.metadata.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
