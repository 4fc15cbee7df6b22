use std::process::ExitCode;

use clap::Parser;

use cohdisc::{run_command, selftest, Cli, CliError, RunConfig};

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.flags)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))?;

    let Some(report) = pool.install(|| run_command(cli.command, &cfg)) else {
        let failures = selftest::run(&mut std::io::stdout().lock())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
        return if failures == 0 {
            Ok(())
        } else {
            Err(CliError::Invariant(format!("{failures} self-test check(s) failed")))
        };
    };
    let report = report?;
    report.table.emit(cfg.out.as_deref())?;
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(report.violations.join("; ")))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cohdisc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
