use std::process::ExitCode;

use clap::Parser;

use para::cli::{Cli, Command, PolicyArgs, ReportFormatArg};
use para::error::PipelineError;
use para::pipeline::{self, Policy, ReportFormat};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; everything argument-shaped is a
            // usage error.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn policy_from_args(args: &PolicyArgs) -> Result<Policy, PipelineError> {
    let value = args.value.ok_or_else(|| {
        PipelineError::Usage(format!(
            "--policy {} requires --value",
            args.policy.as_str()
        ))
    })?;
    Policy::from_cli(args.policy.as_str(), value)
}

fn report_format(arg: ReportFormatArg) -> ReportFormat {
    match arg {
        ReportFormatArg::Json => ReportFormat::Json,
        ReportFormatArg::Csv => ReportFormat::Csv,
    }
}

fn threads_or_default(threads: Option<usize>) -> Result<usize, PipelineError> {
    match threads {
        Some(0) => Err(PipelineError::Usage(
            "--threads must be at least 1".to_string(),
        )),
        Some(n) => Ok(n),
        None => Ok(pipeline::default_threads()),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Analyze {
            input,
            out,
            bins,
            threads,
        } => {
            if bins == 0 {
                return Err(PipelineError::Usage(
                    "--bins must be at least 1".to_string(),
                ));
            }
            let threads = threads_or_default(threads)?;
            let spectrum = pipeline::run_analyze(&input, &out, bins, threads)?;
            println!(
                "analyzed {} singular values, total energy {}",
                spectrum.len(),
                spectrum.total_energy()
            );
            Ok(())
        }
        Command::Compress {
            input,
            out,
            policy,
            report_format: fmt,
            threads,
        } => {
            let policy = policy_from_args(&policy)?;
            let threads = threads_or_default(threads)?;
            let report = pipeline::run_compress(&input, &out, policy, report_format(fmt), threads)?;
            println!(
                "kept {}/{} ranks, parameter reduction {:.4}",
                report.totals.kept_total, report.totals.b_init, report.totals.reduction_fraction
            );
            Ok(())
        }
        Command::Family {
            input,
            out,
            policy,
            values,
            report_format: fmt,
            threads,
        } => {
            let policy = policy_from_args(&PolicyArgs {
                policy: policy.policy,
                // A family overrides --value per child; any in-range value
                // stands in for validation here.
                value: policy.value.or(Some(fallback_value(policy.policy))),
            })?;
            let threads = threads_or_default(threads)?;
            let results =
                pipeline::run_family(&input, &out, policy, &values, report_format(fmt), threads)?;
            let mut first_err: Option<PipelineError> = None;
            for (value, result) in results {
                match result {
                    Ok(report) => println!(
                        "child {value}: kept {}/{} ranks",
                        report.totals.kept_total, report.totals.b_init
                    ),
                    Err(e) => {
                        if first_err.is_none() {
                            first_err = Some(e);
                        }
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Verify { parent, child, out } => {
            let report = pipeline::run_verify(&parent, &child)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| PipelineError::Compute(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            report.failure().map_or(Ok(()), Err)
        }
        Command::Synth {
            layers,
            d1,
            d2,
            rank,
            profile,
            seed,
            out,
        } => {
            let profile = pipeline::parse_profile(&profile)?;
            pipeline::run_synth(layers, (d1, d2), rank, &profile, seed, &out)?;
            println!(
                "wrote synthetic adapter with {layers} layers to {}",
                out.display()
            );
            Ok(())
        }
    }
}

/// An always-valid placeholder for family validation; children re-validate
/// with their own values.
fn fallback_value(kind: para::cli::PolicyKind) -> f64 {
    match kind {
        para::cli::PolicyKind::Gamma | para::cli::PolicyKind::Epsilon => 1.0,
        para::cli::PolicyKind::Local | para::cli::PolicyKind::Topk => 0.0,
    }
}
