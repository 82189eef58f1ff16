use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dde_stab::cli::{run, Command, Invocation, EXIT_USAGE};
use dde_stab::GapForm;

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Weights,
    Discretize,
    Classify,
    Analyze,
    Sweep,
    Simulate,
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Paper,
    Transposed,
}

/// Stability analysis and parameter synthesis for linear delay differential equations.
#[derive(Parser)]
#[command(name = "dde-stab", version)]
struct Args {
    command: Cmd,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Orientation of the constant LMI term; overrides the config.
    #[arg(long, value_enum)]
    form: Option<Form>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let command = match args.command {
        Cmd::Weights => Command::Weights,
        Cmd::Discretize => Command::Discretize,
        Cmd::Classify => Command::Classify,
        Cmd::Analyze => Command::Analyze,
        Cmd::Sweep => Command::Sweep,
        Cmd::Simulate => Command::Simulate,
        Cmd::Verify => Command::Verify,
    };
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        form: args.form.map(|f| match f {
            Form::Paper => GapForm::Paper,
            Form::Transposed => GapForm::Transposed,
        }),
    };
    let code = run(&inv, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
