use std::process::ExitCode;

fn main() -> ExitCode {
    optimal_adaboost::cli::main_with_args(std::env::args_os())
}
