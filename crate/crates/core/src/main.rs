use std::process::ExitCode;

fn main() -> ExitCode {
    cavity_feedback::cli::main_with_args(std::env::args_os())
}
