use std::process::ExitCode;

fn main() -> ExitCode {
    zit_tweedie::cli::main_with_args(std::env::args_os())
}
