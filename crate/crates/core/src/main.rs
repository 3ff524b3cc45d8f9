use std::process::ExitCode;

fn main() -> ExitCode {
    zone2_relay::cli::main_with_args(std::env::args_os())
}
