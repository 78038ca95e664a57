use std::process::ExitCode;

fn main() -> ExitCode {
    livealloc::cli::main(std::env::args_os())
}
