use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ftcoll::cli::commands::run(std::env::args_os()))
}
