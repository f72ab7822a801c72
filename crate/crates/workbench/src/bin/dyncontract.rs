use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dyncontract::cli::run(std::env::args_os()))
}
