use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qidfair::cli::main_with(std::env::args_os()))
}
