use std::process::ExitCode;

fn main() -> ExitCode {
    let code = dressed_qubit::cli::run_with_args(std::env::args_os());
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
