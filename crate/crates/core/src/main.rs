use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    let code = psqe::cli::run_cli(std::env::args_os(), &mut stdout);
    ExitCode::from(code as u8)
}
