use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gm_lab_cli::run(std::env::args()) as u8)
}
