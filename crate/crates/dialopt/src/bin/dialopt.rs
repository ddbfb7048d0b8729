use std::process::ExitCode;

fn main() -> ExitCode {
    dialopt::cli::run()
}
