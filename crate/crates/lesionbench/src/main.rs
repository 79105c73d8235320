use std::process::ExitCode;

fn main() -> ExitCode {
    lesionbench::cli::run()
}
