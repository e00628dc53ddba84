use std::process::ExitCode;

fn main() -> ExitCode {
    moregin::cli::run()
}
