use std::process::ExitCode;

fn main() -> ExitCode {
    subrand::cli::main()
}
