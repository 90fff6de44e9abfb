use std::process::ExitCode;

fn main() -> ExitCode {
    wrof::cli::main()
}
