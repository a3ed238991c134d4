use std::process::ExitCode;

fn main() -> ExitCode {
    magi_pipe_cli::run()
}
