use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = ricci_harnack_cli::dispatch(std::env::args_os());
    if outcome.exit_code == ricci_harnack_cli::EXIT_ERROR {
        eprintln!("{}", outcome.summary.trim_end());
    } else {
        println!("{}", outcome.summary.trim_end());
    }
    ExitCode::from(outcome.exit_code as u8)
}
