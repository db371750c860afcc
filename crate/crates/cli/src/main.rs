use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = dagsched_cli::parse_args();
    match dagsched_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`dagsched gen ... | head`) is not a failure.
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(dagsched_cli::exit_code(&e))
        }
    }
}
