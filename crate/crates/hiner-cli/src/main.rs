use clap::error::ErrorKind;
use clap::Parser;
use hiner_cli::error::CliError;
use hiner_cli::{run, Cli};

fn fail(e: CliError) -> ! {
    println!("{}", serde_json::to_string(&e.record()).expect("error record serializes"));
    std::process::exit(e.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("{e}");
            fail(CliError::Config(e.kind().to_string()));
        }
    };
    if let Err(e) = run(&cli) {
        fail(e);
    }
}
