use clap::Parser;
use ddmec::commands::{run, Cli};

fn main() {
    // clap exits with code 2 on malformed flags.
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
