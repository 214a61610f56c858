use clap::Parser;

use netlayout_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = run(cli, &mut std::io::stderr()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
