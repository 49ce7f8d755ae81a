use clap::Parser;

use hccm::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("hccm: {e}");
        std::process::exit(e.exit_code());
    }
}
