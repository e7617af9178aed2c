use clap::Parser;
use homagg::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = homagg::run(cli) {
        eprintln!("homagg: {e}");
        std::process::exit(e.exit_code());
    }
}
