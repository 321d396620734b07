use clap::Parser;

fn main() {
    let cli = qheat_cli::Cli::parse();
    if let Err(err) = qheat_cli::run(&cli.command) {
        eprintln!("qheat: {err}");
        std::process::exit(err.exit_code());
    }
}
