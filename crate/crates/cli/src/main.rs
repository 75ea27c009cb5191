use clap::Parser;

fn main() {
    let cli = spt_cli::Cli::parse();
    if let Err(e) = spt_cli::run(cli, &mut std::io::stdout()) {
        eprintln!("spt: {e}");
        std::process::exit(e.exit_code());
    }
}
