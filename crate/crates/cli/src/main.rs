use clap::Parser;

fn main() {
    let cli = hitlab_cli::Cli::parse();
    std::process::exit(hitlab_cli::dispatch(cli));
}
