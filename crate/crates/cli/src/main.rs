use clap::Parser;

fn main() {
    let cli = qkl_cli::Cli::parse();
    std::process::exit(qkl_cli::execute(&cli.command));
}
