use clap::Parser;

fn main() {
    let cli = isoas::Cli::parse();
    std::process::exit(isoas::main_with(cli));
}
