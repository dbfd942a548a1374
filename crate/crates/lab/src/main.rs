use clap::Parser;

fn main() {
    let cli = smdl_lab::cli::Cli::parse();
    std::process::exit(smdl_lab::cli::main_with(cli));
}
