use clap::Parser;

fn main() {
    let args = ampud_cli::cli::CliArgs::parse();
    if let Err(err) = ampud_cli::cli::main_with_args(args) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
