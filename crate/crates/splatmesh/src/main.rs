use clap::Parser;

fn main() {
    env_logger::init();
    let cli = splatmesh::cli::Cli::parse();
    if let Err(e) = splatmesh::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
