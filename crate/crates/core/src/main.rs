fn main() {
    std::process::exit(confgap::cli::run(std::env::args_os()));
}
