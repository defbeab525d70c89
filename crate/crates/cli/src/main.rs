fn main() {
    std::process::exit(alluvium_cli::run_cli(std::env::args_os()));
}
