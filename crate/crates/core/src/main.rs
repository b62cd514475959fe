fn main() {
    std::process::exit(wmlmc::cli::run_cli(std::env::args_os()));
}
